"""Finite-rank approximation at order zero via a partition of unity.

A greedy farthest-point cover of the tail compact K by metric balls certifies
the value oscillation eps/N inside every ball (N = 1 + sup of the weight on
the inflated neighbourhood W). Smooth bumps on the balls, normalized under a
cut-off that is 1 on K, give the partition; the approximant interpolates f at
the ball centers.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import CoverDefectError, GeometryError, ResolutionError
from .funcmodel import (FiniteRankFunction, SampledFunction, SeminormIndex,
                        sf_sub)
from .geometry import Box, Region
from .mollify import QuadratureSpec
from .cutoff import build_cutoff
from .seminorms import SeminormValue, find_tail_compact, weighted_seminorm
from .weights import WeightFamily, WeightIndex


@dataclass
class Cover:
    centers: np.ndarray          # (n, d) ball centers, all in K
    radii: np.ndarray            # (n,) certified oscillation radii
    values: np.ndarray           # (n, m) f at the centers
    N_const: float
    W: Region
    K: Region
    target_osc: float
    cover_margin: float

    @property
    def n_centers(self) -> int:
        return len(self.centers)


def oscillation_cover(f: SampledFunction, K: Region, fam: WeightFamily, j: int,
                      alpha: SeminormIndex, eps: float,
                      cover_margin: float = 0.0,
                      extra_points: Optional[np.ndarray] = None) -> Cover:
    """Greedy farthest-point ball cover with certified value oscillation.

    Certification runs over K's grid plus any extra points (e.g. domain-grid
    points near K, which the seminorm scans will hit); centers stay inside K.
    Every certification point must fall strictly inside some ball with
    `cover_margin` slack, so continuum points that close to the grid remain
    covered.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    step = np.max(K.spacing()) if not K.is_empty else np.max(f.domain.spacing())
    W = K.inflate(f.domain.spacing())
    n_const = 1.0 + float(np.max(fam.eval_batch(WeightIndex(j, 0), W.grid_points())))
    target = eps / n_const

    kpts = K.grid_points()
    if len(kpts) == 0:
        raise GeometryError("cannot cover an empty compact")
    pts = kpts if extra_points is None else np.concatenate(
        [kpts, np.atleast_2d(extra_points)])
    vals = f.eval(pts)
    center_ok = K.contains(pts)

    def ball_radius(ci: int) -> float:
        dev = alpha.apply(vals - vals[ci])
        dist = np.linalg.norm(pts - pts[ci], axis=1)
        violating = dev >= target
        if not np.any(violating):
            r = float(np.max(dist)) + step
        else:
            d_viol = float(np.min(dist[violating]))
            d_ok = float(np.max(dist[dist < d_viol]))
            r = 0.5 * (d_ok + d_viol)
        if r < 0.5 * step:
            raise ResolutionError(
                f"oscillation target {target:.3g} needs balls below the grid "
                f"resolution {step:.3g}")
        return r

    first = int(np.argmax(center_ok))  # lexicographic-first K point
    center_idx = [first]
    radii = [ball_radius(first)]
    dist_to_centers = np.linalg.norm(pts - pts[first], axis=1)
    covered = dist_to_centers + cover_margin < radii[0]
    taken = {first}
    while not np.all(covered):
        cand = np.where(~covered)[0]
        far = int(cand[int(np.argmax(dist_to_centers[cand]))])
        if center_ok[far]:
            pick = far
        else:
            # snap a fringe certification point to the nearest admissible center
            d = np.linalg.norm(pts[center_ok] - pts[far], axis=1)
            pick = int(np.where(center_ok)[0][int(np.argmin(d))])
        if pick in taken:
            raise ResolutionError(
                "cover cannot close: a certification point stays uncovered at "
                f"{pts[far]}; refine the grid or relax the tolerance")
        taken.add(pick)
        center_idx.append(pick)
        r = ball_radius(pick)
        radii.append(r)
        d_new = np.linalg.norm(pts - pts[pick], axis=1)
        covered |= d_new + cover_margin < r
        dist_to_centers = np.minimum(dist_to_centers, d_new)

    return Cover(
        centers=pts[center_idx],
        radii=np.asarray(radii),
        values=vals[center_idx],
        N_const=n_const,
        W=W,
        K=K,
        target_osc=target,
        cover_margin=cover_margin,
    )


def _bump_matrix(points: np.ndarray, centers: np.ndarray, radii: np.ndarray) -> np.ndarray:
    """(n_centers, N) matrix of exp(-1/(1-|u|^2)) bumps, vectorized."""
    diffs = (points[None, :, :] - centers[:, None, :]) / radii[:, None, None]
    t = np.einsum("rnd,rnd->rn", diffs, diffs)
    out = np.zeros_like(t)
    mask = t < 1.0 - 1e-8
    out[mask] = np.exp(-1.0 / (1.0 - t[mask]))
    return out


class PartitionBasis:
    """All partition functions evaluated together, with a one-batch cache."""

    def __init__(self, cover: Cover, theta: SampledFunction):
        self.cover = cover
        self.theta = theta
        self._key = None
        self._val = None

    def eval_all(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        key = (pts.shape, pts.tobytes())
        if key == self._key:
            return self._val
        theta = self.theta.eval_extended(pts)[:, 0]
        bumps = _bump_matrix(pts, self.cover.centers, self.cover.radii)
        total = np.sum(bumps, axis=0)
        live = total > 0.0
        phis = np.zeros_like(bumps)
        if np.any(live):
            phis[:, live] = theta[live] * bumps[:, live] / total[live]
        self._key = key
        self._val = phis
        return phis


def build_partition(cover: Cover, K: Region, max_deriv: int,
                    quad: QuadratureSpec) -> tuple[list[SampledFunction], PartitionBasis]:
    """Smooth partition: phi_i = theta * b_i / sum(b), equal to 1 summed on K."""
    step = float(np.min(K.spacing())) if not K.is_empty else 1.0
    s = (2.0 / 3.0) * step
    theta_cut = build_cutoff(K, s, max_deriv, quad, measure_table=False)
    theta = theta_cut.psi
    basis = PartitionBasis(cover, theta)

    # cover-defect audit: sum of bumps must be positive on all of supp theta
    check = theta.support.with_resolution(
        tuple(3 * (n - 1) + 1 for n in K.points_per_axis))
    pts = check.grid_points()
    theta_vals = theta.eval_extended(pts)[:, 0]
    total = np.sum(_bump_matrix(pts, cover.centers, cover.radii), axis=0)
    bad = (theta_vals > 1e-300) & (total <= 0.0)
    if np.any(bad):
        witness = pts[int(np.argmax(bad))]
        raise CoverDefectError(
            f"bump sum vanishes inside the cut-off support at {witness}")

    phis = []
    for i in range(cover.n_centers):
        ball = Box(tuple(cover.centers[i] - cover.radii[i]),
                   tuple(cover.centers[i] + cover.radii[i]))
        support = theta.support.intersect_box(ball)

        def make(idx):
            return lambda pts_: basis.eval_all(pts_)[idx][:, None]

        phis.append(SampledFunction(
            domain=theta.domain,
            order=max_deriv,
            value_dim=1,
            evaluator=make(i),
            support=support,
            name=f"phi_{i}",
        ))
    return phis, basis


@dataclass
class LocalizationReport:
    n_centers: int
    rank: int
    N_const: float
    eps: float
    measured: SeminormValue
    four_eps_ok: bool
    K: Region = None
    target_osc: float = 0.0

    def to_json_dict(self) -> dict:
        return {
            "n_centers": self.n_centers,
            "rank": self.rank,
            "N_const": self.N_const,
            "eps": self.eps,
            "measured_error": self.measured.value,
            "four_eps_bound_ok": self.four_eps_ok,
        }


def finite_rank_c0_approx(f: SampledFunction, fam: WeightFamily, j: int,
                          alpha: SeminormIndex, eps: float, search: Region,
                          quad: QuadratureSpec, max_deriv: int = 4,
                          support_constraint: Optional[Region] = None,
                          ) -> tuple[FiniteRankFunction, LocalizationReport]:
    """Order-zero finite-rank approximation with the 4 eps proof-chain bound."""
    idx = WeightIndex(j, 0)
    step = float(np.min(f.domain.spacing()))
    K = find_tail_compact(f, fam, idx, alpha, eps, delta=step, search=search)

    if K.is_empty:
        # tail below eps outside nothing: the whole seminorm is below eps
        g = FiniteRankFunction([])
        measured = weighted_seminorm(f, fam, idx, alpha)
        report = LocalizationReport(0, 0, 1.0, eps, measured,
                                    measured.value < 4 * eps, K, eps)
        return g, report
    if K.volume() == 0.0:
        full = weighted_seminorm(f, fam, idx, alpha)
        if full.value == 0.0:
            report = LocalizationReport(0, 0, 1.0, eps, full, True, K, eps)
            return FiniteRankFunction([]), report
        # a single high point survived the tail search; widen to one grid cell
        K = K.inflate(0.5 * np.asarray(f.domain.spacing())).intersect(f.domain)

    s = (2.0 / 3.0) * float(np.min(K.spacing()))
    if support_constraint is not None:
        # trim K back into the constraint; the weighted integrand vanishes on
        # the trimmed sliver (it lies outside supp f), so the tail bound holds
        K = K.intersect(support_constraint.deflate(0.75 * s))
        if K.is_empty:
            raise GeometryError("support constraint leaves no room for the tail compact")
        s = (2.0 / 3.0) * float(np.min(K.spacing()))
        if not support_constraint.covers(K.inflate(0.75 * s)):
            raise GeometryError("support constraint does not contain the inflated tail compact")
    halfdiag = 0.5 * float(np.linalg.norm(K.spacing()))
    margin = 0.75 * s + halfdiag

    # the seminorm scans hit domain-grid points near K; certify those too
    dom_pts = f.domain.grid_points()
    near = K.inflate(0.75 * s).contains(dom_pts)
    cover = oscillation_cover(f, K, fam, j, alpha, eps,
                              cover_margin=margin, extra_points=dom_pts[near])
    phis, basis = build_partition(cover, K, max_deriv, quad)
    values = np.asarray(cover.values)

    def fast_eval(pts):
        return basis.eval_all(np.atleast_2d(np.asarray(pts, dtype=float))).T @ values

    g = FiniteRankFunction([(phi, cover.values[i]) for i, phi in enumerate(phis)],
                           fast_eval=fast_eval)

    g_sf = g.as_sampled(f.domain, order=0, value_dim=f.value_dim)
    measured = weighted_seminorm(sf_sub(f, g_sf), fam, idx, alpha)
    report = LocalizationReport(
        n_centers=cover.n_centers,
        rank=g.rank,
        N_const=cover.N_const,
        eps=eps,
        measured=measured,
        four_eps_ok=measured.value < 4 * eps,
        K=K,
        target_osc=cover.target_osc,
    )
    return g, report
