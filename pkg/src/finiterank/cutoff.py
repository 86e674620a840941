"""Smooth cut-off functions with measured derivative constants.

psi is built per box of K as a tensor product of 1D mollified indicators
(window inflated by delta/2, kernel radius <= delta/4) and joined across
boxes by the smooth union 1 - prod(1 - psi_b). This gives, exactly on the
continuum: 0 <= psi <= 1, psi = 1 on K + delta/4, supp psi inside
K + 3 delta/4, all per axis. The discrete kernel is normalized to unit mass
so the plateau value is exactly 1.0 in floating point.

The C_beta table stores delta^|beta| * sup |d^beta psi| measured on a fixed
dense grid, so the Hoermander-style bound |d^beta psi| <= C_beta delta^-|beta|
holds by construction and re-measurement reproduces the table.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import GeometryError, OrderError
from .funcmodel import (MultiIndex, SampledFunction, SeminormIndex, mi_order,
                        mi_sub, multiindex_binom, multiindices, product_rule_apply,
                        sf_sub, submultiindices)
from .geometry import Box, Region
from .mollify import QuadratureSpec, build_mollifier
from .seminorms import SeminormValue, find_tail_compact, tail_seminorm, weighted_seminorm
from .weights import WeightFamily, WeightIndex


class _AxisProfile:
    """1D mollified indicator of [lo - delta/2, hi + delta/2].

    psi(t) = (R(t - a) - R(t - b)) / R(inf) with R the running integral of
    the kernel bump, so the derivatives have the closed forms
    psi^(k)(t) = (rho^(k-1)(t - a) - rho^(k-1)(t - b)) / mass. The value is a
    fixed-count midpoint quadrature over the moving overlap window, which is
    smooth in t because the bump is flat at its support ends.
    """

    def __init__(self, lo: float, hi: float, delta: float, moll, count: int):
        self.a = lo - 0.5 * delta
        self.b = hi + 0.5 * delta
        self.moll = moll
        self.r = moll.radius
        u, w = np.polynomial.legendre.leggauss(count)
        self._gl_u = 0.5 * (u + 1.0)
        self._gl_w = 0.5 * w
        full_nodes = -self.r + self._gl_u * 2.0 * self.r
        self.mass = float(np.dot(self._gl_w,
                                 self.moll.deriv((0,), full_nodes[:, None]))
                          * 2.0 * self.r)

    def deriv(self, k: int, t: np.ndarray) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if k > 0:
            upper = self.moll.deriv((k - 1,), (t - self.a)[:, None])
            lower = self.moll.deriv((k - 1,), (t - self.b)[:, None])
            return (upper - lower) / self.mass
        lo = np.maximum(-self.r, t - self.b)
        hi = np.minimum(self.r, t - self.a)
        length = hi - lo
        live = length > 0
        out = np.zeros(len(t))
        if np.any(live):
            nodes = lo[live][None, :] + self._gl_u[:, None] * length[live][None, :]
            vals = self.moll.deriv((0,), nodes.reshape(-1, 1)).reshape(len(self._gl_u), -1)
            out[live] = (self._gl_w @ vals) * length[live] / self.mass
        # plateau holds the exact value 1 by normalization; snap the last bits
        full = (t - self.b <= -self.r) & (t - self.a >= self.r)
        out[full] = 1.0
        return out


class _TensorCutoff:
    """Product of axis profiles over one box."""

    def __init__(self, box: Box, delta: float, moll, count: int):
        self.profiles = [_AxisProfile(lo, hi, delta, moll, count)
                         for lo, hi in zip(box.lo, box.hi)]

    def deriv(self, beta: MultiIndex, pts: np.ndarray) -> np.ndarray:
        out = np.ones(len(pts))
        for axis, prof in enumerate(self.profiles):
            out = out * prof.deriv(beta[axis], pts[:, axis])
        return out


def _product_deriv(factors, beta: MultiIndex, pts: np.ndarray) -> np.ndarray:
    """Leibniz rule for a product of smooth scalar factors."""
    if len(factors) == 1:
        return factors[0](beta, pts)
    head, rest = factors[0], factors[1:]
    acc = np.zeros(len(pts))
    for gamma in submultiindices(beta):
        acc += multiindex_binom(beta, gamma) * head(gamma, pts) \
            * _product_deriv(rest, mi_sub(beta, gamma), pts)
    return acc


class _UnionCutoff:
    """1 - prod_b (1 - psi_b); equals psi_b wherever the others vanish."""

    def __init__(self, pieces: list[_TensorCutoff], d: int):
        self.pieces = pieces
        self.d = d

    def deriv(self, beta: MultiIndex, pts: np.ndarray) -> np.ndarray:
        if len(self.pieces) == 1:
            return self.pieces[0].deriv(beta, pts)

        def one_minus(piece):
            def fn(b, x):
                v = piece.deriv(b, x)
                return (1.0 - v) if mi_order(b) == 0 else -v
            return fn

        prod = _product_deriv([one_minus(p) for p in self.pieces], beta, pts)
        if mi_order(beta) == 0:
            return 1.0 - prod
        return -prod


@dataclass
class CutoffFunction:
    K: Region
    delta: float
    psi: SampledFunction
    Cbeta_table: dict[MultiIndex, float]
    measure_region: Region = None
    extra_measure_points: np.ndarray = None
    _union: _UnionCutoff = field(default=None, repr=False)

    def measure_cbeta(self) -> dict[MultiIndex, float]:
        """Re-measure the table on the stored dense grid (plus any pinned
        extra points, e.g. the scan grid the bound will be checked on)."""
        pts = self.measure_region.grid_points()
        if self.extra_measure_points is not None and len(self.extra_measure_points):
            pts = np.concatenate([pts, self.extra_measure_points])
        out = {}
        for beta in self.Cbeta_table:
            vals = np.abs(self._union.deriv(beta, pts))
            out[beta] = float(np.max(vals)) * self.delta ** mi_order(beta)
        return out


def build_cutoff(K: Region, delta: float, max_deriv: int, quad: QuadratureSpec,
                 omega: Optional[Region] = None,
                 measure_points_per_axis: Optional[int] = None,
                 extra_measure_points: Optional[np.ndarray] = None,
                 measure_table: bool = True) -> CutoffFunction:
    """Mollified-indicator cut-off: psi = 1 on K, supp psi in K + 3 delta/4."""
    if delta <= 0:
        raise GeometryError("delta must be positive")
    if K.is_empty:
        raise GeometryError("cannot build a cut-off on an empty compact")
    if omega is not None and not omega.covers(K.inflate(delta)):
        raise GeometryError("K inflated by delta leaves the domain surrogate")

    # the axis kernels are 1D and cheap; use a generous node count even when
    # the scenario's (d-dimensional) convolution quadrature is coarse
    kq = QuadratureSpec(rule="midpoint",
                        points_per_axis=max(64, quad.points_per_axis),
                        refinement_levels=max(1, quad.refinement_levels),
                        tol=quad.tol)
    scale = int(np.ceil(4.0 / delta))
    moll = build_mollifier(1, scale, kq, max(max_deriv, 1))
    # 128 midpoint nodes on the (flat-ended) overlap window reach ~1e-9
    # relative accuracy for the profile values; derivatives are closed-form
    count = 128

    pieces = [_TensorCutoff(box, delta, moll, count) for box in K.boxes]
    union = _UnionCutoff(pieces, K.d)

    support = K.inflate(0.75 * delta)

    psi = SampledFunction(
        domain=omega if omega is not None else support,
        order=max_deriv,
        value_dim=1,
        evaluator=lambda pts: union.deriv((0,) * K.d, np.atleast_2d(pts))[:, None],
        derivative=lambda beta, pts: union.deriv(tuple(beta), np.atleast_2d(pts))[:, None],
        support=support,
        name="cutoff",
    )

    if measure_points_per_axis is None:
        measure_points_per_axis = 801 if K.d == 1 else 101
    measure_region = support.with_resolution(measure_points_per_axis)
    cut = CutoffFunction(K=K, delta=delta, psi=psi, Cbeta_table={},
                         measure_region=measure_region,
                         extra_measure_points=extra_measure_points, _union=union)
    if measure_table:
        cut.Cbeta_table = {tuple(b): 0.0 for b in multiindices(K.d, max_deriv)}
        cut.Cbeta_table = cut.measure_cbeta()
    return cut


def cutoff_constant(cut: CutoffFunction, l: int) -> float:
    """sup over |beta| <= l of sum_{gamma <= beta} binom * C_{beta-gamma} delta^-|beta-gamma|."""
    d = cut.K.d
    best = 0.0
    for beta in multiindices(d, l):
        total = 0.0
        for gamma in submultiindices(beta):
            diff = mi_sub(beta, gamma)
            if tuple(diff) not in cut.Cbeta_table:
                raise OrderError(f"C_beta table does not cover beta={diff}")
            total += multiindex_binom(beta, gamma) * cut.Cbeta_table[tuple(diff)] \
                * cut.delta ** (-mi_order(diff))
        best = max(best, total)
    return best


@dataclass
class CutoffReport:
    delta: float
    K: Region
    Cbeta_table: dict
    C_l_delta: float
    tail: SeminormValue
    measured: SeminormValue
    bound: float
    target: float

    def to_json_dict(self) -> dict:
        return {
            "delta": self.delta,
            "K_boxes": [[list(b.lo), list(b.hi)] for b in self.K.boxes],
            "C_beta": {",".join(map(str, k)): v for k, v in sorted(self.Cbeta_table.items())},
            "C_l_delta": self.C_l_delta,
            "tail": self.tail.value,
            "measured_error": self.measured.value,
            "bound": self.bound,
            "target": self.target,
        }


def multiply_cutoff(cut: CutoffFunction, f: SampledFunction) -> SampledFunction:
    """psi * f with product-rule derivatives and psi's support."""
    psi = cut.psi

    def evaluator(pts):
        return psi.eval(pts)[:, 0:1] * f.eval(pts)

    def derivative(beta, pts):
        return product_rule_apply(psi, f, beta, pts)

    return SampledFunction(
        domain=f.domain,
        order=min(f.order, psi.order),
        value_dim=f.value_dim,
        evaluator=evaluator,
        derivative=derivative,
        support=psi.support,
        name=f"cutoff*({f.name})",
    )


def apply_cutoff(f: SampledFunction, fam: WeightFamily, idx: WeightIndex,
                 alpha: SeminormIndex, eps: float, delta: float, search: Region,
                 quad: QuadratureSpec, max_deriv: int = 4,
                 omega: Optional[Region] = None) -> tuple[SampledFunction, CutoffReport]:
    """Cut f off outside a tail compact with budget eps.

    The tail target eps / (1 + C_{l,delta}) needs C_{l,delta} first, so a
    provisional cut-off on the eps-compact fixes the constant (it depends on
    delta and the construction, not on the compact), then the definitive
    compact is searched at the sharpened target.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    domain = f.domain
    if omega is None:
        omega = domain
    K0 = find_tail_compact(f, fam, idx, alpha, eps, delta, search, omega=omega)
    if K0.is_empty:
        # tail already below target everywhere; cut around one central cell
        step = domain.spacing()
        b0 = domain.boxes[0]
        center = 0.5 * (np.asarray(b0.lo) + np.asarray(b0.hi))
        K0 = Region((Box(tuple(center - 0.5 * step), tuple(center + 0.5 * step)),),
                    domain.points_per_axis)
    provisional = build_cutoff(K0, delta, max_deriv, quad, omega=omega)
    C = cutoff_constant(provisional, idx.l)
    target = eps / (1.0 + C)

    K = find_tail_compact(f, fam, idx, alpha, target, delta, search, omega=omega)
    if K.is_empty or K.volume() == 0.0:
        K = K0
    # pin the scan grid into the C_beta measurement so the lemma bound holds
    # at every point the seminorms will visit
    dom_pts = domain.grid_points()
    near = K.inflate(delta).contains(dom_pts)
    cut = build_cutoff(K, delta, max_deriv, quad, omega=omega,
                       extra_measure_points=dom_pts[near])
    C_final = cutoff_constant(cut, idx.l)

    f_tilde = multiply_cutoff(cut, f)
    tail = tail_seminorm(f, K, fam, idx, alpha)
    measured = weighted_seminorm(sf_sub(f, f_tilde), fam, idx, alpha)
    report = CutoffReport(
        delta=delta, K=K, Cbeta_table=cut.Cbeta_table, C_l_delta=C_final,
        tail=tail, measured=measured,
        bound=(1.0 + C_final) * tail.value, target=target,
    )
    return f_tilde, report
