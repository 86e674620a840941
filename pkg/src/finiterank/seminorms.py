"""Weighted sup-seminorms over gridded domains.

The continuum sup over x and |beta| <= l is replaced by a scan over the
domain grid in a fixed order (multi-indices first, then grid rows), so every
value is reproducible and carries the witness attaining it.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import CriterionError, OrderError
from .funcmodel import (MultiIndex, SampledFunction, SeminormIndex, f_multi_ext,
                        multiindices)
from .geometry import Region, centered_box
from .weights import WeightFamily, WeightIndex


@dataclass
class SeminormValue:
    value: float
    witness_x: Optional[np.ndarray]
    witness_beta: Optional[MultiIndex]
    empty: bool = False

    def __float__(self):
        return self.value

    def to_json_dict(self) -> dict:
        return {
            "value": self.value,
            "witness_x": None if self.witness_x is None else [float(c) for c in self.witness_x],
            "witness_beta": None if self.witness_beta is None else list(self.witness_beta),
        }


def seminorm_record(sv: "SeminormValue", idx: "WeightIndex", alpha_name: str) -> dict:
    """Ledger record for one seminorm measurement."""
    record = {"j": idx.j, "l": idx.l, "alpha": alpha_name}
    record.update(sv.to_json_dict())
    return record


def _scan(f: SampledFunction, pts: np.ndarray, betas, alpha: SeminormIndex,
          weights: Optional[np.ndarray]) -> SeminormValue:
    if len(pts) == 0:
        return SeminormValue(0.0, None, None, empty=True)
    stacked = f_multi_ext(f, betas, pts)
    best_val = -1.0
    best = (None, None)
    for bi, beta in enumerate(betas):
        vals = alpha.apply(stacked[bi])
        if weights is not None:
            vals = vals * weights
        k = int(np.argmax(vals))
        if vals[k] > best_val:
            best_val = float(vals[k])
            best = (pts[k], beta)
    return SeminormValue(best_val, best[0], best[1])


def _betas_for(f: SampledFunction, l: int):
    if l > f.order:
        raise OrderError(f"weight order l={l} exceeds function order {f.order}")
    return multiindices(f.d, l)


def _support_mask(f: SampledFunction, pts: np.ndarray) -> Optional[np.ndarray]:
    # Points outside a declared support contribute exactly 0 to the sup.
    if f.support is None:
        return None
    return f.support.contains(pts)


def weighted_seminorm(f: SampledFunction, fam: WeightFamily, idx: WeightIndex,
                      alpha: SeminormIndex, grid: Optional[Region] = None) -> SeminormValue:
    """sup over grid points and |beta| <= l of p_alpha(d^beta f(x)) nu_{j,l}(x)."""
    region = grid if grid is not None else f.domain
    pts = region.grid_points()
    betas = _betas_for(f, idx.l)
    mask = _support_mask(f, pts)
    if mask is not None:
        pts = pts[mask]
        if len(pts) == 0:
            return SeminormValue(0.0, None, None, empty=True)
    w = fam.eval_batch(idx, pts)
    return _scan(f, pts, betas, alpha, w)


def tail_seminorm(f: SampledFunction, K: Region, fam: WeightFamily, idx: WeightIndex,
                  alpha: SeminormIndex, grid: Optional[Region] = None) -> SeminormValue:
    """Same sup restricted to grid points outside K."""
    region = grid if grid is not None else f.domain
    pts = region.grid_points()
    outside = ~K.contains(pts)
    pts = pts[outside]
    if len(pts) == 0:
        return SeminormValue(0.0, None, None, empty=True)
    betas = _betas_for(f, idx.l)
    mask = _support_mask(f, pts)
    if mask is not None:
        pts = pts[mask]
        if len(pts) == 0:
            return SeminormValue(0.0, None, None, empty=True)
    w = fam.eval_batch(idx, pts)
    return _scan(f, pts, betas, alpha, w)


def local_sup_seminorm(f: SampledFunction, K: Region, l: int,
                       alpha: SeminormIndex) -> SeminormValue:
    """Unweighted sup over K's own grid and |beta| <= l."""
    pts = K.grid_points()
    betas = _betas_for(f, l)
    return _scan(f, pts, betas, alpha, None)


def find_tail_compact(f: SampledFunction, fam: WeightFamily, idx: WeightIndex,
                      alpha: SeminormIndex, eps: float, delta: float,
                      search: Region, omega: Optional[Region] = None) -> Region:
    """Smallest centered grid-aligned box (clipped to the weight's structure
    region when the family has one) whose tail seminorm is < eps and whose
    delta-inflation stays inside omega, the boundary surrogate for the open
    domain (defaults to the gridded domain).

    The minimal box is read off the violating set directly: per axis, the
    halfwidth is the largest |x_a| over grid points whose integrand reaches
    eps, snapped up to the grid. Weighted integrands vanish outside the
    structure region, so the clipped box always swallows every violating
    point and the tail bound holds by construction.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    domain = f.domain
    if omega is None:
        omega = domain
    pts = search.grid_points()
    betas = _betas_for(f, idx.l)
    w = fam.eval_batch(idx, pts)
    mask = _support_mask(f, pts)
    integrand = np.zeros(len(pts))
    if mask is None:
        stacked = f_multi_ext(f, betas, pts)
        for bi in range(len(betas)):
            integrand = np.maximum(integrand, alpha.apply(stacked[bi]) * w)
    elif np.any(mask):
        stacked = f_multi_ext(f, betas, pts[mask])
        vals = np.zeros(int(np.sum(mask)))
        for bi in range(len(betas)):
            vals = np.maximum(vals, alpha.apply(stacked[bi]) * w[mask])
        integrand[mask] = vals

    clip = fam.structure_region(idx.j)
    base = clip if clip is not None else domain
    step = np.maximum(search.spacing(), 1e-300)
    violating = integrand >= eps
    if not np.any(violating):
        halfwidths = np.zeros(search.d)
    else:
        needed = np.max(np.abs(pts[violating]), axis=0)
        bb = search.bounding_box()
        outer = np.maximum(np.abs(np.asarray(bb.lo)), np.abs(np.asarray(bb.hi)))
        if np.any(needed >= outer - 0.49 * step):
            raise CriterionError(
                "violating points reach the search boundary; the tail cannot "
                "be certified inside the scanned region",
                best=float(np.max(integrand)))
        halfwidths = np.ceil(needed / step) * step
    K = base.intersect_box(centered_box(halfwidths))
    outside = ~K.contains(pts)
    tail = float(np.max(integrand[outside])) if np.any(outside) else 0.0
    if tail >= eps:
        raise CriterionError(
            f"tail {tail} outside the minimal box still reaches {eps}", best=tail)
    if delta > 0 and not K.is_empty and not omega.covers(K.inflate(delta)):
        raise CriterionError(
            f"the minimal tail compact inflated by delta={delta} leaves the domain",
            best=tail)
    return K
