"""Spectral gap quantities: invariant state, L2 embedding, bounds and curves.

The gap splits into a diagonal part (the birth-death chain) and an
off-diagonal part (the decoupled rank-one modes ``|e_j><e_k|``).  This
module puts the closed forms next to the numerics so they can be compared
point by point.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from .algebra import DeformationParams, qr_integer, spectrum_table
from .birthdeath import (TAIL_RTOL, diagonal_gap_numeric, partition_function,
                         required_levels, stationary_density)
from .errors import NonDiagonalInvariant, NoRootInRange, RegionViolation, ValidationError
from .generator import DensityMatrix, level_decay

#: Slack used when comparing bounds with numerically computed gaps.
BOUND_SLACK = 1e-8


def invariant_state(params: DeformationParams, N: Optional[int] = None) -> DensityMatrix:
    """Truncated thermal state ``diag(exp(-beta eps_n)) / Z``.

    ``N`` defaults to the smallest truncation whose tail bound is below
    1e-12 of the partition function; an explicit ``N`` must meet the same
    bound or :class:`TruncationTooSmall` is raised.
    """
    if N is None:
        N = required_levels(params, rtol=TAIL_RTOL)
    dens = stationary_density(params, N, max_relative_tail=TAIL_RTOL)
    w = dens.weights
    return DensityMatrix(np.diag(w / math.fsum(w)))


def _diagonal_weights(rho_inv) -> np.ndarray:
    rho = np.asarray(getattr(rho_inv, "entries", rho_inv))
    off = rho - np.diag(np.diagonal(rho))
    if np.any(np.abs(off) > 0):
        raise NonDiagonalInvariant("the invariant state must be diagonal in the level basis")
    p = np.diagonal(rho).real
    if np.any(p <= 0):
        raise NonDiagonalInvariant("the invariant state must be faithful (all weights > 0)")
    return p


def embed_l2(rho_inv, x) -> np.ndarray:
    """``rho^{1/4} x rho^{1/4}`` for a diagonal faithful ``rho``."""
    p = _diagonal_weights(rho_inv)
    x = np.asarray(x)
    if x.shape != (len(p), len(p)):
        raise ValidationError(f"matrix shape {x.shape} does not match state dimension {len(p)}")
    s = p ** 0.25
    return s[:, None] * x * s[None, :]


def hs_norm(x) -> float:
    """Hilbert-Schmidt norm."""
    return float(np.linalg.norm(np.asarray(x), "fro"))


def offdiag_minimum(params: DeformationParams, max_levels: int = 100_000):
    """Smallest ``-Re xi_jk`` over pairs ``j != k``.

    ``-Re xi_jk = (d_j + d_k)/2`` with ``d_n`` from :func:`level_decay`, so
    the minimum pairs the two smallest ``d_n``.  Since ``d_n >= eps_n`` and
    ``eps`` is nondecreasing, any pair whose larger index is at least ``J``
    costs at least ``(eps_J + min(d_best, eps_J))/2``; the scan stops once
    that exceeds the incumbent.

    Returns
    -------
    value : float
    argmin : tuple of int
        ``(j0, k0)`` with ``j0 < k0``.
    """
    params.require("A+")
    d = [level_decay(params, 0), level_decay(params, 1)]
    n = 2
    while True:
        order = np.argsort(d, kind="stable")
        j0, k0 = sorted((int(order[0]), int(order[1])))
        best = 0.5 * (d[j0] + d[k0])
        e_n = qr_integer(params, n)
        if 0.5 * (e_n + min(d[order[0]], e_n)) >= best:
            return best, (j0, k0)
        if n >= max_levels:
            raise NoRootInRange(f"off-diagonal search did not terminate within {max_levels} levels")
        d.append(level_decay(params, n))
        n += 1


def offdiag_minimum_closed_form(beta: float, rq_sum: float) -> float:
    """``((e^b+1)/(e^b-1) + s/(e^{b(s-1)}-1))/2``, valid for ``s = r+q >= 2, q >= -2/3``."""
    return 0.5 * (1.0 / math.tanh(0.5 * beta) + rq_sum / math.expm1(beta * (rq_sum - 1.0)))


def diag_lower_bounds(params: DeformationParams):
    """``(Z (1 - e^{-beta}), 1 - e^{-2 beta})``; requires ``r + q >= 2``."""
    if not params.region_b:
        raise RegionViolation("; ".join(params.violations("B")))
    strong = partition_function(params) * -math.expm1(-params.beta)
    weak = -math.expm1(-2.0 * params.beta)
    return strong, weak


def diag_upper_alpha(params: DeformationParams) -> float:
    """Rayleigh-quotient upper bound ``1/((e^beta - 1)(1 - 1/Z))``."""
    # Z - 1 is summed directly; forming 1 - 1/Z cancels badly at large beta
    N = required_levels(params, rtol=1e-16)
    excited = math.fsum(np.exp(spectrum_table(params, N).log_pi[1:N]))
    return (1.0 + excited) / (math.expm1(params.beta) * excited)


def bose_alpha(beta: float) -> float:
    """``alpha`` in the ``r, q -> 1`` limit: ``1/(1 - e^{-beta})``."""
    return 1.0 / -math.expm1(-beta)


def bose_offdiag_minimum(beta: float) -> float:
    """Off-diagonal minimum in the ``r, q -> 1`` limit."""
    return (1.0 + 3.0 * math.exp(-beta)) / (2.0 * -math.expm1(-beta))


def bisect_root(f, lo: float, hi: float, tol: float = 1e-12, max_iter: int = 200) -> float:
    """Root of ``f`` on ``[lo, hi]`` by bisection; needs a sign change."""
    f_lo, f_hi = f(lo), f(hi)
    if f_lo == 0:
        return lo
    if f_hi == 0:
        return hi
    if not (f_lo < 0) ^ (f_hi < 0):
        raise NoRootInRange(f"no sign change on [{lo!r}, {hi!r}]")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        f_mid = f(mid)
        if (f_mid < 0) == (f_lo < 0):
            lo, f_lo = mid, f_mid
        else:
            hi = mid
        if hi - lo <= tol:
            break
    return 0.5 * (lo + hi)


def bose_crossover(lo: float = 0.1, hi: float = 5.0) -> float:
    """``beta`` where the Bose-limit ``alpha`` meets the off-diagonal minimum."""
    return bisect_root(lambda b: bose_offdiag_minimum(b) - bose_alpha(b), lo, hi)


@dataclass(frozen=True)
class GapReport:
    """All gap quantities at one parameter point.

    ``gap_formula_paper`` is ``min(1 - e^{-2 beta}, offdiag_min)``; it is a
    lower bound for ``gap_numeric`` and ``formula_below_numeric`` flags the
    points where it is strictly smaller.  ``alpha_below_numeric`` flags
    points where the truncated numeric gap exceeds the upper bound.
    Fields that need ``r + q >= 2`` are None outside that region.
    """

    params: DeformationParams
    levels: int
    offdiag_min: float
    offdiag_argmin: tuple
    diag_lower_strong: Optional[float]
    diag_lower_weak: Optional[float]
    diag_upper_alpha: float
    diag_numeric: float
    gap_formula_paper: Optional[float]
    gap_numeric: float
    formula_below_numeric: Optional[bool]
    alpha_below_numeric: bool

    def to_dict(self) -> dict:
        out = asdict(self)
        p = out.pop("params")
        out = {"r": p["r"], "q": p["q"], "beta": p["beta"], **out}
        out["offdiag_argmin"] = list(self.offdiag_argmin)
        return out


def gap_report(params: DeformationParams, N: Optional[int] = None) -> GapReport:
    """Assemble a :class:`GapReport`; ``N`` is the truncation for the numeric gap."""
    params.require("A+")
    if N is None:
        N = required_levels(params, rtol=TAIL_RTOL, minimum=16)
    off, arg = offdiag_minimum(params)
    diag = diagonal_gap_numeric(params, N)
    alpha = diag_upper_alpha(params)
    gap = min(diag, off)
    if params.region_b:
        strong, weak = diag_lower_bounds(params)
        formula = min(weak, off)
        flag = formula < gap - BOUND_SLACK
    else:
        strong = weak = formula = flag = None
    return GapReport(params, N, off, arg, strong, weak, alpha, diag, formula, gap,
                     flag, alpha < diag - BOUND_SLACK)


@dataclass(frozen=True)
class CrossingCurves:
    """Level curves ``beta(r)`` in the ``(r, beta)`` plane.

    ``upper``: off-diagonal minimum equals ``1 - e^{-2 beta}``.
    ``lower``: off-diagonal minimum equals ``alpha``.  Grid points without
    a root in the beta range hold NaN and status ``"no_root"``.
    """

    r: np.ndarray
    upper: np.ndarray
    lower: np.ndarray
    upper_status: tuple
    lower_status: tuple


def _curve_point(f, lo, hi):
    try:
        return bisect_root(f, lo, hi, tol=1e-8), "ok"
    except NoRootInRange:
        return math.nan, "no_root"


def crossing_curves(q_fixed: float, r_range, beta_range, resolution: int) -> CrossingCurves:
    """Bisect in ``beta`` for each of ``resolution`` values of ``r``.

    ``r_range`` and ``beta_range`` are ``(lo, hi)`` pairs; an empty
    ``r`` range (``lo >= hi`` or ``resolution == 0``) yields empty curves.
    """
    r_lo, r_hi = r_range
    b_lo, b_hi = beta_range
    if resolution <= 0 or r_lo >= r_hi:
        empty = np.empty(0)
        return CrossingCurves(empty, empty, empty, (), ())
    rs = np.linspace(r_lo, r_hi, resolution)
    upper, lower, us, ls = [], [], [], []
    for r in rs:
        def p(b, r=r):
            return DeformationParams(float(r), q_fixed, b)

        def f_up(b):
            return offdiag_minimum(p(b))[0] + math.expm1(-2.0 * b)

        def f_low(b):
            return offdiag_minimum(p(b))[0] - diag_upper_alpha(p(b))

        v, s = _curve_point(f_up, b_lo, b_hi)
        upper.append(v)
        us.append(s)
        v, s = _curve_point(f_low, b_lo, b_hi)
        lower.append(v)
        ls.append(s)
    return CrossingCurves(rs, np.array(upper), np.array(lower), tuple(us), tuple(ls))
