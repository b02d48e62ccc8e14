"""Classical birth-death chain carried by the diagonal algebra.

Restricted to diagonal observables the generator is the birth-death
generator with rates

    lambda_n = Gamma^+_{n+1} eps_{n+1},    mu_n = Gamma^-_n eps_n,

and stationary weights ``pi_n = exp(-beta eps_n)``.  All weights are kept
in log form: ``eps_n`` grows geometrically, so ``pi_n`` underflows after a
few dozen levels even at moderate ``beta``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .algebra import (DeformationParams, max_safe_level, omega_closed_form,
                      spectrum_table)
from .errors import (DimensionMismatch, NoConvergence, RegionViolation,
                     TruncationTooSmall)
from .generator import log_gamma_minus, log_gamma_plus

#: Default relative tail weight allowed beyond the truncation.
TAIL_RTOL = 1e-12


def bd_rates(params: DeformationParams, n: int, bose_limit: bool = False):
    """Birth and death rates ``(lambda_n, mu_n)`` at level ``n``.

    ``mu_0`` does not exist and is returned as None.  With
    ``bose_limit=True`` the ``r, q -> 1`` limits
    ``lambda_n = (n+1)/(e^beta - 1)`` and ``mu_n = n e^beta/(e^beta - 1)``
    are returned instead (only ``params.beta`` is used).
    """
    if n < 0:
        raise ValueError(f"level must be nonnegative, got {n}")
    beta = params.beta
    if bose_limit:
        lam = (n + 1) / math.expm1(beta)
        mu = n / -math.expm1(-beta) if n >= 1 else None
        return lam, mu
    params.require("A+")
    table = spectrum_table(params, n + 1)
    log_lam, log_mu = _log_rates(table.eps, table.omega, beta)
    lam = math.exp(log_lam[n])
    mu = math.exp(log_mu[n]) if n >= 1 else None
    return lam, mu


def _log_rates(eps, omega, beta):
    """log lambda_n for n = 0..len-2 and log mu_n for n = 0..len-1 (mu_0 = -inf)."""
    log_eps = np.log(eps[1:])
    log_lam = log_eps + log_gamma_plus(omega[1:], beta)
    log_mu = np.concatenate(([-np.inf], log_eps + log_gamma_minus(omega[1:], beta)))
    return log_lam, log_mu


@dataclass(frozen=True, eq=False)
class BDChain:
    """Rates and log weights on levels ``0..N-1``.

    ``lam[N-1]`` is the true outflow rate of the top level; the reflecting
    truncation drops it in :func:`symmetrized_tridiagonal`.
    """

    params: DeformationParams
    N: int
    lam: np.ndarray
    mu: np.ndarray
    log_lam: np.ndarray = field(repr=False)
    log_mu: np.ndarray = field(repr=False)
    log_pi: np.ndarray = field(repr=False)

    def detailed_balance_residual(self) -> float:
        """max |log lambda_n + log pi_n - log mu_{n+1} - log pi_{n+1}|, n < N-1."""
        lhs = self.log_lam[:-1] + self.log_pi[:-1]
        rhs = self.log_mu[1:] + self.log_pi[1:]
        if lhs.size == 0:
            return 0.0
        return float(np.max(np.abs(lhs - rhs) / np.maximum(1.0, np.abs(lhs))))


def bd_chain(params: DeformationParams, N: int) -> BDChain:
    params.require("A+")
    if N < 2:
        raise ValueError(f"need at least two levels, got {N}")
    table = spectrum_table(params, N)
    log_lam, log_mu = _log_rates(table.eps, table.omega, params.beta)
    log_lam, log_mu = log_lam[:N], log_mu[:N]
    return BDChain(params, N, np.exp(log_lam), np.exp(log_mu), log_lam, log_mu,
                   table.log_pi[:N].copy())


@dataclass(frozen=True, eq=False)
class StationaryDensity:
    """Normalized stationary weights on the truncation.

    ``Z_beta`` is the sum of ``pi_n`` over levels ``0..N-1``; ``tail_bound``
    is a rigorous upper bound on the neglected mass ``sum_{y >= N} pi_y``,
    so the untruncated normalizer lies in ``[Z_beta, Z_beta + tail_bound]``.
    """

    N: int
    log_weights: np.ndarray
    Z_beta: float
    tail_bound: float

    @property
    def weights(self) -> np.ndarray:
        return np.exp(self.log_weights)

    @property
    def relative_tail(self) -> float:
        return self.tail_bound / self.Z_beta


def _log0(x: float) -> float:
    return math.log(x) if x > 0 else -math.inf


def min_gap_from(params: DeformationParams, start: int) -> float:
    """``inf_{j >= start} omega_j``.

    Past the level where ``r^{j-1}(r-1)^2 >= |q|^{j-1}(1-q)^2`` the gaps
    increase, so a finite scan suffices.  For ``r + q >= 2`` this is
    ``omega_start``.
    """
    start = max(start, 1)
    if params.region_b:
        return omega_closed_form(params, start)
    log_r, log_q = math.log(params.r), _log0(abs(params.q))
    log_a, log_b = 2 * _log0(params.r - 1.0), 2 * _log0(1.0 - params.q)
    best = math.inf
    j = start
    while True:
        best = min(best, omega_closed_form(params, j))
        if j >= 2 and (j - 1) * log_r + log_a >= (j - 1) * log_q + log_b:
            return best
        j += 1


def tail_bound(params: DeformationParams, N: int, log_pi_N: Optional[float] = None) -> float:
    """Upper bound on ``sum_{y >= N} pi_y`` (unnormalized weights).

    ``pi_N / (1 - exp(-beta w))`` with ``w`` the smallest gap above level
    N; with nondecreasing gaps this is the usual geometric tail estimate.
    """
    if log_pi_N is None:
        log_pi_N = -params.beta * spectrum_table(params, N).eps[N]
    w = min_gap_from(params, N + 1)
    return math.exp(log_pi_N) / -math.expm1(-params.beta * w)


def stationary_density(params: DeformationParams, N: int,
                       max_relative_tail: float = 1e-8) -> StationaryDensity:
    """Thermal weights ``exp(-beta eps_n)/Z`` on levels ``0..N-1``.

    Raises
    ------
    TruncationTooSmall
        If the tail bound exceeds ``max_relative_tail * Z_beta``.
    """
    params.require("A+")
    table = spectrum_table(params, N)
    log_pi = table.log_pi[:N]
    # log pi_0 = 0 is the maximum, so the plain sum cannot overflow
    Z = math.fsum(np.exp(log_pi))
    tail = tail_bound(params, N, float(table.log_pi[N]))
    if tail > max_relative_tail * Z:
        raise TruncationTooSmall(
            f"{N} levels leave tail mass {tail:.3e} > {max_relative_tail:.1e} * Z; "
            f"increase the number of levels")
    return StationaryDensity(N, log_pi - math.log(Z), Z, tail)


def required_levels(params: DeformationParams, rtol: float = TAIL_RTOL,
                    minimum: int = 2) -> int:
    """Smallest ``N >= minimum`` whose tail bound is at most ``rtol * Z``."""
    params.require("A+")
    cap = max_safe_level(params)
    table = spectrum_table(params, cap)
    Z_partial = np.cumsum(np.exp(table.log_pi))
    for N in range(max(minimum, 1), cap):
        tail = tail_bound(params, N, float(table.log_pi[N]))
        if tail <= rtol * Z_partial[N - 1]:
            return N
    raise TruncationTooSmall(
        f"no truncation below {cap} levels reaches tail {rtol:.1e}; beta too small?")


def partition_function(params: DeformationParams, rtol: float = 1e-16) -> float:
    """Untruncated ``Z_beta``, summed until the tail is below ``rtol * Z``."""
    N = required_levels(params, rtol=rtol)
    return stationary_density(params, N).Z_beta


@dataclass(frozen=True)
class ConservativityReport:
    """Partial sums of the non-explosion series, in log form.

    ``diverges`` is a numerical verdict, not a proof: it is set when the
    last ten terms increase and the final term exceeds the preceding
    partial sum.
    """

    log_terms: np.ndarray
    log_partial_sums: np.ndarray
    diverges: bool
    witness_rate: float
    label: str

    @property
    def partial_sums(self) -> np.ndarray:
        with np.errstate(over="ignore"):
            return np.exp(self.log_partial_sums)

    @property
    def strictly_increasing(self) -> bool:
        return bool(np.all(np.diff(self.log_partial_sums) > 0))


def km_conservativity(params: DeformationParams, n_terms: int,
                      extend: bool = False) -> ConservativityReport:
    """Evaluate ``S_m = sum_{n=1}^m (1/(lambda_n pi_n)) sum_{k=1}^n pi_k``.

    For ``r`` close to 1 the terms grow slowly at first and the witness
    (increasing tail, final term above the previous partial sum) appears
    late.  With ``extend=True`` the number of terms is doubled until the
    witness appears or ``eps_n`` approaches the float ceiling.
    """
    if n_terms < 10:
        raise ValueError(f"n_terms must be at least 10, got {n_terms}")
    params.require("A+")
    limit = max_safe_level(params, cap=1 << 20) - 1
    while True:
        n_eval = min(n_terms, limit)
        report = _km_series(params, n_eval)
        if report.diverges or not extend or n_eval >= limit:
            return report
        n_terms *= 2


def _km_series(params: DeformationParams, n_terms: int) -> ConservativityReport:
    table = spectrum_table(params, n_terms + 1, max_level=n_terms + 1)
    log_lam, _ = _log_rates(table.eps, table.omega, params.beta)
    log_pi = table.log_pi
    n = np.arange(1, n_terms + 1)
    log_inner = np.logaddexp.accumulate(log_pi[1:n_terms + 1])
    log_terms = log_inner - log_lam[n] - log_pi[n]
    log_sums = np.logaddexp.accumulate(log_terms)
    growth = np.diff(log_terms[-11:])
    dominant = log_terms[-1] > log_sums[-2]
    diverges = bool(np.all(growth > 0) and dominant)
    label = "consistent with divergence" if diverges else "inconclusive"
    return ConservativityReport(log_terms, log_sums, diverges,
                                float(log_terms[-1] - log_terms[-2]), label)


def _normalized(chain: BDChain) -> np.ndarray:
    lp = chain.log_pi - chain.log_pi.max()
    w = np.exp(lp)
    return w / math.fsum(w)


def dirichlet_form_classical(chain: BDChain, f) -> float:
    """``sum_n pi~_n lambda_n (f_{n+1} - f_n)^2`` over the truncation."""
    f = np.asarray(f, dtype=float)
    if f.shape != (chain.N,):
        raise DimensionMismatch(f"f needs {chain.N} entries, got {f.shape}")
    pi = _normalized(chain)
    return float(np.sum(pi[:-1] * chain.lam[:-1] * np.diff(f) ** 2))


def l2_norm_sq(chain: BDChain, f) -> float:
    f = np.asarray(f, dtype=float)
    return float(np.sum(_normalized(chain) * f ** 2))


@dataclass(frozen=True, eq=False)
class Tridiagonal:
    """Real symmetric tridiagonal matrix by diagonal and off-diagonal."""

    diag: np.ndarray
    offdiag: np.ndarray

    def to_dense(self) -> np.ndarray:
        return (np.diag(self.diag) + np.diag(self.offdiag, 1)
                + np.diag(self.offdiag, -1))

    def __matmul__(self, v):
        v = np.asarray(v)
        out = self.diag * v
        out[:-1] += self.offdiag * v[1:]
        out[1:] += self.offdiag * v[:-1]
        return out


def symmetrized_tridiagonal(chain: BDChain) -> Tridiagonal:
    """Symmetric form of ``-A`` with a reflecting top level.

    Diagonal ``lambda_n + mu_n`` (``lambda_{N-1}`` dropped), off-diagonal
    ``-sqrt(lambda_n mu_{n+1})``.
    """
    lam = chain.lam.copy()
    lam[-1] = 0.0
    diag = lam + chain.mu
    off = -np.exp(0.5 * (chain.log_lam[:-1] + chain.log_mu[1:]))
    return Tridiagonal(diag, off)


def sturm_count(tri: Tridiagonal, x: float) -> int:
    """Number of eigenvalues strictly below ``x``.

    Counts negative pivots of the LDL^T factorization of ``T - x I``.
    """
    d, e = tri.diag, tri.offdiag
    e2 = e * e
    pivmin = np.finfo(float).tiny * max(1.0, float(e2.max()) if e2.size else 1.0)
    count = 0
    piv = d[0] - x
    for i in range(len(d)):
        if i:
            piv = (d[i] - x) - e2[i - 1] / piv
        if abs(piv) < pivmin:
            piv = -pivmin
        if piv < 0:
            count += 1
    return count


def tridiagonal_eigenvalue(tri: Tridiagonal, index: int, rtol: float = 1e-13,
                           max_iter: int = 2000) -> float:
    """``index``-th smallest eigenvalue (0-based) by Sturm bisection.

    Bisection on Sturm counts keeps high relative accuracy for the graded,
    diagonally dominant matrices produced here, which a dense solver would
    lose to the largest diagonal entry.
    """
    n = len(tri.diag)
    if not 0 <= index < n:
        raise IndexError(f"eigenvalue index {index} outside 0..{n - 1}")
    radius = np.zeros(n)
    radius[:-1] += np.abs(tri.offdiag)
    radius[1:] += np.abs(tri.offdiag)
    lo = float(np.min(tri.diag - radius))
    hi = float(np.max(tri.diag + radius))
    span = max(abs(lo), abs(hi), 1.0)
    lo -= 1e-14 * span
    hi += 1e-14 * span
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if hi - lo <= rtol * max(abs(lo), abs(hi)) or mid in (lo, hi):
            return mid
        if sturm_count(tri, mid) > index:
            hi = mid
        else:
            lo = mid
    raise NoConvergence(f"bisection did not converge in {max_iter} steps")


def diagonal_gap_numeric(params: DeformationParams, N: Optional[int] = None,
                         check_doubling: bool = False) -> float:
    """Spectral gap of the truncated birth-death generator.

    The second smallest eigenvalue of :func:`symmetrized_tridiagonal`.
    ``N`` defaults to the smallest truncation with relative tail below
    1e-12 (and at least 16).  With ``check_doubling`` the value at ``2N``
    must agree to 1e-8 relative, else :class:`NoConvergence` is raised.
    """
    params.require("A+")
    if N is None:
        N = required_levels(params, minimum=16)
    if N < 16:
        raise ValueError(f"need at least 16 levels, got {N}")
    stationary_density(params, N, max_relative_tail=TAIL_RTOL)
    gap = tridiagonal_eigenvalue(symmetrized_tridiagonal(bd_chain(params, N)), 1)
    if check_doubling:
        N2 = min(2 * N, max_safe_level(params))
        if N2 > N:
            gap2 = tridiagonal_eigenvalue(symmetrized_tridiagonal(bd_chain(params, N2)), 1)
            if abs(gap2 - gap) > 1e-8 * abs(gap):
                raise NoConvergence(f"gap changed from {gap!r} to {gap2!r} when doubling N")
    return gap


@dataclass(frozen=True, eq=False)
class PartialSumReport:
    """Slack (right-hand side minus left-hand side) of each inequality per ``u``.

    ``tail_moment`` bounds the weighted tail sum above level ``u``;
    ``head_moment`` and ``head_mass`` bound the weighted and plain head
    sums; ``tail_lower`` and ``tail_upper`` sandwich the tail mass.
    Slacks that are zero in exact arithmetic may come out as tiny
    negatives; ``all_hold`` allows ``1e-12`` relative.
    """

    u: np.ndarray
    tail_moment: np.ndarray
    head_moment: np.ndarray
    head_mass: np.ndarray
    tail_lower: np.ndarray
    tail_upper: np.ndarray
    scale: np.ndarray = field(repr=False)

    @property
    def all_hold(self) -> bool:
        tol = -1e-12 * self.scale
        return all(bool(np.all(np.nan_to_num(s, nan=0.0) >= tol)) for s in (
            self.tail_moment, self.head_moment, self.head_mass,
            self.tail_lower, self.tail_upper))


def _tail_sums(params, eps, u, log_cut=-40.0):
    """Upper estimates of ``sum_{y>u} w_y`` and ``sum_{y>u} (y-u) w_y``.

    ``w_y = e^{-beta(eps_y - eps_{u+1})} = pi_y / pi_{u+1}``.  Terms are
    summed until they drop below ``exp(log_cut)``; the remainder is
    bounded by a geometric series in ``exp(-beta w)``, ``w`` the smallest
    gap further up, and added.
    """
    beta = params.beta
    mass = 0.0
    moment = 0.0
    y = u + 1
    while True:
        if y + 1 >= len(eps):
            raise TruncationTooSmall(f"series above level {u} needs more than {len(eps)} levels")
        a = -beta * (eps[y] - eps[u + 1])
        mass += math.exp(a)
        moment += (y - u) * math.exp(a)
        if a < log_cut:
            x = math.exp(-beta * min_gap_from(params, y + 1))
            c = y - u
            moment += math.exp(a) * (c * x / (1 - x) + x / (1 - x) ** 2)
            mass += math.exp(a) * x / (1 - x)
            return mass, moment
        y += 1


def partial_sum_inequalities(params: DeformationParams, u_max: int) -> PartialSumReport:
    """Check the partial-sum bounds used for the diagonal gap lower bound.

    For each ``u <= u_max`` (unnormalized weights ``pi``):

    * ``sum_{y>u} (y-u) pi_y / (pi_u lambda_u) <= 1/(eps_{u+1}(1 - e^{-beta omega_{u+1}}))``
    * ``sum_{x<u} (u-x) pi_x <= u/(1-e^{-beta}) - e^{-beta}(1-e^{-beta u})/(1-e^{-beta})^2``
    * ``sum_{x<=u} pi_x <= (1 - e^{-beta(u+1)})/(1 - e^{-beta})``
    * ``pi_{u+1} <= sum_{y>u} pi_y <= pi_{u+1}/(1 - e^{-beta omega_{u+1}})``

    The tail sums are taken relative to ``pi_u`` or ``pi_{u+1}`` so that
    nothing underflows.  Requires ``r + q >= 2``.
    """
    if not params.region_b:
        raise RegionViolation("; ".join(params.violations("B")) or "r+q >= 2 required")
    if u_max < 5:
        raise ValueError(f"u_max must be at least 5, got {u_max}")
    beta = params.beta
    n_tab = min(max_safe_level(params, cap=4096), u_max + 4096)
    table = spectrum_table(params, n_tab, max_level=n_tab)
    eps, omega = table.eps, table.omega
    q1 = -math.expm1(-beta)

    us = np.arange(u_max + 1)
    tail_moment = np.empty(len(us))
    head_moment = np.full(len(us), np.nan)
    head_mass = np.empty(len(us))
    tail_lower = np.empty(len(us))
    tail_upper = np.empty(len(us))
    scale = np.ones(len(us))
    for u in us:
        mass, moment = _tail_sums(params, eps, u)
        gm = -math.expm1(-beta * omega[u + 1])
        # pi_u lambda_u = pi_{u+1} eps_{u+1} / (1 - e^{-beta omega_{u+1}})
        lhs = moment * gm / eps[u + 1]
        rhs = 1.0 / (eps[u + 1] * gm)
        tail_moment[u] = rhs - lhs
        scale[u] = max(1.0, rhs)
        tail_lower[u] = mass - 1.0
        tail_upper[u] = 1.0 / gm - mass
        pi_head = np.exp(-beta * eps[:u + 1])
        head_mass[u] = -math.expm1(-beta * (u + 1)) / q1 - math.fsum(pi_head)
        if u >= 1:
            lhs2 = math.fsum((u - np.arange(u)) * pi_head[:u])
            rhs2 = u / q1 - math.exp(-beta) * -math.expm1(-beta * u) / q1 ** 2
            head_moment[u] = rhs2 - lhs2
            scale[u] = max(scale[u], rhs2)
    return PartialSumReport(us, tail_moment, head_moment, head_mass,
                            tail_lower, tail_upper, scale)
