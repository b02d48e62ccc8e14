"""(q,r)-integers, Bohr frequencies and truncated ladder operators.

The energy levels of the generalized Fibonacci oscillator are

    eps_0 = 0,  eps_1 = 1,  eps_n = (r**n - q**n) / (r - q),

which obey the two-term recurrence
``eps_{n+2} = (r + q) eps_{n+1} - r q eps_n``.  The nearest-neighbour
gaps ``omega_n = eps_n - eps_{n-1}`` are the Bohr frequencies that drive
the thermal jump rates.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DegenerateParams, NegativeEigenvalue, RegionViolation

#: Levels above this index use the recurrence instead of the power formula.
POWER_FORMULA_MAX = 64
DEFAULT_MAX_LEVEL = 1024
#: Default ceiling on eps_N when choosing a truncation automatically.
EPS_CEILING = 1e300


@dataclass(frozen=True)
class DeformationParams:
    """Deformation parameters ``r > q`` and inverse temperature ``beta``.

    Only ``r > q`` and ``beta > 0`` are enforced here. The admissible
    regions used by the dynamics are exposed as flags and checked by
    :meth:`require`.
    """

    r: float
    q: float
    beta: float

    def __post_init__(self):
        for name in ("r", "q", "beta"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise DegenerateParams(f"{name} must be finite, got {value!r}")
        if not self.r > self.q:
            raise DegenerateParams(
                f"r > q required, got r={self.r!r}, q={self.q!r}")
        if not self.beta > 0:
            raise DegenerateParams(f"beta > 0 required, got {self.beta!r}")

    @property
    def rq_sum(self) -> float:
        return self.r + self.q

    @property
    def region_a(self) -> bool:
        """``-1 <= q <= 1 < r`` and ``r + q >= 1``."""
        return -1.0 <= self.q <= 1.0 < self.r and self.r + self.q >= 1.0

    @property
    def region_b(self) -> bool:
        """Region A with ``r + q >= 2`` (nondecreasing Bohr frequencies)."""
        return self.region_a and self.r + self.q >= 2.0

    @property
    def region_c(self) -> bool:
        """Region B with ``q >= -2/3``."""
        return self.region_b and self.q >= -2.0 / 3.0

    @property
    def on_degenerate_boundary(self) -> bool:
        """True when ``r + q == 1``, where ``omega_2 = 0``."""
        return self.r + self.q == 1.0

    def violations(self, region: str = "A") -> list[str]:
        """Human-readable list of the inequalities violated for ``region``."""
        region = region.upper()
        out = []
        if not self.r > 1.0:
            out.append(f"r > 1 required, got {self.r:.15g}")
        if not self.q >= -1.0:
            out.append(f"q >= -1 required, got {self.q:.15g}")
        if not self.q <= 1.0:
            out.append(f"q <= 1 required, got {self.q:.15g}")
        s = self.r + self.q
        if not s >= 1.0:
            out.append(f"r+q >= 1 required, got {s:.15g}")
        if region in ("A+", "B", "C") and s == 1.0:
            out.append("r+q > 1 required (omega_2 = 0 makes the rates diverge)")
        if region in ("B", "C") and not s >= 2.0:
            out.append(f"r+q >= 2 required, got {s:.15g}")
        if region == "C" and not self.q >= -2.0 / 3.0:
            out.append(f"q >= -2/3 required, got {self.q:.15g}")
        return out

    def require(self, region: str = "A") -> None:
        """Raise if the parameters are outside ``region``.

        ``region`` is one of ``"A"``, ``"A+"`` (region A with ``r + q > 1``
        strictly), ``"B"`` or ``"C"``.  ``r + q == 1`` raises
        :class:`DegenerateParams`, everything else :class:`RegionViolation`.
        """
        problems = self.violations(region)
        if not problems:
            return
        if region.upper() != "A" and self.on_degenerate_boundary and len(problems) == 1:
            raise DegenerateParams(problems[0])
        raise RegionViolation("; ".join(problems))


def _check_distinct(r: float, q: float) -> None:
    if r == q:
        raise DegenerateParams("r = q: (q,r)-integers are undefined")


def qr_integer(params: DeformationParams, n: int,
               max_level: int = DEFAULT_MAX_LEVEL) -> float:
    """Return the (q,r)-integer ``eps_n``.

    The power formula is used up to level 64 and the recurrence beyond.

    Raises
    ------
    OverflowError
        If ``n`` exceeds ``max_level`` or ``eps_n`` is not representable.
    """
    r, q = params.r, params.q
    _check_distinct(r, q)
    if n < 0:
        raise ValueError(f"level must be nonnegative, got {n}")
    if n > max_level:
        raise OverflowError(f"level {n} exceeds max_level={max_level}")
    if n == 0:
        return 0.0
    if n == 1:
        return 1.0
    if n <= POWER_FORMULA_MAX:
        try:
            value = (r ** n - q ** n) / (r - q)
        except OverflowError:
            raise OverflowError(f"r**{n} overflows for r={r!r}") from None
    else:
        value = float(_eps_array(r, q, n)[n])
    if not math.isfinite(value):
        raise OverflowError(f"eps_{n} overflows for r={r!r}, q={q!r}")
    return value


def _eps_array(r: float, q: float, n_max: int) -> np.ndarray:
    """eps_0..eps_{n_max} (length ``n_max + 1``)."""
    _check_distinct(r, q)
    eps = np.empty(n_max + 1)
    head = min(n_max, POWER_FORMULA_MAX)
    idx = np.arange(head + 1, dtype=float)
    with np.errstate(over="raise", invalid="raise"):
        try:
            eps[:head + 1] = (np.power(r, idx) - np.power(q, idx)) / (r - q)
        except FloatingPointError:
            raise OverflowError(f"r**n overflows below level {head}") from None
    eps[0] = 0.0
    if n_max >= 1:
        eps[1] = 1.0
    s, p = r + q, r * q
    prev, cur = float(eps[head - 1]) if head else 0.0, float(eps[head])
    for n in range(head + 1, n_max + 1):
        prev, cur = cur, s * cur - p * prev
        if not math.isfinite(cur):
            raise OverflowError(f"eps_{n} overflows for r={r!r}, q={q!r}")
        eps[n] = cur
    return eps


def max_safe_level(params: DeformationParams, ceiling: float = EPS_CEILING,
                   cap: int = DEFAULT_MAX_LEVEL) -> int:
    """Largest ``N <= cap`` with ``|eps_N| < ceiling``."""
    r, q = params.r, params.q
    if abs(r) > 1:
        # |eps_n| ~ |r|**n / (r - q); solve conservatively, then refine
        guess = int((math.log(ceiling) + math.log(max(r - q, 1e-300))) / math.log(abs(r))) + 2
        n = min(cap, max(guess, 2))
    else:
        n = cap
    while n > 1:
        try:
            eps = _eps_array(r, q, n)
        except OverflowError:
            n -= 1
            continue
        if np.all(np.abs(eps) < ceiling):
            return n
        n -= 1
    return 1


@dataclass(frozen=True, eq=False)
class SpectrumTable:
    """Levels ``eps_0..eps_N`` and gaps ``omega_1..omega_N``.

    ``omega`` is stored with a leading NaN so that ``omega[n]`` is
    ``omega_n``.  ``log_pi[n] = -beta * eps_n`` are the unnormalized
    log stationary weights.
    """

    params: DeformationParams
    n_levels: int
    eps: np.ndarray
    omega: np.ndarray
    log_pi: np.ndarray = field(repr=False)

    def recurrence_residual(self) -> float:
        e = self.eps
        if len(e) < 3:
            return 0.0
        s, p = self.params.r + self.params.q, self.params.r * self.params.q
        res = np.abs(e[2:] - s * e[1:-1] + p * e[:-2])
        return float(np.max(res / np.maximum(1.0, np.abs(e[2:]))))


def spectrum_table(params: DeformationParams, n_levels: int,
                   max_level: int = DEFAULT_MAX_LEVEL) -> SpectrumTable:
    """Tabulate ``eps_0..eps_N`` and ``omega_1..omega_N`` for ``N = n_levels``."""
    if n_levels < 1:
        raise ValueError(f"n_levels must be positive, got {n_levels}")
    if n_levels > max_level:
        raise OverflowError(f"n_levels={n_levels} exceeds max_level={max_level}")
    eps = _eps_array(params.r, params.q, n_levels)
    eps.setflags(write=False)
    omega = np.empty_like(eps)
    omega[0] = np.nan
    omega[1:] = np.diff(eps)
    omega.setflags(write=False)
    log_pi = -params.beta * eps
    log_pi.setflags(write=False)
    return SpectrumTable(params, n_levels, eps, omega, log_pi)


def bohr_frequency(table: SpectrumTable, n: int) -> float:
    """``omega_n = eps_n - eps_{n-1}`` for ``1 <= n <= N``."""
    if not 1 <= n <= table.n_levels:
        raise IndexError(f"omega_{n} outside table range 1..{table.n_levels}")
    return float(table.omega[n])


def omega_closed_form(params: DeformationParams, n: int) -> float:
    """``omega_n`` straight from powers of r and q, usable beyond a table."""
    r, q = params.r, params.q
    if n == 1:
        return 1.0
    try:
        return (r ** (n - 1) * (r - 1.0) + q ** (n - 1) * (1.0 - q)) / (r - q)
    except OverflowError:
        return math.inf


@dataclass(frozen=True)
class MonotonicityReport:
    """Scan and closed-form verdicts for the three monotonicity properties.

    ``*_analytic`` is None where the closed-form criterion does not apply
    (outside ``-1 <= q <= 1 < r``).  ``disagreements`` maps a property name
    to the first level at which the scan fails, for every property whose
    two verdicts differ.
    """

    n_check: int
    c: float
    eps_nondecreasing: bool
    eps_nondecreasing_analytic: Optional[bool]
    eps_strictly_increasing: bool
    eps_strictly_increasing_analytic: Optional[bool]
    omega_nondecreasing: bool
    omega_nondecreasing_analytic: Optional[bool]
    ratio_bound_holds: bool
    ratio_bound_analytic: Optional[bool]
    first_failure: dict
    disagreements: dict

    @property
    def consistent(self) -> bool:
        return not self.disagreements


def _first_failure(ok: np.ndarray, offset: int) -> Optional[int]:
    bad = np.flatnonzero(~ok)
    return int(bad[0]) + offset if bad.size else None


def monotonicity_report(params: DeformationParams, n_check: int,
                        c: float = 1.0) -> MonotonicityReport:
    """Check eps, omega and the ratio bound ``eps_k/omega_k >= 1 + 1/(r+q+c)``.

    Each property is decided twice: by scanning levels ``1..n_check`` and
    by the corresponding closed-form criterion (``r+q >= 1``,
    ``r+q >= 2`` and ``(1+c)(r+q) + rq >= 0``).
    """
    if n_check < 3:
        raise ValueError(f"n_check must be at least 3, got {n_check}")
    if c < 0:
        raise ValueError(f"c must be nonnegative, got {c}")
    r, q = params.r, params.q
    eps = _eps_array(r, q, n_check)
    omega = np.diff(eps)  # omega[k-1] = omega_k
    scale = 1e-12 * np.maximum(1.0, np.abs(eps[1:]))

    d_eps = eps[1:] - eps[:-1]
    eps_ok = d_eps >= -scale
    eps_strict = d_eps > scale

    d_omega = omega[1:] - omega[:-1]
    omega_ok = d_omega >= -1e-12 * np.maximum(1.0, np.abs(omega[1:]))

    s = r + q
    target = 1.0 + 1.0 / (s + c) if s + c > 0 else math.inf
    k = np.arange(2, n_check + 1)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = eps[k] / omega[k - 1]
    ratio_ok = (omega[k - 1] > 0) & (ratio >= target - 1e-12 * np.maximum(1.0, np.abs(ratio)))

    inside = -1.0 <= q <= 1.0 < r
    eps_an = (s >= 1.0) if inside else None
    strict_an = (s > 1.0) if inside else None
    omega_an = (s >= 2.0) if inside else None
    ratio_an = ((1.0 + c) * s + r * q >= 0.0) if (inside and s > 1.0) else None

    first = {
        "eps_nondecreasing": _first_failure(eps_ok, 1),
        "eps_strictly_increasing": _first_failure(eps_strict, 1),
        "omega_nondecreasing": _first_failure(omega_ok, 2),
        "ratio_bound": _first_failure(ratio_ok, 2),
    }
    verdicts = {
        "eps_nondecreasing": (bool(eps_ok.all()), eps_an),
        "eps_strictly_increasing": (bool(eps_strict.all()), strict_an),
        "omega_nondecreasing": (bool(omega_ok.all()), omega_an),
        "ratio_bound": (bool(ratio_ok.all()), ratio_an),
    }
    disagreements = {name: first[name] for name, (scan, an) in verdicts.items()
                     if an is not None and scan != an}
    return MonotonicityReport(
        n_check=n_check, c=c,
        eps_nondecreasing=verdicts["eps_nondecreasing"][0],
        eps_nondecreasing_analytic=eps_an,
        eps_strictly_increasing=verdicts["eps_strictly_increasing"][0],
        eps_strictly_increasing_analytic=strict_an,
        omega_nondecreasing=verdicts["omega_nondecreasing"][0],
        omega_nondecreasing_analytic=omega_an,
        ratio_bound_holds=verdicts["ratio_bound"][0],
        ratio_bound_analytic=ratio_an,
        first_failure=first,
        disagreements=disagreements,
    )


@dataclass(frozen=True, eq=False)
class LadderMatrices:
    dim: int
    a: np.ndarray
    a_dag: np.ndarray
    number_op: np.ndarray
    h_s: np.ndarray


def ladder_matrices(table: SpectrumTable) -> LadderMatrices:
    """Annihilation/creation matrices on levels ``0..N-1``.

    ``a`` carries ``sqrt(eps_n)`` at position ``(n-1, n)``.
    """
    dim = table.n_levels
    eps = table.eps[:dim]
    if np.any(eps < 0):
        bad = int(np.flatnonzero(eps < 0)[0])
        raise NegativeEigenvalue(f"eps_{bad} = {eps[bad]!r} < 0; outside the admissible region")
    a = np.zeros((dim, dim))
    idx = np.arange(1, dim)
    a[idx - 1, idx] = np.sqrt(eps[1:])
    return LadderMatrices(
        dim=dim, a=a, a_dag=a.T.copy(),
        number_op=np.diag(np.arange(dim, dtype=float)),
        h_s=np.diag(eps.copy()),
    )


def commutation_residuals(mats: LadderMatrices,
                          params: DeformationParams) -> tuple[float, float]:
    """Residuals of ``a a^+ - r a^+ a = q^N`` and ``a a^+ - q a^+ a = r^N``.

    Levels ``0..N-2`` only; the top level is cut by the truncation.  Each
    entry is divided by ``max(1, |a a^+| + |x a^+ a|)`` so the residual is
    a relative one and stays meaningful when eps_n is large.
    """
    n = mats.dim
    if n < 3:
        raise ValueError(f"need at least 3 levels to leave an interior, got {n}")
    m = n - 1
    aad = (mats.a @ mats.a_dag)[:m, :m]
    ada = (mats.a_dag @ mats.a)[:m, :m]
    levels = np.diag(mats.number_op)[:m]

    def residual(x, y):
        lhs = aad - x * ada
        rhs = np.diag(np.power(y, levels))
        scale = np.maximum(1.0, np.abs(aad) + np.abs(x * ada))
        return float(np.max(np.abs(lhs - rhs) / scale))

    return residual(params.r, params.q), residual(params.q, params.r)


__all__ = [
    "DeformationParams", "SpectrumTable", "LadderMatrices", "MonotonicityReport",
    "qr_integer", "spectrum_table", "bohr_frequency", "omega_closed_form",
    "monotonicity_report", "ladder_matrices", "commutation_residuals",
    "max_safe_level",
]
