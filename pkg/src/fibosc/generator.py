"""Thermal rates and the truncated GKLS generator.

The generator acts on observables ``x`` as

    L(x) = G x + x G^* + sum_l L_l^* x L_l,

with diagonal ``G`` and rank-one Kraus operators hopping between
neighbouring levels.  Its predual acts on states as

    L_*(rho) = G^* rho + rho G + sum_l L_l rho L_l^*.

Neither is ever materialized as an ``N^2 x N^2`` matrix: the diagonal of
``G`` scales every entry and the Kraus terms only touch the diagonal.

Truncation is reflecting: the top level ``N-1`` loses its upward outflow
``Gamma^+_N eps_N`` both in ``G`` and in the Kraus list, so the truncated
generator is exactly conservative and the truncated thermal state is
exactly stationary.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .algebra import DeformationParams, SpectrumTable, qr_integer, spectrum_table
from .errors import (DegenerateFrequency, DimensionMismatch, InvalidPair,
                     ValidationError)


def gamma_rates(omega, beta):
    """Planck factors ``(Gamma^-, Gamma^+)`` at frequency ``omega``.

    ``Gamma^- = e^{b}/(e^{b}-1)`` and ``Gamma^+ = 1/(e^{b}-1)`` with
    ``b = beta*omega``, evaluated through ``expm1(-b)`` so that large ``b``
    returns ``(1, 0)`` without overflow.  Accepts scalars or arrays.
    """
    omega = np.asarray(omega, dtype=float)
    if beta <= 0:
        raise ValidationError(f"beta > 0 required, got {beta!r}")
    if np.any(~(omega > 0)):
        raise DegenerateFrequency(
            f"Bohr frequency must be positive, got {omega.min()!r} (r+q = 1 boundary?)")
    x = beta * omega
    one_minus = -np.expm1(-x)
    g_minus = 1.0 / one_minus
    g_plus = np.exp(-x) / one_minus
    if g_minus.ndim == 0:
        return float(g_minus), float(g_plus)
    return g_minus, g_plus


def log_gamma_plus(omega, beta):
    """``log Gamma^+`` without forming ``e^{beta omega}``."""
    x = beta * np.asarray(omega, dtype=float)
    return -x - np.log(-np.expm1(-x))


def log_gamma_minus(omega, beta):
    x = beta * np.asarray(omega, dtype=float)
    return -np.log(-np.expm1(-x))


@dataclass(frozen=True, eq=False)
class RateTable:
    """Rates indexed by level: entry ``n`` holds ``Gamma^{+-}_n`` (entry 0 unused).

    ``down[n] = Gamma^-_n eps_n`` and ``up[n] = Gamma^+_n eps_n`` are the
    squared Kraus coefficients, computed in log form.
    """

    n_levels: int
    gamma_minus: np.ndarray
    gamma_plus: np.ndarray
    down: np.ndarray
    up: np.ndarray
    kappa_minus: np.ndarray
    kappa_plus: np.ndarray


def rate_table(table: SpectrumTable, kappa_minus=None, kappa_plus=None) -> RateTable:
    params = table.params
    n = table.n_levels
    omega = table.omega[1:]
    if np.any(~(omega > 0)):
        raise DegenerateFrequency("a Bohr frequency omega_n <= 0 (r+q = 1 boundary?)")
    gm, gp = gamma_rates(omega, params.beta)
    eps = table.eps[1:]
    down = np.exp(np.log(eps) + log_gamma_minus(omega, params.beta))
    up = np.exp(np.log(eps) + log_gamma_plus(omega, params.beta))

    def pad(v):
        return np.concatenate(([0.0], v))

    def kappas(k):
        if k is None:
            return np.zeros(n + 1)
        k = np.asarray(k, dtype=float)
        if k.shape != (n + 1,):
            raise DimensionMismatch(f"kappa arrays need {n + 1} entries (levels 0..{n}), got {k.shape}")
        return k

    return RateTable(n, pad(gm), pad(gp), pad(down), pad(up), kappas(kappa_minus), kappas(kappa_plus))


@dataclass(frozen=True, eq=False)
class TruncatedGenerator:
    """GKLS generator on levels ``0..N-1``.

    ``kraus`` holds ``(coefficient, from_level, to_level)`` triples:
    ``sqrt(Gamma^-_l eps_l)`` for ``l -> l-1`` and ``sqrt(Gamma^+_l eps_l)``
    for ``l-1 -> l``.  ``mu[n]`` and ``lam[n]`` are the squared downward and
    upward coefficients leaving level ``n`` inside the truncation
    (``mu[0] = 0``, ``lam[N-1] = 0``); ``boundary_outflow`` is the dropped
    ``Gamma^+_N eps_N``.
    """

    params: DeformationParams
    table: SpectrumTable
    rates: RateTable
    g_diag: np.ndarray
    kraus: list
    mu: np.ndarray = field(repr=False)
    lam: np.ndarray = field(repr=False)
    boundary_outflow: float = 0.0

    @property
    def dim(self) -> int:
        return self.table.n_levels

    def max_rate(self) -> float:
        """``max_n (lambda_n + mu_n)`` over the truncation."""
        return float(np.max(self.mu + self.lam))


def build_generator(params: DeformationParams, n_levels: int,
                    kappa_minus=None, kappa_plus=None) -> TruncatedGenerator:
    """Assemble the truncated generator for ``n_levels`` levels.

    ``kappa_minus`` and ``kappa_plus`` (length ``n_levels + 1``, indexed by
    level, entry 0 of ``kappa_minus`` ignored) set the Hamiltonian
    corrections and default to zero.
    """
    params.require("A+")
    if n_levels < 2:
        raise ValueError(f"need at least two levels, got {n_levels}")
    table = spectrum_table(params, n_levels)
    rates = rate_table(table, kappa_minus, kappa_plus)
    n = n_levels
    mu = rates.down[:n].copy()                 # Gamma^-_n eps_n, n = 0..N-1
    lam = np.zeros(n)
    lam[:n - 1] = rates.up[1:n]                # Gamma^+_{n+1} eps_{n+1}
    km = rates.kappa_minus.copy()
    km[0] = 0.0
    energy = km[:n] + rates.kappa_plus[1:n + 1]
    energy[n - 1] = km[n - 1]                  # top level: only in-truncation terms
    g = 1j * energy - 0.5 * (mu + lam)
    kraus = []
    for l in range(1, n):
        kraus.append((math.sqrt(rates.down[l]), l, l - 1))
        kraus.append((math.sqrt(rates.up[l]), l - 1, l))
    return TruncatedGenerator(params, table, rates, g, kraus, mu, lam,
                              boundary_outflow=float(rates.up[n]))


def _check_shape(gen: TruncatedGenerator, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x)
    if x.shape != (gen.dim, gen.dim):
        raise DimensionMismatch(f"expected a {gen.dim}x{gen.dim} matrix, got {x.shape}")
    return x


def apply_primal(gen: TruncatedGenerator, x) -> np.ndarray:
    """Heisenberg-picture action ``L(x)``."""
    x = _check_shape(gen, x)
    g = gen.g_diag
    out = (g[:, None] + np.conj(g)[None, :]) * x
    d = np.diagonal(x)
    gain = np.zeros(gen.dim, dtype=out.dtype)
    gain[1:] += gen.mu[1:] * d[:-1]
    gain[:-1] += gen.lam[:-1] * d[1:]
    out[np.diag_indices(gen.dim)] += gain
    return out


def apply_predual(gen: TruncatedGenerator, rho) -> np.ndarray:
    """Schroedinger-picture action ``L_*(rho)``; accepts arrays or DensityMatrix."""
    rho = _check_shape(gen, getattr(rho, "entries", rho))
    g = gen.g_diag
    out = (np.conj(g)[:, None] + g[None, :]) * rho
    p = np.diagonal(rho)
    gain = np.zeros(gen.dim, dtype=out.dtype)
    gain[1:] += gen.lam[:-1] * p[:-1]
    gain[:-1] += gen.mu[1:] * p[1:]
    out[np.diag_indices(gen.dim)] += gain
    return out


def level_decay(params: DeformationParams, n: int) -> float:
    """``Gamma^-_n eps_n + Gamma^+_{n+1} eps_{n+1}`` with ``Gamma^-_0 eps_0 = 0``.

    Closed form, independent of any truncation.
    """
    beta = params.beta
    e0, e1 = qr_integer(params, n), qr_integer(params, n + 1)
    total = 0.0
    if n >= 1:
        w = e0 - qr_integer(params, n - 1)
        total += math.exp(math.log(e0) + float(log_gamma_minus(_positive(w), beta)))
    w1 = e1 - e0
    total += math.exp(math.log(e1) + float(log_gamma_plus(_positive(w1), beta)))
    return total


def _positive(w: float) -> float:
    if not w > 0:
        raise DegenerateFrequency(f"Bohr frequency must be positive, got {w!r}")
    return w


def offdiag_eigenvalue(gen: TruncatedGenerator, j: int, k: int) -> complex:
    """Eigenvalue ``xi_jk`` of the generator on ``|e_j><e_k|``, ``j != k``.

    Real part from the closed-form rates (no truncation); imaginary part
    from the generator's kappa arrays, zero beyond their range.
    """
    if j == k:
        raise InvalidPair(f"need j != k, got j = k = {j}")
    if j < 0 or k < 0:
        raise InvalidPair(f"levels must be nonnegative, got ({j}, {k})")
    p = gen.params
    real = -0.5 * (level_decay(p, j) + level_decay(p, k))
    km, kp = gen.rates.kappa_minus, gen.rates.kappa_plus

    def kap(arr, n):
        # kappa sequences start at n = 1; kappa^-_0 is taken as 0
        return float(arr[n]) if 1 <= n < len(arr) else 0.0

    imag = kap(km, j) - kap(km, k) + kap(kp, j + 1) - kap(kp, k + 1)
    return complex(real, imag)


class DensityMatrix:
    """Hermitian, positive semidefinite, unit-trace matrix.

    Validation tolerances: Hermiticity 1e-12, trace 1e-10, eigenvalues
    ``>= -1e-10``.  Pass ``check=False`` to skip them.
    """

    def __init__(self, entries, check: bool = True):
        entries = np.array(entries, dtype=complex)
        if entries.ndim != 2 or entries.shape[0] != entries.shape[1]:
            raise DimensionMismatch(f"density matrix must be square, got {entries.shape}")
        self.entries = entries
        self.entries.setflags(write=False)
        if check:
            self.validate()

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def validate(self) -> None:
        rho = self.entries
        herm = np.max(np.abs(rho - rho.conj().T)) if rho.size else 0.0
        if herm > 1e-12:
            raise ValidationError(f"not Hermitian (residual {herm:.3e})")
        tr = np.trace(rho)
        if abs(tr - 1.0) > 1e-10:
            raise ValidationError(f"trace {tr.real:.15g} != 1")
        low = np.linalg.eigvalsh(rho).min()
        if low < -1e-10:
            raise ValidationError(f"negative eigenvalue {low:.3e}")

    @classmethod
    def pure(cls, dim: int, level: int) -> "DensityMatrix":
        rho = np.zeros((dim, dim), dtype=complex)
        rho[level, level] = 1.0
        return cls(rho)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.entries, dtype=dtype)

    def __repr__(self):
        return f"DensityMatrix(dim={self.dim})"
