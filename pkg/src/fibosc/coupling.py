"""Bohr spectrum of a diagonal Hamiltonian and weak-coupling Kraus operators.

For a system operator ``D`` and a Bohr frequency ``omega`` the Kraus
operator keeps exactly the matrix elements of ``D`` that lower the energy
by ``omega``::

    D_omega = sum_{(n, m): eps_n - eps_m = omega} <e_m, D e_n> |e_m><e_n|
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .algebra import SpectrumTable
from .errors import DimensionMismatch, UnknownFrequency


@dataclass(frozen=True, eq=False)
class BohrSpectrum:
    """Positive level gaps grouped into Bohr classes.

    ``pairs[omega]`` lists the index pairs ``(n, m)`` with
    ``eps_n - eps_m`` within ``tol`` of ``omega`` (``n`` is the upper level).
    Pairs touching ``top_level`` are also listed in ``boundary_pairs``
    because the truncation corrupts matrix elements there.
    """

    omegas: tuple
    pairs: dict
    tol: float
    eps: np.ndarray = field(repr=False)
    top_level: int = 0
    boundary_pairs: frozenset = frozenset()

    def find(self, omega: float) -> float:
        """Return the class representative within ``tol`` of ``omega``."""
        if self.omegas:
            arr = np.asarray(self.omegas)
            i = int(np.argmin(np.abs(arr - omega)))
            if abs(arr[i] - omega) <= self.tol:
                return self.omegas[i]
        raise UnknownFrequency(f"{omega!r} is not a Bohr frequency of this spectrum")

    def pairs_for(self, omega: float) -> list:
        return self.pairs[self.find(omega)]


def bohr_spectrum(table: SpectrumTable, tol: float = 1e-9) -> BohrSpectrum:
    """Group all positive gaps among levels ``0..N-1``.

    Gaps are sorted and a new class starts whenever a gap exceeds the
    current class's smallest member by more than ``tol``; the smallest
    member is the class frequency.
    """
    if tol <= 0:
        raise ValueError(f"tol must be positive, got {tol}")
    dim = table.n_levels
    if dim < 2:
        raise ValueError("need at least two levels")
    eps = np.asarray(table.eps[:dim], dtype=float)
    gaps = []
    for n in range(dim):
        for m in range(dim):
            g = eps[n] - eps[m]
            if g > tol:
                gaps.append((g, n, m))
    gaps.sort()

    omegas: list[float] = []
    pairs: dict[float, list] = {}
    for g, n, m in gaps:
        if not omegas or g - omegas[-1] > tol:
            omegas.append(float(g))
            pairs[omegas[-1]] = []
        pairs[omegas[-1]].append((n, m))
    for w in omegas:
        pairs[w].sort(key=lambda nm: (nm[1], nm[0]))

    top = dim - 1
    boundary = frozenset(p for w in omegas for p in pairs[w] if top in p)
    return BohrSpectrum(tuple(omegas), pairs, tol, eps, top, boundary)


class Genericity(NamedTuple):
    generic: bool
    degenerate_levels: list
    witness: dict


def is_generic(spectrum: BohrSpectrum, table: SpectrumTable) -> Genericity:
    """Nondegenerate levels and exactly one pair per Bohr class.

    On failure ``degenerate_levels`` lists level pairs with equal energy
    and ``witness`` maps each offending frequency to its pairs.
    """
    eps = np.asarray(table.eps[:table.n_levels])
    degenerate = [(m, n) for n in range(len(eps)) for m in range(n)
                  if abs(eps[n] - eps[m]) <= spectrum.tol]
    witness = {w: list(p) for w, p in spectrum.pairs.items() if len(p) != 1}
    return Genericity(not degenerate and not witness, degenerate, witness)


@dataclass(frozen=True, eq=False)
class KrausExtraction:
    omega: float
    d_omega: np.ndarray
    rank: int


def kraus_from_coupling(D, spectrum: BohrSpectrum, omega: float) -> KrausExtraction:
    """Extract ``D_omega`` from the coupling matrix ``D``."""
    D = np.asarray(D)
    dim = len(spectrum.eps)
    if D.shape != (dim, dim):
        raise DimensionMismatch(f"coupling has shape {D.shape}, spectrum has {dim} levels")
    w = spectrum.find(omega)
    out = np.zeros((dim, dim), dtype=np.result_type(D.dtype, float))
    for n, m in spectrum.pairs[w]:
        out[m, n] = D[m, n]
    rank = int(np.linalg.matrix_rank(out)) if np.any(out) else 0
    return KrausExtraction(w, out, rank)


def kraus_sum(D, spectrum: BohrSpectrum) -> np.ndarray:
    """``sum_omega D_omega`` over all Bohr classes."""
    return sum((kraus_from_coupling(D, spectrum, w).d_omega for w in spectrum.omegas),
               start=np.zeros((len(spectrum.eps),) * 2))
