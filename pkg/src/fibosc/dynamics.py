"""Fixed-step integration of the truncated master equation.

States are advanced with the classical fourth-order Runge-Kutta scheme on
``d rho/dt = L_*(rho)`` and re-symmetrized after every step.  Distances to
the truncated thermal state are measured in trace norm and in the weighted
norm ``|| rho_inv^{-1/4} (rho - rho_inv) rho_inv^{-1/4} ||_HS``, the norm
in which the spectral gap bounds the decay.
"""
from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .birthdeath import TAIL_RTOL, required_levels
from .errors import (InsufficientDecay, StabilityViolation, TruncationLeak,
                     ValidationError)
from .generator import DensityMatrix, TruncatedGenerator, apply_predual

#: Largest ``dt * max_rate`` accepted by :func:`evolve`.
STABILITY_FACTOR = 0.1
LEAK_TOLERANCE = 1e-6
INITIAL_TOP_MASS = 1e-10
DRIFT_TOLERANCE = 1e-6


def simulation_levels(params) -> int:
    """Truncation for simulations: the tail-bound truncation plus two levels.

    The two extra levels carry thermal mass below the tail bound, which
    keeps thermal initial states clear of the top of the ladder.
    """
    return required_levels(params, rtol=TAIL_RTOL) + 2


def thermal_weights(gen: TruncatedGenerator) -> np.ndarray:
    """Normalized ``exp(-beta eps_n)`` on the generator's levels."""
    log_pi = np.asarray(gen.table.log_pi[:gen.dim])
    w = np.exp(log_pi - log_pi.max())
    return w / math.fsum(w)


def stable_step(gen: TruncatedGenerator) -> float:
    """Largest step allowed by the stability condition."""
    return STABILITY_FACTOR / gen.max_rate()


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Recorded states and diagnostics of one run.

    ``states[i]`` is the density matrix at ``times[i]``; ``trace_drift`` is
    the largest ``|tr rho - 1|`` over every step, recorded or not.
    """

    times: np.ndarray
    states: np.ndarray = field(repr=False)
    traces: np.ndarray = field(repr=False)
    min_eigs: np.ndarray = field(repr=False)
    trace_distances: np.ndarray = field(repr=False)
    l2_distances: np.ndarray = field(repr=False)
    trace_drift: float = 0.0
    dt: float = 0.0

    def density(self, i: int) -> DensityMatrix:
        return DensityMatrix(self.states[i], check=False)

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]


def _rk4_step(gen, rho, h):
    k1 = apply_predual(gen, rho)
    k2 = apply_predual(gen, rho + 0.5 * h * k1)
    k3 = apply_predual(gen, rho + 0.5 * h * k2)
    k4 = apply_predual(gen, rho + h * k3)
    out = rho + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return 0.5 * (out + out.conj().T)


def evolve(gen: TruncatedGenerator, rho0, t_max: float, dt: float,
           record_every: int = 1) -> Trajectory:
    """Integrate from ``rho0`` up to ``t_max``.

    The step is ``t_max / ceil(t_max / dt)``, so the last recorded time is
    exactly ``t_max``.  Every ``record_every``-th state is stored, plus the
    final one.

    Raises
    ------
    StabilityViolation
        If ``dt > 0.1 / max_rate`` or the trace drifts by more than 1e-6.
    TruncationLeak
        If ``rho0`` puts more than 1e-10 on the top two levels or the top
        level ever holds more than 1e-6.
    """
    rho = np.array(getattr(rho0, "entries", rho0), dtype=complex)
    n = gen.dim
    if rho.shape != (n, n):
        raise ValidationError(f"initial state has shape {rho.shape}, generator has {n} levels")
    if not (t_max > 0 and dt > 0):
        raise ValidationError(f"t_max and dt must be positive, got {t_max!r}, {dt!r}")
    if record_every < 1:
        raise ValidationError(f"record_every must be >= 1, got {record_every}")
    limit = stable_step(gen)
    if dt > limit:
        raise StabilityViolation(f"dt = {dt:.3e} exceeds 0.1/max_rate = {limit:.3e}")
    top2 = float(np.real(rho[n - 2, n - 2] + rho[n - 1, n - 1]))
    if top2 > INITIAL_TOP_MASS:
        raise TruncationLeak(f"initial state has mass {top2:.3e} on the top two levels")

    n_steps = math.ceil(t_max / dt - 1e-12)
    h = t_max / n_steps
    p = thermal_weights(gen)
    s = p ** -0.25

    rec_t, rec_rho = [0.0], [rho.copy()]
    drift = abs(np.trace(rho).real - 1.0)
    for step in range(1, n_steps + 1):
        rho = _rk4_step(gen, rho, h)
        tr = np.trace(rho).real
        drift = max(drift, abs(tr - 1.0))
        if drift > DRIFT_TOLERANCE:
            raise StabilityViolation(f"trace drift {drift:.3e} at t = {step * h:.6g}")
        top = rho[n - 1, n - 1].real
        if top > LEAK_TOLERANCE:
            raise TruncationLeak(f"top level mass {top:.3e} at t = {step * h:.6g}")
        if step % record_every == 0 or step == n_steps:
            rec_t.append(step * h)
            rec_rho.append(rho.copy())

    states = np.array(rec_rho)
    rho_inv = np.diag(p).astype(complex)
    traces = np.trace(states, axis1=1, axis2=2).real
    eigs = np.linalg.eigvalsh(states)
    diffs = states - rho_inv
    trace_dist = 0.5 * np.abs(np.linalg.eigvalsh(diffs)).sum(axis=1)
    weighted = s[None, :, None] * diffs * s[None, None, :]
    l2 = np.linalg.norm(weighted, axis=(1, 2))
    return Trajectory(np.array(rec_t), states, traces, eigs[:, 0], trace_dist, l2,
                      float(drift), h)


def decay_rate_fit(traj: Trajectory, tail_fraction: float = 0.3,
                   noise_floor: float = 1e-11) -> float:
    """Asymptotic decay rate of the weighted distance.

    Least-squares slope of ``log l2_distance`` against time over the last
    ``tail_fraction`` of the samples that lie above
    ``noise_floor * l2_distances[0]``; returned as a positive rate.

    Raises
    ------
    InsufficientDecay
        If the final distance is not below 1e-3 of the initial one.
    """
    if not 0 < tail_fraction <= 1:
        raise ValidationError(f"tail_fraction must be in (0, 1], got {tail_fraction}")
    d = traj.l2_distances
    if not (d[0] > 0 and d[-1] < 1e-3 * d[0]):
        raise InsufficientDecay(
            f"distance only fell from {d[0]:.3e} to {d[-1]:.3e}; run longer")
    keep = d > noise_floor * d[0]
    t, d = traj.times[keep], d[keep]
    start = int(math.floor(len(t) * (1.0 - tail_fraction)))
    t, d = t[start:], d[start:]
    if len(t) < 3:
        raise InsufficientDecay("fewer than three samples in the fitting window")
    slope = np.polyfit(t, np.log(d), 1)[0]
    return float(-slope)


def initial_state(gen: TruncatedGenerator, spec: str) -> DensityMatrix:
    """Named initial states.

    ``ground``, ``invariant``, ``level:n``, ``thermal-perturbed`` (thermal
    populations tilted by ``1 + (-1)^n / 2`` and renormalized) and
    ``coherence:j,k`` (the thermal state plus a real coherence
    ``0.5 sqrt(pi_j pi_k)`` on ``(j, k)`` and ``(k, j)``).
    """
    n = gen.dim
    p = thermal_weights(gen)
    kind, _, arg = spec.partition(":")
    if kind == "ground":
        return DensityMatrix.pure(n, 0)
    if kind == "invariant":
        return DensityMatrix(np.diag(p))
    if kind == "level":
        level = _parse_ints(arg, 1, spec)[0]
        if not 0 <= level < n:
            raise ValidationError(f"level {level} outside 0..{n - 1}")
        return DensityMatrix.pure(n, level)
    if kind == "thermal-perturbed":
        w = p * (1.0 + 0.5 * (-1.0) ** np.arange(n))
        return DensityMatrix(np.diag(w / math.fsum(w)))
    if kind == "coherence":
        j, k = _parse_ints(arg, 2, spec)
        if j == k or not (0 <= j < n and 0 <= k < n):
            raise ValidationError(f"coherence needs distinct levels in 0..{n - 1}, got ({j}, {k})")
        rho = np.diag(p).astype(complex)
        c = 0.5 * math.sqrt(p[j] * p[k])
        rho[j, k] = rho[k, j] = c
        return DensityMatrix(rho)
    raise ValidationError(f"unknown initial state {spec!r}")


def _parse_ints(text: str, count: int, spec: str) -> list:
    parts = [s for s in text.replace("(", "").replace(")", "").split(",") if s.strip()]
    try:
        values = [int(s) for s in parts]
    except ValueError:
        values = []
    if len(values) != count:
        raise ValidationError(f"cannot parse {spec!r}")
    return values


def trajectory_to_csv(traj: Trajectory, entries: Sequence = ((0, 0), (0, 1), (1, 1)),
                      fmt: str = ".17g") -> str:
    """CSV text with ``t, trace, min_eig, trace_dist, l2_dist`` and selected entries.

    Each entry ``(j, k)`` contributes ``re_j_k`` and ``im_j_k`` columns.
    """
    dim = traj.states.shape[1]
    entries = [(j, k) for j, k in entries if j < dim and k < dim]
    head = ["t", "trace", "min_eig", "trace_dist", "l2_dist"]
    for j, k in entries:
        head += [f"re_{j}_{k}", f"im_{j}_{k}"]
    buf = io.StringIO()
    buf.write(",".join(head) + "\n")
    for i, t in enumerate(traj.times):
        row = [t, traj.traces[i], traj.min_eigs[i], traj.trace_distances[i], traj.l2_distances[i]]
        for j, k in entries:
            z = traj.states[i, j, k]
            row += [z.real, z.imag]
        buf.write(",".join(format(float(v), fmt) for v in row) + "\n")
    return buf.getvalue()
