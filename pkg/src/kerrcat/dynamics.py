"""Closed-system propagation under ``H = sum_j K_j N^j + eps(t) (a + a^dag)``.

Pulses are piecewise constant: sample ``k`` holds on ``[k dt, (k+1) dt)``.
The default propagator diagonalizes the real symmetric tridiagonal
Hamiltonian of each interval, so it is exact for the piecewise-constant
field. ``method="split"`` is a Strang splitting (exact diagonal phase, exact
drive exponential) with step halving until self-converged.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .design import phase_polynomial
from .errors import DomainError, IntegrationError
from .fock import FockVector, fidelity


@dataclass(frozen=True)
class Pulse:
    """Uniformly sampled drive ``eps(t_k)`` with amplitude cap ``bound``."""

    samples: np.ndarray
    dt: float
    bound: float = math.inf

    def __post_init__(self):
        s = np.array(self.samples, dtype=float)
        if s.ndim != 1:
            raise DomainError("pulse samples must be one-dimensional")
        if self.dt <= 0:
            raise DomainError("pulse dt must be positive")
        if np.any(np.abs(s) > self.bound * (1 + 1e-15)):
            raise DomainError("pulse exceeds its amplitude bound")
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)

    @classmethod
    def constant(cls, value: float, duration: float, nt: int, bound: float = math.inf) -> "Pulse":
        return cls(np.full(nt, float(value)), duration / nt, bound)

    @classmethod
    def zeros(cls, duration: float, nt: int, bound: float = math.inf) -> "Pulse":
        return cls(np.zeros(nt), duration / nt, bound)

    @property
    def nt(self) -> int:
        return self.samples.size

    @property
    def duration(self) -> float:
        return self.nt * self.dt

    def times(self) -> np.ndarray:
        """Interval midpoints."""
        return (np.arange(self.nt) + 0.5) * self.dt

    def refine(self, factor: int = 2) -> "Pulse":
        """Same piecewise-constant field on a grid ``factor`` times finer."""
        return Pulse(np.repeat(self.samples, factor), self.dt / factor, self.bound)

    def with_samples(self, samples) -> "Pulse":
        return Pulse(samples, self.dt, self.bound)


def phase_diagonal(coeffs: Sequence, dim: int) -> np.ndarray:
    """Diagonal of ``H_nl`` in the Fock basis, ``p(n)`` for ``n = 0 .. dim-1``."""
    return phase_polynomial(coeffs, np.arange(dim))


def evolve_diagonal(state: FockVector, coeffs: Sequence, t: float) -> FockVector:
    """Exact ``e^{-i p(N) t}`` applied to ``state``.

    Large ``p(n) t`` are reduced modulo ``2 pi`` term by term in extended
    precision so high orders do not lose the phase.
    """
    ph = _reduced_phase(coeffs, state.dim, t)
    return FockVector(state.amps * np.exp(-1j * ph), tail=state.tail, truncated=state.truncated)


def _reduced_phase(coeffs, dim: int, t: float) -> np.ndarray:
    n = np.arange(dim, dtype=np.longdouble)
    tt = np.longdouble(t)
    two_pi = 2 * np.pi
    acc = np.zeros(dim, dtype=np.longdouble)
    for j, k in enumerate(coeffs, start=1):
        acc += np.fmod(np.longdouble(float(k)) * n ** j * tt, two_pi)
    return np.mod(acc, two_pi).astype(float)


def drive_offdiagonal(dim: int) -> np.ndarray:
    """Off-diagonal of ``a + a^dag``: ``sqrt(n)`` for ``n = 1 .. dim-1``."""
    return np.sqrt(np.arange(1, dim, dtype=float))


def interval_propagator(diag: np.ndarray, eps: float, dt: float,
                        offdiag: np.ndarray | None = None) -> np.ndarray:
    """``exp(-i (diag + eps X) dt)`` for the tridiagonal ``X = a + a^dag``."""
    dim = diag.size
    off = drive_offdiagonal(dim) if offdiag is None else offdiag
    if eps == 0.0:
        return np.diag(np.exp(-1j * diag * dt))
    w, v = eigh_tridiagonal(diag, eps * off)
    return (v * np.exp(-1j * w * dt)) @ v.T


@dataclass
class Propagation:
    """Forward propagation record: states at every grid point and the interval propagators."""

    states: np.ndarray
    propagators: list = field(default_factory=list)

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]


def propagate_exact(psi0: np.ndarray, diag: np.ndarray, pulse: Pulse,
                    keep: bool = False) -> Propagation:
    off = drive_offdiagonal(diag.size)
    states = np.empty((pulse.nt + 1, diag.size), complex)
    states[0] = psi0
    props = []
    psi = psi0
    for k, eps in enumerate(pulse.samples):
        u = interval_propagator(diag, float(eps), pulse.dt, off)
        psi = u @ psi
        states[k + 1] = psi
        if keep:
            props.append(u)
    return Propagation(states, props)


def _split_propagate(psi: np.ndarray, diag: np.ndarray, pulse: Pulse, sub: int) -> np.ndarray:
    """Strang splitting with ``sub`` substeps per interval.

    The ``sub`` identical substeps of an interval are combined by repeated
    squaring of the one-substep matrix, which is algebraically the same map.
    """
    dim = diag.size
    off = drive_offdiagonal(dim)
    wx, vx = eigh_tridiagonal(np.zeros(dim), off)
    h = pulse.dt / sub
    half = np.exp(-0.5j * diag * h)
    for eps in pulse.samples:
        kick = (vx * np.exp(-1j * eps * wx * h)) @ vx.T
        step = half[:, None] * kick * half[None, :]
        psi = np.linalg.matrix_power(step, sub) @ psi
        psi = psi / np.linalg.norm(psi)  # roundoff from the repeated squaring
    return psi


def _initial_substeps(diag: np.ndarray, pulse: Pulse, populated: int) -> int:
    # |eps| h <= 0.05 and level spacing of the populated levels times h <= 0.05;
    # the diagonal phase itself is exact and does not limit h
    spacing = np.abs(np.diff(diag[: populated + 1]))
    scale = max(float(np.max(np.abs(pulse.samples))) if pulse.nt else 0.0,
                float(spacing.max()) if spacing.size else 0.0)
    return max(1, int(math.ceil(scale * pulse.dt / 0.05)))


def evolve_driven(state: FockVector, coeffs: Sequence, pulse: Pulse, method: str = "exact",
                  tol: float = 1e-10, max_halvings: int = 12) -> FockVector:
    """Propagate ``i d psi/dt = [H_nl + eps(t)(a + a^dag)] psi`` over the pulse.

    ``method="exact"`` uses per-interval diagonalization. ``method="split"``
    halves the Strang step until the final-state fidelity between successive
    refinements changes by less than ``tol``; raises
    :class:`IntegrationError` if that does not happen within
    ``max_halvings``.
    """
    diag = phase_diagonal(coeffs, state.dim)
    psi0 = state.amps.astype(complex)
    if method == "exact":
        psi = propagate_exact(psi0, diag, pulse).final
    elif method == "split":
        n_pop = int(np.max(np.nonzero(np.abs(psi0) ** 2 > 1e-12)[0], initial=0)) + 4
        sub = _initial_substeps(diag, pulse, min(n_pop, state.dim - 1))
        prev = _split_propagate(psi0, diag, pulse, sub)
        for _ in range(max_halvings):
            sub *= 2
            psi = _split_propagate(psi0, diag, pulse, sub)
            if abs(fidelity(psi, prev) - 1.0) < tol and np.linalg.norm(psi - prev) < math.sqrt(tol):
                break
            prev = psi
        else:
            raise IntegrationError(f"split-step did not converge to {tol:g} after {max_halvings} halvings")
    else:
        raise DomainError(f"unknown method {method!r}")
    norm = np.linalg.norm(psi)
    if abs(norm - 1.0) > 1e-10:
        raise IntegrationError(f"norm drifted to {norm:.12f}")
    return FockVector.from_amplitudes(psi, fail_tol=1.0)


def commutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a @ b - b @ a


def nested_drive_commutator(k2: float, dim: int) -> np.ndarray:
    """``[[[H0, H1], H1], H1]`` with ``H0 = K2 a^dag^2 a^2`` and ``H1 = a + a^dag``."""
    a = np.diag(np.sqrt(np.arange(1, dim, dtype=float)), 1)
    ad = a.T
    h0 = k2 * ad @ ad @ a @ a
    h1 = a + ad
    return commutator(commutator(commutator(h0, h1), h1), h1)
