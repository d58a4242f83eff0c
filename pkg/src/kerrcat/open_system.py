"""Open-system dynamics with 1-photon loss and number dephasing (zero temperature).

Two independent routes to the same channel:

* :func:`lindblad_propagate` integrates the GKSL equation numerically,
  alternating the exact unitary of each pulse interval with RK4 steps of
  the dissipator (Strang splitting).
* :func:`analytic_decay` applies the closed-form solution of the purely
  dissipative equation (no Hamiltonian): a finite Kraus-like sum over
  ``a^k rho a^dag^k`` followed by element-wise damping.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .dynamics import Pulse, drive_offdiagonal, interval_propagator, phase_diagonal
from .errors import DomainError, IntegrationError
from .fock import DensityMatrix, FockVector, cumulants_from_moments, fidelity, number_moments

DEPHASING_OPERATORS = ("number", "aadag")


@dataclass(frozen=True)
class LindbladParams:
    """Loss rate ``kappa_1ph`` and dephasing rate ``kappa_phi``.

    Rates are in units of the Hamiltonian scale, or dimensionless (rate times
    time) where a function says so.
    """

    kappa_1ph: float = 0.0
    kappa_phi: float = 0.0

    def __post_init__(self):
        if not (self.kappa_1ph >= 0 and self.kappa_phi >= 0):
            raise DomainError(f"rates must be non-negative, got {self.kappa_1ph}, {self.kappa_phi}")

    @property
    def is_closed(self) -> bool:
        return self.kappa_1ph == 0 and self.kappa_phi == 0


@dataclass(frozen=True)
class SuperopFactors:
    """Time-dependent exponents of the factorized free-decay channel."""

    F0: float
    F3: float
    Fminus: float

    @classmethod
    def at(cls, params: LindbladParams, t: float) -> "SuperopFactors":
        return cls(-0.5 * params.kappa_phi * t, -0.5 * params.kappa_1ph * t,
                   -math.expm1(-params.kappa_1ph * t))


def _as_matrix(rho) -> np.ndarray:
    if isinstance(rho, DensityMatrix):
        return np.array(rho.matrix, dtype=complex)
    if isinstance(rho, FockVector):
        return np.outer(rho.amps, rho.amps.conj())
    m = np.asarray(rho, dtype=complex)
    if m.ndim == 1:
        return np.outer(m, m.conj())
    return m


def analytic_decay(rho, params: LindbladParams, t: float) -> DensityMatrix:
    """Exact free-decay channel (no Hamiltonian) after time ``t``.

    ``rho -> sum_k F^k / k! a^k rho a^dag^k`` with ``F = 1 - e^{-kappa_1ph t}``,
    then ``rho_nm *= exp(-kappa_1ph (n+m) t / 2 - kappa_phi (n-m)^2 t / 2)``.
    The sum terminates because ``a`` is nilpotent on the truncated space.
    """
    if t < 0:
        raise DomainError("decay time must be non-negative")
    m = _as_matrix(rho)
    dim = m.shape[0]
    fac = SuperopFactors.at(params, t)
    if fac.Fminus > 0:
        a = np.diag(np.sqrt(np.arange(1, dim, dtype=float)), 1)
        term = m
        out = m.copy()
        for k in range(1, dim):
            term = (fac.Fminus / k) * (a @ term @ a.T)
            if not np.any(term):
                break
            out += term
        m = out
    n = np.arange(dim, dtype=float)
    damp = np.exp(fac.F3 * (n[:, None] + n[None, :]) + fac.F0 * (n[:, None] - n[None, :]) ** 2)
    m = m * damp
    return DensityMatrix(0.5 * (m + m.conj().T), validate=False)


class _Dissipator:
    """Loss ``sqrt(k1) a`` plus diagonal dephasing ``sqrt(kp) (N + shift)``, applied element-wise."""

    def __init__(self, params: LindbladParams, dim: int, dephasing: str):
        if dephasing not in DEPHASING_OPERATORS:
            raise DomainError(f"dephasing operator must be one of {DEPHASING_OPERATORS}")
        k1, kp = params.kappa_1ph, params.kappa_phi
        n = np.arange(dim, dtype=float)
        d = n + (1.0 if dephasing == "aadag" else 0.0)
        self.active = k1 > 0 or kp > 0
        self.k1 = k1
        self.sqrt_n = np.sqrt(n[1:])
        self.jump_phi = kp * np.outer(d, d)
        self.anti = k1 * n + kp * d ** 2
        self.decay = -0.5 * (self.anti[:, None] + self.anti[None, :]) + self.jump_phi

    def __call__(self, rho):
        out = self.decay * rho
        if self.k1:
            out[:-1, :-1] += self.k1 * (self.sqrt_n[:, None] * self.sqrt_n[None, :]) * rho[1:, 1:]
        return out

    def rate(self) -> float:
        return float(self.anti.max()) if self.active else 0.0

    def rk4(self, rho, h: float, n: int):
        for _ in range(n):
            k1 = self(rho)
            k2 = self(rho + 0.5 * h * k1)
            k3 = self(rho + 0.5 * h * k2)
            k4 = self(rho + h * k3)
            rho = rho + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        return 0.5 * (rho + rho.conj().T)


_YOSHIDA_1 = 1.0 / (2.0 - 2.0 ** (1.0 / 3.0))
_YOSHIDA_0 = 1.0 - 2.0 * _YOSHIDA_1


def _propagate_once(rho, diag, segments, diss: _Dissipator, sub: int, rk: int, off, fourth=True):
    """Fourth-order triple-jump composition of Strang steps ``D(h/2) U(h) D(h/2)``.

    The middle Strang step runs backwards in time; that is harmless for the
    dissipator at the small rate-times-step products used here.
    """
    fracs = (_YOSHIDA_1, _YOSHIDA_0, _YOSHIDA_1) if diss.active and fourth else (1.0,)
    for eps, dur in segments:
        h = dur / sub
        us = {f: interval_propagator(diag, eps, f * h, off) for f in set(fracs)}
        pieces = [(f, us[f]) for f in fracs]
        for _ in range(sub):
            for f, u in pieces:
                if diss.active:
                    rho = diss.rk4(rho, 0.5 * f * h / rk, rk)
                rho = u @ rho @ u.conj().T
                if diss.active:
                    rho = diss.rk4(rho, 0.5 * f * h / rk, rk)
        rho = 0.5 * (rho + rho.conj().T)
    return rho


def lindblad_propagate(rho, coeffs: Sequence, params: LindbladParams, t: float | None = None,
                       pulse: Pulse | None = None, dephasing: str = "number", tol: float = 1e-8,
                       max_refinements: int = 8, rk_scale: float = 0.1) -> DensityMatrix:
    """Integrate the GKSL equation for ``H = p(N) + eps(t)(a + a^dag)``.

    Jumps are ``sqrt(kappa_1ph) a`` and ``sqrt(kappa_phi) N`` (or
    ``sqrt(kappa_phi) a a^dag`` with ``dephasing="aadag"``). Without ``pulse``
    the Hamiltonian is ``p(N)`` held for time ``t``. The splitting step is
    halved until two successive results of the fourth-order
    splitting agree to ``tol`` in trace distance.
    RK4 sub-steps keep ``h * ||sum L^dag L|| <= rk_scale``.
    """
    m = _as_matrix(rho)
    dim = m.shape[0]
    if pulse is None:
        if t is None or t < 0:
            raise DomainError("need a non-negative duration t when no pulse is given")
        segments = [(0.0, float(t))] if t > 0 else []
    else:
        if t is not None and abs(t - pulse.duration) > 1e-9 * max(1.0, t):
            raise DomainError(f"t = {t} differs from pulse duration {pulse.duration}")
        segments = [(float(e), pulse.dt) for e in pulse.samples]
    DensityMatrix(m)  # validates the input
    diag = phase_diagonal(coeffs, dim) if len(coeffs) else np.zeros(dim)
    off = drive_offdiagonal(dim)
    diss = _Dissipator(params, dim, dephasing)
    rate = diss.rate()
    has_drive = any(e != 0 for e, _ in segments)
    # splitting is exact when the Hamiltonian commutes with the dissipator
    exact_split = rate == 0 or (not has_drive and (params.kappa_1ph == 0 or not np.any(diag)))

    def run(sub):
        longest = max((d for _, d in segments), default=0.0)
        frac = 1.0 if exact_split else _YOSHIDA_1
        rk = max(1, int(math.ceil(rate * 0.5 * frac * longest / sub / rk_scale)))
        return _propagate_once(m, diag, segments, diss, sub, rk, off, fourth=not exact_split)

    sub = 1
    out = run(sub)
    if not exact_split:
        for _ in range(max_refinements):
            sub *= 2
            new = run(sub)
            if 0.5 * np.abs(np.linalg.eigvalsh(new - out)).sum() < tol:
                out = new
                break
            out = new
        else:
            raise IntegrationError(f"GKSL splitting did not converge to {tol:g}")
    tr = np.trace(out).real
    if abs(tr - 1.0) > 1e-10:
        raise IntegrationError(f"trace drifted to {tr:.12f}")
    w = np.linalg.eigvalsh(out)
    if w.min() < -1e-8:
        raise IntegrationError(f"negative eigenvalue {w.min():.3e}")
    return DensityMatrix(out, validate=False)


def overlap(target: FockVector, rho) -> float:
    """``<target| rho |target>``."""
    psi = target.amps
    return float(np.real(np.vdot(psi, _as_matrix(rho) @ psi)))


def overlap_expansion(target: FockVector, kappa_1ph: float, kappa_phi: float,
                      order: str = "leading") -> float:
    """Small-rate expansion of the free-decay overlap.

    ``kappa_1ph`` and ``kappa_phi`` are dimensionless (rate times time).
    ``order="leading"`` keeps the linear terms and the mixed term only,
    ``1 - k1 K1 - kp K2 + k1 kp (K3 + 2 K1 K2) / 2`` with ``Kn`` the number
    cumulants. ``order="second"`` adds the pure second-order terms in each rate.
    """
    mom = number_moments(target, 4)
    k1, k2, k3, _ = cumulants_from_moments(mom)
    v = 1.0 - kappa_1ph * k1 - kappa_phi * k2 + 0.5 * kappa_1ph * kappa_phi * (k3 + 2 * k1 * k2)
    if order == "leading":
        return float(v)
    if order != "second":
        raise DomainError(f"unknown order {order!r}")
    n1, n2, n3, n4 = mom
    psi = target.amps
    a2 = np.sum(psi[:-2].conj() * np.sqrt(np.arange(1, psi.size - 1) * np.arange(2, psi.size)) * psi[2:])
    v += 0.25 * kappa_1ph ** 2 * (n2 + n1 ** 2 + 2 * abs(a2) ** 2)
    v += 0.25 * kappa_phi ** 2 * (n4 + 3 * n2 ** 2 - 4 * n3 * n1)
    return float(v)


@dataclass
class ReevalRow:
    k3: float
    T: float
    infidelity_closed: float
    infidelity_dissipative: float


def reevaluate_pulse(coeffs: Sequence, target: FockVector, pulse: Pulse, params: LindbladParams,
                     **kwargs) -> float:
    """Uhlmann infidelity of the dissipative evolution of the vacuum under ``pulse``."""
    dim = target.dim
    rho0 = np.zeros((dim, dim), complex)
    rho0[0, 0] = 1.0
    rho = lindblad_propagate(rho0, coeffs, params, pulse=pulse, **kwargs)
    return 1.0 - fidelity(rho, target)


def dissipative_reevaluate(runs, params: LindbladParams, **kwargs) -> list[ReevalRow]:
    """Re-run each optimized pulse under dissipation.

    ``runs`` holds :class:`~kerrcat.control.OptimizationRun` objects (or
    scan cells carrying one in ``.run``).
    """
    rows = []
    for item in runs:
        run = getattr(item, "run", None) or item
        coeffs = run.coeffs
        k3 = float(coeffs[2]) if len(coeffs) > 2 else 0.0
        closed = reevaluate_pulse(coeffs, run.target, run.pulse, LindbladParams(), **kwargs)
        diss = reevaluate_pulse(coeffs, run.target, run.pulse, params, **kwargs)
        rows.append(ReevalRow(k3, run.duration, closed, diss))
    return rows
