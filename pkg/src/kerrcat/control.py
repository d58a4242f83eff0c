"""Krotov pulse optimization for vacuum-to-cat preparation and the minimum-duration scan.

The drive ``eps(t)(a + a^dag)`` is piecewise constant on a uniform grid. Each
iteration back-propagates the co-state ``chi(T) = <target|psi(T)> |target>``
under the old pulse and then sweeps forward, updating interval ``k`` with

    eps_new = clip(eps_old + S_k / lambda * Im <chi_{k+1}| M_k |psi_new_k>, +-bound)

where ``-i dt M_k`` is the exact derivative of the interval propagator with
respect to its field value (``M_k -> X = a + a^dag`` as ``dt -> 0``, which
recovers the continuous first-order Krotov update). Using the exact
derivative keeps the update first-order correct on coarse grids where the
fast diagonal phases rotate by more than a radian per interval.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .dynamics import Pulse, drive_offdiagonal, evolve_driven, phase_diagonal
from .errors import DomainError, StepSizeError
from .fock import FockVector, cat_state, fidelity, fock_state, recommended_dim

log = logging.getLogger(__name__)

CONVERGED_INFIDELITY = 1e-3
DEFAULT_BOUND = 30.0


@dataclass
class OptimizationRun:
    target: FockVector
    duration: float
    pulse: Pulse
    infidelity_trace: list = field(default_factory=list)
    converged: bool = False
    coeffs: tuple = ()
    lambda_a: float = math.nan
    seed: int | None = None

    @property
    def infidelity(self) -> float:
        return self.infidelity_trace[-1]

    @property
    def iterations(self) -> int:
        return len(self.infidelity_trace) - 1


def update_shape(nt: int, ramp: float = 0.05) -> np.ndarray:
    """Flat-top update shape at interval midpoints with ``sin^2`` ramps over ``ramp * T``."""
    s = (np.arange(nt) + 0.5) / nt
    out = np.ones(nt)
    if ramp > 0:
        up = s < ramp
        down = s > 1 - ramp
        out[up] = np.sin(0.5 * np.pi * s[up] / ramp) ** 2
        out[down] = np.sin(0.5 * np.pi * (1 - s[down]) / ramp) ** 2
    return out


def default_nt(duration: float, coeffs: Sequence, alpha: float = 2.0, per_unit: int = 100,
               minimum: int = 100) -> int:
    """Grid size: ``per_unit`` samples per unit time, at least ``minimum``."""
    return max(minimum, int(math.ceil(per_unit * duration)))


def random_guess(duration: float, nt: int, bound: float, rng: np.random.Generator,
                 n_components: int = 5, ramp: float = 0.05) -> Pulse:
    """Random Fourier guess: ``n_components`` harmonics of ``1/T``.

    Amplitudes are uniform in ``[-bound/3, bound/3]`` with uniform random
    phases, shaped by the same ``sin^2`` switch-on/off envelope as the update.
    """
    t = (np.arange(nt) + 0.5) / nt
    amps = rng.uniform(-bound / 3, bound / 3, n_components)
    phases = rng.uniform(0, 2 * np.pi, n_components)
    k = np.arange(1, n_components + 1)
    series = np.sum(amps[:, None] * np.cos(2 * np.pi * k[:, None] * t[None, :] + phases[:, None]), axis=0)
    samples = np.clip(series * update_shape(nt, ramp), -bound, bound)
    return Pulse(samples, duration / nt, bound)


class _Intervals:
    """Eigen-decompositions of the interval Hamiltonians for one pulse."""

    def __init__(self, diag: np.ndarray, dt: float):
        self.diag = diag
        self.dt = dt
        self.off = drive_offdiagonal(diag.size)
        self.w: list = []
        self.v: list = []

    def decompose(self, eps: float):
        if eps == 0.0:
            return self.diag.copy(), np.eye(self.diag.size)
        return eigh_tridiagonal(self.diag, eps * self.off)

    def drive_in_eigenbasis(self, v: np.ndarray) -> np.ndarray:
        xv = np.zeros_like(v)
        xv[:-1] += self.off[:, None] * v[1:]
        xv[1:] += self.off[:, None] * v[:-1]
        return v.T @ xv

    def derivative_kernel(self, w: np.ndarray, v: np.ndarray) -> np.ndarray:
        """``X~ * Phi`` with ``Phi_ij`` the divided difference of ``exp(-i w dt)``."""
        dt = self.dt
        mean = 0.5 * (w[:, None] + w[None, :])
        half_gap = 0.5 * (w[:, None] - w[None, :]) * dt
        phi = np.exp(-1j * mean * dt) * np.sinc(half_gap / np.pi)
        return self.drive_in_eigenbasis(v) * phi


def _forward(psi0, intervals: _Intervals, eps_old, chis, shape, lam, bound, first=False):
    """Sequential forward sweep; returns new field, eigen data and final state."""
    nt = eps_old.size
    dt = intervals.dt
    eps_new = np.empty(nt)
    ws, vs = [], []
    psi = psi0
    for k in range(nt):
        if first:
            new = eps_old[k]
        else:
            w, v = intervals.w[k], intervals.v[k]
            kern = intervals.derivative_kernel(w, v)
            c = v.T @ chis[k + 1]
            d = v.T @ psi
            g = np.imag(np.vdot(c, kern @ d))
            new = min(max(eps_old[k] + shape[k] / lam * g, -bound), bound)
        eps_new[k] = new
        w2, v2 = intervals.decompose(float(new))
        psi = v2 @ (np.exp(-1j * w2 * dt) * (v2.T @ psi))
        ws.append(w2)
        vs.append(v2)
    return eps_new, ws, vs, psi


def _backward(target: np.ndarray, psi_t: np.ndarray, intervals: _Intervals):
    nt = len(intervals.w)
    dt = intervals.dt
    chis = np.empty((nt + 1, target.size), complex)
    chis[nt] = np.vdot(target, psi_t) * target
    for k in range(nt - 1, -1, -1):
        w, v = intervals.w[k], intervals.v[k]
        chis[k] = v @ (np.exp(1j * w * dt) * (v.T @ chis[k + 1]))
    return chis


def krotov_optimize(coeffs: Sequence, target: FockVector, T: float | None = None,
                    guess: Pulse | None = None, lam: float | None = None, max_iters: int = 200,
                    tol: float = CONVERGED_INFIDELITY, ramp: float = 0.05, slack: float = 1e-12,
                    max_doublings: int = 30, lambda_shrink: float = 1.0,
                    initial: FockVector | None = None) -> OptimizationRun:
    """First-order Krotov optimization of the linear drive towards ``target``.

    Starts from the vacuum unless ``initial`` is given. ``guess`` fixes the
    grid and the amplitude bound; ``lam`` defaults to ``10 / bound``.
    An iteration that raises the infidelity by more than ``slack`` is
    discarded and retried with doubled ``lam``; after ``max_doublings``
    consecutive failures :class:`StepSizeError` is raised. ``lambda_shrink > 1``
    divides ``lam`` by that factor after every accepted iteration.
    """
    if guess is None:
        if T is None:
            raise DomainError("need a duration T or a guess pulse")
        guess = Pulse.zeros(T, default_nt(T, coeffs), DEFAULT_BOUND)
    if T is not None and abs(guess.duration - T) > 1e-9 * max(1.0, T):
        raise DomainError(f"guess duration {guess.duration} != T = {T}")
    bound = guess.bound
    if not math.isfinite(bound):
        raise DomainError("Krotov optimization needs a finite amplitude bound")
    lam = 10.0 / bound if lam is None else float(lam)
    if lam <= 0:
        raise DomainError("lambda must be positive")
    dim = target.dim
    psi0 = (fock_state(0, dim) if initial is None else initial).amps.astype(complex)
    tgt = target.amps.astype(complex)
    intervals = _Intervals(phase_diagonal(coeffs, dim), guess.dt)
    shape = update_shape(guess.nt, ramp)

    eps = np.array(guess.samples, dtype=float)
    eps, intervals.w, intervals.v, psi_t = _forward(psi0, intervals, eps, None, shape, lam, bound, first=True)
    trace = [1.0 - abs(np.vdot(tgt, psi_t)) ** 2]
    for it in range(max_iters):
        if trace[-1] <= tol:
            break
        chis = _backward(tgt, psi_t, intervals)
        for _ in range(max_doublings + 1):
            new_eps, ws, vs, new_psi = _forward(psi0, intervals, eps, chis, shape, lam, bound)
            j = 1.0 - abs(np.vdot(tgt, new_psi)) ** 2
            if j <= trace[-1] + slack:
                break
            log.debug("iteration %d: J rose %.3e -> %.3e, doubling lambda to %g", it, trace[-1], j, 2 * lam)
            lam *= 2.0
        else:
            raise StepSizeError(f"functional not monotone after {max_doublings} lambda doublings; "
                                "try a larger lambda")
        eps, intervals.w, intervals.v, psi_t = new_eps, ws, vs, new_psi
        trace.append(j)
        lam /= lambda_shrink
    pulse = Pulse(eps, guess.dt, bound)
    return OptimizationRun(target, guess.duration, pulse, trace, trace[-1] <= tol,
                           tuple(float(k) for k in coeffs), lam)


def final_infidelity(coeffs: Sequence, target: FockVector, pulse: Pulse) -> float:
    """``1 - F(evolve_driven(vacuum, coeffs, pulse), target)``, recomputed from scratch."""
    out = evolve_driven(fock_state(0, target.dim), coeffs, pulse)
    return 1.0 - fidelity(out, target)


@dataclass
class ScanCell:
    k3: float
    T: float
    best_infidelity: float
    seed_of_best: int
    converged: bool
    run: OptimizationRun | None = None


def cell_seed(seed: int, i_k3: int, i_t: int, i_guess: int) -> int:
    """Deterministic per-guess seed derived from the scan seed and cell indices."""
    ss = np.random.SeedSequence([seed, i_k3, i_t, i_guess])
    return int(ss.generate_state(1)[0])


def optimize_cell(coeffs: Sequence, target: FockVector, T: float, n_guesses: int, seed: int,
                  indices: tuple[int, int], bound: float = DEFAULT_BOUND, nt: int | None = None,
                  stop_on_success: bool = True, **krotov_kw) -> tuple[float, int, OptimizationRun]:
    """Best of ``n_guesses`` Krotov runs for one ``(K3, T)`` cell."""
    nt = default_nt(T, coeffs) if nt is None else nt
    best = None
    for g in range(n_guesses):
        s = cell_seed(seed, indices[0], indices[1], g)
        guess = random_guess(T, nt, bound, np.random.default_rng(s))
        run = krotov_optimize(coeffs, target, T, guess, **krotov_kw)
        run.seed = s
        if best is None or run.infidelity < best.infidelity:
            best = run
        if stop_on_success and best.converged:
            break
    return best.infidelity, best.seed, best


def scan_coeffs(k3: float, k2: float = 1.0, k1: float = 0.0) -> tuple[float, float, float]:
    return (k1, k2, k3)


def min_time_scan(k3_values: Sequence[float], T_grid: Sequence[float], n_guesses: int = 8,
                  alpha: float = 2.0, bound: float = DEFAULT_BOUND, seed: int = 0,
                  dim: int | None = None, nt_per_unit: int = 100, workers: int = 1,
                  keep_runs: bool = True, prune: bool = False, **krotov_kw) -> list[ScanCell]:
    """Best infidelity per ``(K3, T)``; coefficients are ``(K1, K2, K3) = (0, 1, K3)``.

    With ``prune`` each ``K3`` family is swept from the longest duration down
    and stops after its first unconverged cell, so only one failing cell per
    family pays for all ``n_guesses``; shorter durations are omitted from the
    result. Tasks (families when pruning, cells otherwise) run on ``workers``
    processes when > 1. Seeds depend only
    on the cell indices, so results do not depend on ``workers``.
    """
    dim = recommended_dim(alpha) if dim is None else dim
    target = cat_state(alpha, math.pi / 2, dim)
    grid = [float(t) for t in T_grid]
    jobs = []
    for i, k3 in enumerate(k3_values):
        cells = [(j, T, max(100, int(math.ceil(nt_per_unit * T)))) for j, T in enumerate(grid)]
        # pruned families are sequential; otherwise every cell is its own task
        groups = [sorted(cells, key=lambda c: -c[1])] if prune else [[c] for c in cells]
        for group in groups:
            jobs.append((scan_coeffs(float(k3)), float(k3), i, group, target, n_guesses, seed, bound,
                         keep_runs, prune, krotov_kw))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_family, jobs))
    else:
        results = [_run_family(job) for job in jobs]
    out = [c for fam in results for c in fam]
    # report in (K3, T) grid order regardless of sweep direction
    return sorted(out, key=lambda c: (list(k3_values).index(c.k3), grid.index(c.T)))


def _run_family(job) -> list[ScanCell]:
    coeffs, k3, i, cells, target, n_guesses, seed, bound, keep, prune, kw = job
    out = []
    for j, T, nt in cells:
        inf, s, run = optimize_cell(coeffs, target, T, n_guesses, seed, (i, j), bound=bound, nt=nt, **kw)
        out.append(ScanCell(k3, T, inf, s, run.converged, run if keep else None))
        log.info("K3=%g T=%g best infidelity %.3e", k3, T, inf)
        if prune and not run.converged:
            break
    return out


def t_min(cells: Sequence[ScanCell], tol: float = CONVERGED_INFIDELITY) -> dict[float, float]:
    """Shortest converged duration per ``K3`` (``inf`` when none converged)."""
    out: dict[float, float] = {}
    for c in cells:
        out.setdefault(c.k3, math.inf)
        if c.best_infidelity <= tol:
            out[c.k3] = min(out[c.k3], c.T)
    return out
