"""Rydberg-ensemble realization of the multi-order nonlinearity.

``N`` three-level atoms (g, e, r); the e-r transition is driven with Rabi
frequency ``omega_er`` at detuning ``delta`` and Rydberg pairs interact with
constant ``v``. Eliminating ``r`` leaves ``H_eff = sum_n K_n N_e^n`` with

    K_n = sum_{m=0}^{N-1} s(m+1, n) f(m),

so that on ``N_e = q`` the energy is ``sum_m f(m) (q)_{m+1}`` with the falling
factorial ``(q)_{m+1}``. All frequencies are angular; any consistent unit works.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .design import stirling_first
from .errors import DomainError, ResonanceError
from .fock import DenseOperator

GUARD_BAND = 0.02
MAX_ATOMS = 8
MAX_PRODUCT_ATOMS = 6


@dataclass(frozen=True)
class RydbergParams:
    omega_er: float
    delta: float
    v: float
    n_atoms: int = 2
    omega_eg: float | None = None
    omega_eg_split: float | None = None

    def __post_init__(self):
        if int(self.n_atoms) != self.n_atoms or self.n_atoms < 1:
            raise DomainError(f"n_atoms must be a positive integer, got {self.n_atoms}")
        object.__setattr__(self, "n_atoms", int(self.n_atoms))

    @property
    def adiabaticity(self) -> float:
        """``|delta| / omega_er``; elimination needs this large."""
        return abs(self.delta) / abs(self.omega_er) if self.omega_er else math.inf


def _guard(p: RydbergParams, ks, band: float):
    scale = max(abs(p.delta), abs(p.v))
    for k in ks:
        if abs(p.delta - 0.5 * k * p.v) < band * scale or (k == 0 and p.delta == 0):
            raise ResonanceError(f"delta = {p.delta:g} within guard band of the resonance "
                                 f"delta = {k}*v/2 = {0.5 * k * p.v:g}")


def f_of_m(m: int, p: RydbergParams, guard: float = GUARD_BAND) -> float:
    """Energy coefficient of the ``m``-Rydberg-pair correction.

    ``f(0) = omega^2 / (4 delta)``; for ``m >= 1``::

        f(m) = V omega^{2+2m} / ((m-1)! 2^{3+2m} delta (delta - m V/2) prod_{k=1}^{m} (delta - (k-1) V/2)^2)

    Raises :class:`ResonanceError` when ``delta`` lies within
    ``guard * max(|delta|, |v|)`` of any ``k v / 2`` entering the denominator.
    """
    if m < 0:
        raise DomainError("m must be non-negative")
    om, d, v = p.omega_er, p.delta, p.v
    if m == 0:
        _guard(p, [0], guard)
        return om ** 2 / (4 * d)
    _guard(p, range(m + 1), guard)
    prod = 1.0
    for k in range(1, m + 1):
        prod *= (d - 0.5 * (k - 1) * v) ** 2
    return v * om ** (2 + 2 * m) / (math.factorial(m - 1) * 2 ** (3 + 2 * m) * d * (d - 0.5 * m * v) * prod)


def effective_coefficients(p: RydbergParams, max_order: int | None = None,
                           guard: float = GUARD_BAND) -> np.ndarray:
    """``K_1 .. K_max_order`` (default ``K_1 .. K_N``)."""
    n = p.n_atoms
    max_order = n if max_order is None else max_order
    f = [f_of_m(m, p, guard) for m in range(n)]
    return np.array([sum(stirling_first(m + 1, j) * f[m] for m in range(n) if j <= m + 1)
                     for j in range(1, max_order + 1)])


def falling_factorial(q: int, k: int) -> int:
    out = 1
    for i in range(k):
        out *= q - i
    return out


def effective_energy(p: RydbergParams, n_excited: int, guard: float = GUARD_BAND) -> float:
    """``sum_m f(m) (n_excited)_{m+1}``: the effective energy with ``n_excited`` atoms in ``e``."""
    return sum(f_of_m(m, p, guard) * falling_factorial(n_excited, m + 1) for m in range(p.n_atoms))


def raw_hamiltonian(p: RydbergParams, sector: str = "symmetric", n_active: int | None = None) -> DenseOperator:
    """Raw ensemble Hamiltonian before elimination.

    ``sector="symmetric"``: the permutation-symmetric subspace of ``n_active``
    (default ``N``) atoms sharing one excitation each between ``e`` and ``r``,
    basis ``n_r = 0 .. n_active``. ``sector="product"``: the full ``3^N``
    product space with per-atom order ``(g, e, r)``; limited to
    ``N <= 6``.
    """
    om, d, v, n = p.omega_er, p.delta, p.v, p.n_atoms
    if n > MAX_ATOMS:
        raise DomainError(f"exact diagonalization limited to N <= {MAX_ATOMS}")
    if sector == "symmetric":
        q = n if n_active is None else n_active
        if not 0 <= q <= n:
            raise DomainError("n_active must lie in 0..N")
        nr = np.arange(q + 1, dtype=float)
        h = np.diag(-d * nr + 0.5 * v * nr * (nr - 1))
        off = 0.5 * om * np.sqrt((nr[:-1] + 1) * (q - nr[:-1]))
        h += np.diag(off, 1) + np.diag(off, -1)
        return DenseOperator(h)
    if sector != "product":
        raise DomainError(f"unknown sector {sector!r}")
    if n > MAX_PRODUCT_ATOMS:
        raise DomainError(f"product space limited to N <= {MAX_PRODUCT_ATOMS}")
    states = list(itertools.product(range(3), repeat=n))
    index = {s: i for i, s in enumerate(states)}
    h = np.zeros((len(states), len(states)))
    for s, i in index.items():
        k = s.count(2)
        h[i, i] = -d * k + 0.5 * v * k * (k - 1)
        for atom, level in enumerate(s):
            if level == 1:
                t = s[:atom] + (2,) + s[atom + 1:]
                j = index[t]
                h[i, j] = h[j, i] = 0.5 * om
    return DenseOperator(h)


@dataclass(frozen=True)
class Validation:
    epsilon: float
    e_full: float
    e_eff: float
    overlap: float
    flagged: bool
    adiabaticity: float


def validate_effective(p: RydbergParams, guard: float = GUARD_BAND, min_overlap: float = 0.9) -> Validation:
    """Per-atom energy error of the effective model for all ``N`` atoms excited.

    The exact level is the symmetric-sector eigenstate with the largest
    weight on ``n_r = 0``; ``flagged`` is set when that weight is below
    ``min_overlap`` (state matching is ambiguous near avoided crossings).
    """
    h = raw_hamiltonian(p).matrix
    w, vecs = np.linalg.eigh(h)
    weights = np.abs(vecs[0]) ** 2
    k = int(np.argmax(weights))
    e_eff = effective_energy(p, p.n_atoms, guard)
    eps = abs(w[k] - e_eff) / p.n_atoms
    return Validation(float(eps), float(w[k]), float(e_eff), float(weights[k]),
                      bool(weights[k] < min_overlap), p.adiabaticity)


def dicke_drive_operators(n_atoms: int) -> tuple[np.ndarray, np.ndarray]:
    """Collective raising and lowering matrices on ``|n>``, ``n = 0 .. N`` excited atoms.

    ``J+ |n> = sqrt((n+1)(N-n)) |n+1>`` and ``J- = (J+)^dag``.
    """
    if int(n_atoms) != n_atoms or n_atoms < 1:
        raise DomainError("n_atoms must be a positive integer")
    n = np.arange(n_atoms, dtype=float)
    up = np.diag(np.sqrt((n + 1) * (n_atoms - n)), -1)
    return up, up.T.copy()


def excitation_number(n_atoms: int) -> np.ndarray:
    return np.diag(np.arange(n_atoms + 1, dtype=float))


def driven_ensemble_hamiltonian(p: RydbergParams, omega_eg: float | None = None,
                                guard: float = GUARD_BAND) -> np.ndarray:
    """``sum_q E_eff(q) |q><q| + omega_eg/2 (J+ + J-)`` in the rotating frame of the g-e drive.

    The drive is taken resonant with ``K_1 + omega_eg_split`` so the linear term drops out.
    """
    om = p.omega_eg if omega_eg is None else omega_eg
    if om is None:
        raise DomainError("no g-e drive strength given")
    k1 = effective_coefficients(p, 1, guard)[0]
    diag = np.array([effective_energy(p, q, guard) - k1 * q for q in range(p.n_atoms + 1)])
    up, down = dicke_drive_operators(p.n_atoms)
    return np.diag(diag) + 0.5 * om * (up + down)


@dataclass
class CoefficientMap:
    delta: np.ndarray
    v: np.ndarray
    coeffs: np.ndarray  # shape (n_v, n_delta, max_order); NaN inside guard bands
    resonant: np.ndarray  # shape (n_v, n_delta)

    def order(self, n: int) -> np.ndarray:
        return self.coeffs[..., n - 1]


def coefficient_map(omega_er: float, delta_grid, v_grid, n_atoms: int = 4, max_order: int = 4,
                    guard: float = GUARD_BAND) -> CoefficientMap:
    """``K_n`` over a ``(v, delta)`` grid."""
    dg = np.asarray(delta_grid, float)
    vg = np.asarray(v_grid, float)
    out = np.full((vg.size, dg.size, max_order), np.nan)
    res = np.zeros((vg.size, dg.size), bool)
    for i, v in enumerate(vg):
        for j, d in enumerate(dg):
            try:
                out[i, j] = effective_coefficients(RydbergParams(omega_er, d, v, n_atoms), max_order, guard)
            except ResonanceError:
                res[i, j] = True
    return CoefficientMap(dg, vg, out, res)


def detect_ray(omega_er: float, v_grid, m: int, delta_range: tuple[float, float], n_atoms: int = 4,
               order: int = 2, offsets=(1e-2, 1e-3, 1e-4), growth: float = 10.0,
               min_fraction: float = 0.8) -> bool:
    """Does ``|K_order|`` diverge along the line ``delta = m v / 2``?

    For every ``v`` whose crossing ``m v / 2`` lies inside ``delta_range``
    (and not near ``delta = 0``), ``K_order`` is evaluated with no guard band
    at relative distances ``offsets`` from the line. The column counts as a
    hit when ``|K|`` grows by at least ``growth`` from the farthest to the
    nearest offset.
    """
    lo, hi = delta_range
    hits = total = 0
    for v in np.asarray(v_grid, float):
        d0 = 0.5 * m * v
        if not lo <= d0 <= hi or abs(d0) < 0.05 * (hi - lo):
            continue
        total += 1
        mags = [abs(effective_coefficients(RydbergParams(omega_er, d0 + e * abs(v), v, n_atoms),
                                           order, guard=0.0)[order - 1]) for e in offsets]
        if mags[-1] >= growth * mags[0]:
            hits += 1
    return total > 0 and hits / total >= min_fraction
