"""Squeezed multi-component cat states: closed-form number moments and optimal squeezing.

The state is ``S(r, phi) exp(+- i pi/c N^2) |alpha>`` with real ``alpha`` and
``S(r, phi) = exp[r/2 (e^{-i phi} a^2 - e^{i phi} a^dag^2)]``. Its first two
number moments have closed forms in terms of three interference factors
``A``, ``B``, ``C``; they drive a cheap search for the squeezing that slows
the initial decay under loss and dephasing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import minimize
from scipy.sparse import csr_matrix
from scipy.sparse.linalg import expm_multiply

from .errors import DomainError
from .fock import FockVector, coherent_state, recommended_dim, squeeze_generator
from .open_system import LindbladParams, analytic_decay, overlap


@dataclass(frozen=True)
class SqueezeParams:
    r: float = 0.0
    phi: float = 0.0
    c: int = 2

    def __post_init__(self):
        if not self.r >= 0:
            raise DomainError(f"squeeze magnitude must be >= 0, got {self.r}")
        if int(self.c) != self.c or self.c < 2:
            raise DomainError(f"component count must be an integer >= 2, got {self.c}")
        object.__setattr__(self, "c", int(self.c))
        object.__setattr__(self, "phi", float(self.phi) % (2 * math.pi))


@dataclass(frozen=True)
class SqueezedMoments:
    mean: float
    second: float
    variance: float


def _check_sign(sign: int) -> int:
    if sign not in (1, -1):
        raise DomainError("revival sign must be +1 or -1")
    return sign


def sq_cat_state(alpha: float, sq: SqueezeParams, dim: int | None = None, sign: int = 1,
                 **kwargs) -> FockVector:
    """``S(r, phi) exp(sign * i pi/c N^2) |alpha>`` in a ``dim``-level space."""
    if np.iscomplexobj(alpha) and np.imag(alpha) != 0:
        raise DomainError("alpha must be real")
    alpha = float(np.real(alpha))
    _check_sign(sign)
    dim = recommended_dim(alpha, sq.r) if dim is None else dim
    coh = coherent_state(alpha, dim)
    n = np.arange(dim, dtype=float)
    phase = np.exp(1j * sign * np.mod(math.pi / sq.c * n ** 2, 2 * math.pi))
    amps = coh.amps * phase
    discarded = coh.tail if coh.truncated else 0.0
    if sq.r > 0:
        # squeeze in a doubled space so the weight pushed past dim is measured, not lost
        big = np.zeros(2 * dim, complex)
        big[:dim] = amps
        big = expm_multiply(csr_matrix(squeeze_generator(sq.r, sq.phi, 2 * dim)), big)
        amps = big[:dim]
        discarded += float(np.sum(np.abs(big[dim:]) ** 2))
    return FockVector.from_amplitudes(amps, discarded=discarded, **kwargs)


def interference_factors(alpha: float, phi: float, c: int = 2, sign: int = 1,
                         legacy_b: bool = False) -> tuple[float, float, float]:
    """The ``A``, ``B``, ``C`` factors of the closed-form moments.

    With ``w = e^{sign * i 4 pi / c}`` and ``a2 = alpha^2``::

        A = 2 e^{-a2} Re[e^{-i phi} w e^{a2 w}]
        B = 2 e^{-a2} Re[e^{-i phi} w e^{a2 w} (2 + 2 a2 w)]
        C = 2 (a2 + 1)^2 + 2 a2^2 e^{-a2} Re[e^{-2 i phi} w^4 e^{a2 w^2}]

    ``B`` follows from ``<a^2> = a2 w e^{a2 (w-1)}`` and
    ``<a^dag a^3> = a2^2 w^2 e^{a2 (w-1)}`` in the unsqueezed cat.
    ``legacy_b=True`` uses the factor ``a2 + 2 + a2 w`` instead, which agrees
    only when ``w = 1`` (two-component cats) and is kept for comparison.
    """
    _check_sign(sign)
    a2 = float(alpha) ** 2
    w = np.exp(sign * 4j * math.pi / c)
    base = np.exp(-1j * phi) * w * np.exp(a2 * (w - 1))
    A = 2 * base.real
    B = 2 * (base * ((a2 + 2 + a2 * w) if legacy_b else (2 + 2 * a2 * w))).real
    C = 2 * (a2 + 1) ** 2 + 2 * a2 ** 2 * (np.exp(-2j * phi) * w ** 4 * np.exp(a2 * (w ** 2 - 1))).real
    return float(A), float(B), float(C)


def sq_cat_moments(alpha: float, sq: SqueezeParams, sign: int = 1) -> SqueezedMoments:
    """Closed-form ``<N>``, ``<N^2>`` and the number variance of the squeezed cat."""
    a2 = float(alpha) ** 2
    r = sq.r
    A, B, C = interference_factors(alpha, sq.phi, sq.c, sign)
    sh, ch2, sh2 = math.sinh(r), math.cosh(2 * r), math.sinh(2 * r)
    mean = sh ** 2 + a2 * ch2 - 0.5 * sh2 * a2 * A
    second = (a2 * (1 + a2) * ch2 ** 2 + sh ** 4
              + 2 * a2 * sh ** 2 * (ch2 - 0.5 * sh2 * A)
              - 0.25 * math.sinh(4 * r) * a2 * B + 0.25 * sh2 ** 2 * C)
    variance = (a2 * ch2 ** 2 - 0.5 * ch2 * sh2 * a2 * (B - 2 * a2 * A)
                + 0.25 * sh2 ** 2 * (C - a2 ** 2 * A ** 2))
    return SqueezedMoments(mean, second, variance)


@dataclass(frozen=True)
class SqueezeOptimum:
    sq: SqueezeParams
    slope: float
    mean: float
    variance: float


def decay_slope(alpha: float, sq: SqueezeParams, params: LindbladParams, sign: int = 1) -> float:
    """Linear decay coefficient ``kappa_1ph K1 + kappa_phi K2``."""
    mom = sq_cat_moments(alpha, sq, sign)
    return params.kappa_1ph * mom.mean + params.kappa_phi * mom.variance


def optimize_squeezing(alpha: float, params: LindbladParams, c: int = 2, r_max: float = 2.0,
                       dr: float = 0.01, dphi: float = math.pi / 60, sign: int = 1) -> SqueezeOptimum:
    """Squeezing ``(r, phi)`` minimizing the linear decay coefficient.

    Exhaustive grid over ``[0, r_max] x [0, 2 pi)`` followed by a bounded
    local refinement from the best grid point.
    """
    if params.is_closed:
        raise DomainError("at least one decay rate must be positive")
    rs = np.arange(0.0, r_max + 0.5 * dr, dr)
    phis = np.arange(0.0, 2 * math.pi - 0.5 * dphi, dphi)

    def obj(x):
        return decay_slope(alpha, SqueezeParams(max(x[0], 0.0), x[1], c), params, sign)

    grid = np.array([[obj((r, p)) for p in phis] for r in rs])
    i, j = np.unravel_index(np.argmin(grid), grid.shape)
    x0 = np.array([rs[i], phis[j]])
    res = minimize(obj, x0, method="L-BFGS-B",
                   bounds=[(0.0, r_max), (phis[j] - dphi, phis[j] + dphi)])
    x = res.x if res.fun <= grid[i, j] else x0
    sq = SqueezeParams(float(x[0]), float(x[1]), c)
    mom = sq_cat_moments(alpha, sq, sign)
    return SqueezeOptimum(sq, obj(x), mom.mean, mom.variance)


@dataclass
class DecayPoint:
    t: float
    r: float
    phi: float
    overlap: float


def decay_scan(alpha: float, sq_list: Sequence[SqueezeParams], params: LindbladParams,
               t_grid: Sequence[float], dim: int | None = None, sign: int = 1) -> list[DecayPoint]:
    """Free-decay overlap ``<psi| rho(t) |psi>`` of each squeezed cat with itself."""
    out = []
    for sq in sq_list:
        d = dim if dim is not None else recommended_dim(alpha, sq.r)
        psi = sq_cat_state(alpha, sq, d, sign)
        rho0 = psi.to_density_matrix()
        for t in t_grid:
            rho = analytic_decay(rho0, params, float(t))
            out.append(DecayPoint(float(t), sq.r, sq.phi, overlap(psi, rho)))
    return out
