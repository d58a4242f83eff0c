"""Truncated single-mode Fock space: states, operators, moments and Wigner functions.

Conventions
-----------
Basis index ``n`` is the photon number, ``n = 0 .. dim-1``. Quadratures are
``x = (a + a^dag)/sqrt(2)`` and ``p = i(a^dag - a)/sqrt(2)``; the Wigner
routines take a qutip-style scale ``g`` so that ``alpha = g/2 * (x + i p)``.
``g = sqrt(2)`` (default) is the quadrature convention, ``g = 2`` plots the
complex ``alpha`` plane directly.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Union

import numpy as np
from scipy.linalg import expm

from .errors import DomainError, TruncationError

TAIL_WIDTH = 5
TAIL_TOL = 1e-10
TAIL_FAIL = 1e-6


def recommended_dim(alpha: complex, r: float = 0.0) -> int:
    """Default truncation ``ceil(|alpha|^2 + 8|alpha| + 20)``.

    For squeezed states the coherent amplitude is inflated by ``e^r`` and the
    geometric squeezed-vacuum tail ``tanh(r)^n`` gets room to fall below 1e-12.
    """
    r = abs(r)
    a = abs(alpha) * math.exp(r)
    margin = math.log(1e-12) / math.log(math.tanh(r)) if r > 0 else 0.0
    return int(math.ceil(a * a + 8 * a + 20 + margin))


def _frozen(arr, dtype=complex) -> np.ndarray:
    out = np.array(arr, dtype=dtype)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class FockVector:
    """Normalized complex amplitudes on ``n = 0 .. dim-1``.

    ``tail`` is the population in the last ``TAIL_WIDTH`` levels plus any
    weight that was discarded by truncation before renormalization.
    """

    amps: np.ndarray
    tail: float = 0.0
    truncated: bool = field(default=False)

    def __post_init__(self):
        amps = np.asarray(self.amps)
        if amps.ndim != 1:
            raise DomainError("FockVector amplitudes must be one-dimensional")
        object.__setattr__(self, "amps", _frozen(amps))

    @classmethod
    def from_amplitudes(cls, amps, discarded: float = 0.0, tail_tol: float = TAIL_TOL,
                        fail_tol: float = TAIL_FAIL, normalize: bool = True) -> "FockVector":
        """Build a state, renormalizing and checking the truncation tail.

        ``discarded`` is the norm-squared that was dropped outside the basis.
        Raises :class:`TruncationError` when the tail exceeds ``fail_tol``.
        """
        amps = np.array(amps, dtype=complex)
        norm2 = float(np.vdot(amps, amps).real)
        if norm2 <= 0:
            raise DomainError("zero vector cannot be normalized")
        total = norm2 + discarded
        tail = (float(np.sum(np.abs(amps[-TAIL_WIDTH:]) ** 2)) + discarded) / total
        if tail > fail_tol:
            raise TruncationError(
                f"tail population {tail:.3e} exceeds {fail_tol:.0e} at dim={amps.size}")
        if normalize:
            amps /= math.sqrt(norm2)
        return cls(amps, tail=tail, truncated=tail > tail_tol)

    @classmethod
    def basis(cls, n: int, dim: int) -> "FockVector":
        if not 0 <= n < dim:
            raise DomainError(f"Fock index {n} outside 0..{dim - 1}")
        amps = np.zeros(dim, complex)
        amps[n] = 1.0
        return cls.from_amplitudes(amps, fail_tol=1.0)

    @property
    def dim(self) -> int:
        return self.amps.size

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amps))

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amps) ** 2

    def to_density_matrix(self) -> "DensityMatrix":
        return DensityMatrix(np.outer(self.amps, self.amps.conj()))

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.amps, dtype=dtype)


@dataclass(frozen=True)
class DensityMatrix:
    """Hermitian, positive, unit-trace operator.

    Validation runs on construction; pass ``validate=False`` for
    intermediate results that are checked by the caller.
    """

    matrix: np.ndarray
    validate: bool = field(default=True, repr=False, compare=False)

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise DomainError("density matrix must be square")
        object.__setattr__(self, "matrix", _frozen(m))
        if self.validate:
            self.check()

    def check(self, herm_tol: float = 1e-12, trace_tol: float = 1e-12,
              eig_tol: float = 1e-10) -> None:
        m = self.matrix
        if np.max(np.abs(m - m.conj().T)) > herm_tol:
            raise DomainError("density matrix is not Hermitian")
        tr = np.trace(m)
        if abs(tr - 1.0) > trace_tol:
            raise DomainError(f"density matrix trace {tr.real:.15f} != 1")
        if np.linalg.eigvalsh(m).min() < -eig_tol:
            raise DomainError("density matrix has a negative eigenvalue")

    @classmethod
    def from_state(cls, state: "FockVector") -> "DensityMatrix":
        return state.to_density_matrix()

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def probabilities(self) -> np.ndarray:
        return np.real(np.diag(self.matrix)).copy()

    def purity(self) -> float:
        return float(np.real(np.vdot(self.matrix, self.matrix)))

    def trace(self) -> float:
        return float(np.trace(self.matrix).real)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.matrix, dtype=dtype)


@dataclass(frozen=True)
class DenseOperator:
    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise DomainError("operator must be square")
        object.__setattr__(self, "matrix", _frozen(m))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def dag(self) -> "DenseOperator":
        return DenseOperator(self.matrix.conj().T)

    def apply(self, state: FockVector, **kwargs) -> FockVector:
        """Apply to ``state`` and renormalize (see :meth:`FockVector.from_amplitudes`)."""
        if state.dim != self.dim:
            raise DomainError(f"operator dim {self.dim} != state dim {state.dim}")
        return FockVector.from_amplitudes(self.matrix @ state.amps, **kwargs)

    def __matmul__(self, other):
        if isinstance(other, DenseOperator):
            return DenseOperator(self.matrix @ other.matrix)
        if isinstance(other, FockVector):
            if other.dim != self.dim:
                raise DomainError(f"operator dim {self.dim} != state dim {other.dim}")
            return self.matrix @ other.amps
        return self.matrix @ np.asarray(other)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.matrix, dtype=dtype)


State = Union[FockVector, DensityMatrix, np.ndarray]


# -- operators ---------------------------------------------------------------

def destroy(dim: int) -> DenseOperator:
    return DenseOperator(np.diag(np.sqrt(np.arange(1, dim, dtype=float)), 1))


def create(dim: int) -> DenseOperator:
    return DenseOperator(np.diag(np.sqrt(np.arange(1, dim, dtype=float)), -1))


def number(dim: int) -> DenseOperator:
    return DenseOperator(np.diag(np.arange(dim, dtype=float)))


def squeeze_generator(r: float, phi: float, dim: int) -> np.ndarray:
    """Anti-Hermitian exponent ``r/2 (e^{-i phi} a^2 - e^{i phi} a^dag^2)``."""
    a = destroy(dim).matrix
    a2 = a @ a
    return 0.5 * r * (np.exp(-1j * phi) * a2 - np.exp(1j * phi) * a2.conj().T)


def squeeze_operator(r: float, phi: float, dim: int, pad: int | None = None,
                     tol: float = 1e-8) -> DenseOperator:
    """``S(r, phi) = exp[r/2 (e^{-i phi} a^2 - e^{i phi} a^dag^2)]``.

    The exponential is taken in a space enlarged by ``pad`` levels (default
    ``dim``) and the leading ``dim x dim`` block is returned. Raises
    :class:`TruncationError` if that block fails unitarity by more than
    ``tol`` on the columns ``n < dim / (4 cosh 2r)``, whose squeezed images
    should fit inside the truncation.
    """
    if r < 0:
        raise DomainError("squeeze magnitude r must be non-negative")
    if r == 0:
        return DenseOperator(np.eye(dim, dtype=complex))
    big = dim + (dim if pad is None else pad)
    s = expm(squeeze_generator(r, phi, big))[:dim, :dim]
    k = max(1, int(dim / (4 * math.cosh(2 * r))))
    gram = s[:, :k].conj().T @ s[:, :k]
    if np.max(np.abs(gram - np.eye(k))) > tol:
        raise TruncationError(f"squeeze operator with r={r} not unitary to {tol:g} at dim={dim}")
    return DenseOperator(s)


# -- states ------------------------------------------------------------------

def _coherent_amps(alpha: complex, dim: int) -> np.ndarray:
    amps = np.empty(dim, complex)
    amps[0] = math.exp(-abs(alpha) ** 2 / 2)
    for n in range(1, dim):
        amps[n] = amps[n - 1] * alpha / math.sqrt(n)
    return amps


def coherent_state(alpha: complex, dim: int | None = None, **kwargs) -> FockVector:
    """``|alpha>`` truncated to ``dim`` levels and renormalized."""
    dim = recommended_dim(alpha) if dim is None else dim
    amps = _coherent_amps(complex(alpha), dim)
    discarded = max(0.0, 1.0 - float(np.sum(np.abs(amps) ** 2)))
    return FockVector.from_amplitudes(amps, discarded=discarded, **kwargs)


def cat_state(alpha: complex, phi: float, dim: int | None = None, **kwargs) -> FockVector:
    """Normalized ``|alpha> + e^{i phi} |-alpha>``."""
    dim = recommended_dim(alpha) if dim is None else dim
    plus = _coherent_amps(complex(alpha), dim)
    amps = plus + np.exp(1j * phi) * plus * (-1.0) ** np.arange(dim)
    if np.max(np.abs(amps)) < 1e-12 * np.max(np.abs(plus)):
        raise DomainError("cat components cancel exactly (alpha=0 with phi=pi)")
    # weight lost outside the basis is bounded by the coherent-state tail
    lost = max(0.0, 1.0 - float(np.sum(np.abs(plus) ** 2)))
    discarded = lost * float(np.sum(np.abs(amps) ** 2)) / max(np.sum(np.abs(plus) ** 2), 1e-300)
    return FockVector.from_amplitudes(amps, discarded=discarded, **kwargs)


def fock_state(n: int, dim: int) -> FockVector:
    return FockVector.basis(n, dim)


# -- statistics ---------------------------------------------------------------

def _populations(state: State) -> np.ndarray:
    if isinstance(state, (FockVector, DensityMatrix)):
        return state.probabilities()
    arr = np.asarray(state)
    if arr.ndim == 1:
        return np.abs(arr) ** 2
    return np.real(np.diag(arr))


def number_moments(state: State, max_power: int = 4) -> np.ndarray:
    """Raw moments ``<N^k>`` for ``k = 1 .. max_power``."""
    if max_power < 1:
        raise DomainError("max_power must be >= 1")
    p = _populations(state)
    n = np.arange(p.size, dtype=float)
    return np.array([np.sum(p * n ** k) for k in range(1, max_power + 1)])


def cumulants_from_moments(moments) -> np.ndarray:
    """First three or four cumulants from raw moments ``<N>, <N^2>, ...``."""
    m = list(moments)
    if len(m) < 1:
        raise DomainError("need at least one moment")
    out = [m[0]]
    if len(m) >= 2:
        out.append(m[1] - m[0] ** 2)
    if len(m) >= 3:
        out.append(m[2] - 3 * m[1] * m[0] + 2 * m[0] ** 3)
    if len(m) >= 4:
        out.append(m[3] - 4 * m[2] * m[0] - 3 * m[1] ** 2 + 12 * m[1] * m[0] ** 2 - 6 * m[0] ** 4)
    return np.array(out)


def number_cumulants(state: State, order: int = 3) -> np.ndarray:
    return cumulants_from_moments(number_moments(state, order))


def parity(state: State) -> float:
    p = _populations(state)
    return float(np.sum(p * (-1.0) ** np.arange(p.size)))


# -- overlaps -----------------------------------------------------------------

def _as_array(state: State) -> np.ndarray:
    if isinstance(state, FockVector):
        return state.amps
    if isinstance(state, DensityMatrix):
        return state.matrix
    return np.asarray(state, dtype=complex)


def fidelity(a: State, b: State) -> float:
    """Squared overlap for pure states, Uhlmann ``Tr{sqrt(sqrt(rho) sigma sqrt(rho))}^2`` otherwise."""
    x, y = _as_array(a), _as_array(b)
    if x.shape[0] != y.shape[0]:
        raise DomainError(f"dimension mismatch: {x.shape[0]} vs {y.shape[0]}")
    if x.ndim == 1 and y.ndim == 1:
        f = abs(np.vdot(x, y)) ** 2
    elif x.ndim == 1:
        f = np.real(np.vdot(x, y @ x))
    elif y.ndim == 1:
        f = np.real(np.vdot(y, x @ y))
    else:
        # restrict to the support of x so near-zero eigenvalues do not pollute the square roots
        w, v = np.linalg.eigh(0.5 * (x + x.conj().T))
        keep = w > 1e-14 * max(w.max(), 1e-300)
        r = v[:, keep] * np.sqrt(w[keep])
        mu = np.linalg.eigvalsh(r.conj().T @ y @ r)
        f = np.sum(np.sqrt(np.clip(mu, 0, None))) ** 2
    return float(min(max(f, 0.0), 1.0))


def trace_distance(a: State, b: State) -> float:
    """``1/2 ||rho - sigma||_1``; pure inputs are promoted to projectors."""
    def dm(s):
        arr = _as_array(s)
        return np.outer(arr, arr.conj()) if arr.ndim == 1 else arr
    d = dm(a) - dm(b)
    return float(0.5 * np.sum(np.abs(np.linalg.eigvalsh(0.5 * (d + d.conj().T)))))


# -- Wigner function -------------------------------------------------------------

def wigner(state: State, xvec, yvec, g: float = math.sqrt(2)) -> np.ndarray:
    """Wigner function on the grid ``xvec x yvec`` (rows index ``yvec``).

    Laguerre recursion over density-matrix elements; normalized so that
    ``sum W dx dy = 1``. See the module docstring for ``g``.
    """
    arr = _as_array(state)
    rho = np.outer(arr, arr.conj()) if arr.ndim == 1 else arr
    dim = rho.shape[0]
    X, Y = np.meshgrid(np.asarray(xvec, float), np.asarray(yvec, float))
    A = 0.5 * g * (X + 1j * Y)
    wl = [np.exp(-2.0 * np.abs(A) ** 2) / np.pi]
    W = np.real(rho[0, 0]) * np.real(wl[0])
    for n in range(1, dim):
        wl.append(2.0 * A * wl[n - 1] / math.sqrt(n))
        W = W + 2 * np.real(rho[0, n] * wl[n])
    for m in range(1, dim):
        temp = wl[m].copy()
        wl[m] = (2 * np.conj(A) * temp - math.sqrt(m) * wl[m - 1]) / math.sqrt(m)
        W = W + np.real(rho[m, m] * wl[m])
        for n in range(m + 1, dim):
            temp2 = (2 * A * wl[n - 1] - math.sqrt(m) * temp) / math.sqrt(n)
            temp = wl[n].copy()
            wl[n] = temp2
            W = W + 2 * np.real(rho[m, n] * wl[n])
    return 0.5 * g * g * W


def wigner_point(state: State, x: float, y: float, g: float = math.sqrt(2),
                 pad: int = 30) -> float:
    """Single-point Wigner value from the displaced-parity formula.

    ``W(beta) = g^2/(2 pi) Tr[rho D(beta) P D(beta)^dag]`` with the
    displacement built by matrix exponential in an enlarged space.
    """
    arr = _as_array(state)
    rho = np.outer(arr, arr.conj()) if arr.ndim == 1 else arr
    dim = rho.shape[0]
    big = dim + pad
    beta = 0.5 * g * (x + 1j * y)
    a = destroy(big).matrix
    disp = expm(beta * a.conj().T - np.conj(beta) * a)
    rho_big = np.zeros((big, big), complex)
    rho_big[:dim, :dim] = rho
    shifted = disp.conj().T @ rho_big @ disp
    par = (-1.0) ** np.arange(big)
    return float(g * g / (2 * np.pi) * np.real(np.sum(par * np.diag(shifted))))


def check_tail(state: FockVector, tol: float = TAIL_TOL) -> bool:
    """Warn and return False when the tail population exceeds ``tol``."""
    tail = float(np.sum(np.abs(state.amps[-TAIL_WIDTH:]) ** 2))
    if tail > tol:
        warnings.warn(f"tail population {tail:.2e} above {tol:.0e}", stacklevel=2)
        return False
    return True
