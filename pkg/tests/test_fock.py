import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.linalg import expm

from kerrcat.errors import DomainError, TruncationError
from kerrcat.fock import (DensityMatrix, FockVector, cat_state, check_tail, coherent_state, create,
                          cumulants_from_moments, destroy, fidelity, fock_state, number,
                          number_cumulants, number_moments, parity, recommended_dim,
                          squeeze_operator, trace_distance, wigner, wigner_point)


def test_recommended_dim_formula():
    assert recommended_dim(2) == 40
    assert recommended_dim(0) == 20
    assert recommended_dim(2, 0.5) > recommended_dim(2)


def test_coherent_state_is_annihilation_eigenstate():
    alpha = 1.3 - 0.4j
    psi = coherent_state(alpha, 60)
    a = destroy(60).matrix
    out = a @ psi.amps
    assert np.allclose(out[:50], alpha * psi.amps[:50], atol=1e-12)
    assert abs(psi.norm - 1) < 1e-14


def test_coherent_moments_are_poissonian():
    psi = coherent_state(2.0, 60)
    k = number_cumulants(psi, 3)
    # all cumulants of a Poisson distribution equal the mean
    assert np.allclose(k, [4.0, 4.0, 4.0], atol=1e-10)


def test_truncation_error_on_small_dim():
    with pytest.raises(TruncationError):
        coherent_state(4.0, 10)


def test_tail_flag_between_thresholds():
    psi = coherent_state(2.0, 26, fail_tol=1.0)
    assert psi.truncated
    with pytest.warns(UserWarning):
        assert not check_tail(psi)
    assert check_tail(coherent_state(2.0, 40))


def test_cat_parity():
    even = cat_state(2.0, 0.0, 40)
    odd = cat_state(2.0, math.pi, 40)
    assert abs(parity(even) - 1) < 1e-12
    assert abs(parity(odd) + 1) < 1e-12
    ys = cat_state(2.0, math.pi / 2, 40)
    # equal-weight superposition of two nearly orthogonal components
    assert abs(parity(ys) - math.exp(-8)) < 1e-10


def test_cat_alpha_zero_pi_raises():
    with pytest.raises(DomainError):
        cat_state(0.0, math.pi, 10)


def test_fock_state_bounds():
    assert fock_state(3, 5).amps[3] == 1
    with pytest.raises(DomainError):
        fock_state(5, 5)


def test_ladder_operators():
    a, ad, n = destroy(8).matrix, create(8).matrix, number(8).matrix
    assert np.allclose(ad @ a, n)
    comm = a @ ad - ad @ a
    assert np.allclose(comm[:-1, :-1], np.eye(7))


def test_density_matrix_validation():
    with pytest.raises(DomainError):
        DensityMatrix(np.diag([0.5, 0.6]))
    with pytest.raises(DomainError):
        DensityMatrix(np.diag([1.5, -0.5]))
    with pytest.raises(DomainError):
        DensityMatrix(np.array([[0.5, 0.4], [0.1, 0.5]]))
    rho = coherent_state(1.0, 30).to_density_matrix()
    assert abs(rho.purity() - 1) < 1e-12


def test_fidelity_uhlmann_matches_pure_overlap():
    a, b = coherent_state(1.0, 30), coherent_state(1.2j, 30)
    pure = fidelity(a, b)
    assert abs(pure - math.exp(-abs(1.0 - 1.2j) ** 2)) < 1e-12
    assert abs(fidelity(a.to_density_matrix(), b.to_density_matrix()) - pure) < 1e-9
    assert abs(fidelity(a, b.to_density_matrix()) - pure) < 1e-12


def test_fidelity_dimension_mismatch():
    with pytest.raises(DomainError):
        fidelity(fock_state(0, 3), fock_state(0, 4))


def test_trace_distance_orthogonal():
    assert abs(trace_distance(fock_state(0, 4), fock_state(1, 4)) - 1) < 1e-14


def test_squeeze_operator_matches_expm_on_vacuum():
    s = squeeze_operator(0.4, 0.3, 60).matrix
    vac = s[:, 0]
    # squeezed vacuum amplitudes: c_{2k} = (-e^{i phi} tanh r)^k sqrt((2k)!)/(2^k k!) / sqrt(cosh r)
    r, phi = 0.4, 0.3
    for k in range(5):
        exp = ((-np.exp(1j * phi) * math.tanh(r)) ** k * math.sqrt(math.factorial(2 * k))
               / (2 ** k * math.factorial(k)) / math.sqrt(math.cosh(r)))
        assert abs(vac[2 * k] - exp) < 1e-10
    assert abs(vac[1]) < 1e-14


def test_squeeze_operator_rejects_negative():
    with pytest.raises(DomainError):
        squeeze_operator(-0.1, 0.0, 10)


def test_wigner_normalization_and_vacuum_peak():
    vac = fock_state(0, 5)
    x = np.linspace(-6, 6, 241)
    w = wigner(vac, x, x)
    dx = x[1] - x[0]
    assert abs(w.sum() * dx * dx - 1) < 1e-8
    assert abs(w.max() - 1 / math.pi) < 1e-10


def test_wigner_single_photon_origin():
    w = wigner(fock_state(1, 4), [0.0], [0.0])
    assert abs(w[0, 0] + 1 / math.pi) < 1e-12


def test_wigner_grid_matches_parity_formula():
    cat = cat_state(1.5, math.pi / 2, 30)
    for g in (math.sqrt(2), 2.0):
        for x, y in [(0.0, 0.0), (0.7, -0.3), (1.5, 0.2)]:
            grid = wigner(cat, [x], [y], g=g)[0, 0]
            assert abs(grid - wigner_point(cat, x, y, g=g)) < 1e-10


@settings(max_examples=30, deadline=None)
@given(st.floats(-2, 2), st.floats(-2, 2))
def test_coherent_fidelity_property(re, im):
    alpha, beta = 0.5 + 0.2j, complex(re, im)
    f = fidelity(coherent_state(alpha, 50), coherent_state(beta, 50))
    assert abs(f - math.exp(-abs(alpha - beta) ** 2)) < 1e-9


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(0.01, 1.0), min_size=3, max_size=12))
def test_cumulants_shift_invariance(weights):
    p = np.array(weights) / sum(weights)
    n = np.arange(p.size, dtype=float)
    m = [np.sum(p * n ** k) for k in range(1, 5)]
    mshift = [np.sum(p * (n + 3) ** k) for k in range(1, 5)]
    k, ks = cumulants_from_moments(m), cumulants_from_moments(mshift)
    assert abs(ks[0] - k[0] - 3) < 1e-9
    assert np.allclose(ks[1:], k[1:], atol=1e-8)


def test_number_moments_domain():
    with pytest.raises(DomainError):
        number_moments(fock_state(0, 3), 0)


def test_fockvector_from_amplitudes_zero():
    with pytest.raises(DomainError):
        FockVector.from_amplitudes(np.zeros(3))


def test_displacement_identity():
    # |alpha> = D(alpha)|0> compared in an enlarged space
    big = 80
    a = destroy(big).matrix
    disp = expm(1.1 * (a.conj().T - a))
    assert np.allclose(disp[:40, 0], coherent_state(1.1, 40).amps, atol=1e-12)
