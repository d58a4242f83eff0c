import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kerrcat.errors import DomainError
from kerrcat.fock import coherent_state, destroy, fidelity, number_moments, recommended_dim
from kerrcat.open_system import LindbladParams
from kerrcat.squeezing import (SqueezeParams, decay_scan, decay_slope, interference_factors,
                               optimize_squeezing, sq_cat_moments, sq_cat_state)


def _normal_ordered_moments(alpha, sq, c, sign):
    """Independent route: Bogoliubov transform of normally ordered moments of the unsqueezed cat.

    With ``b = S^dag a S = mu a - nu a^dag`` (``mu = cosh r``, ``nu = e^{i phi} sinh r``)
    the number moments are polynomials in ``<a^dag^k a^l>`` of the cat, and those follow
    from ``a^l |psi> `` evaluated in a large Fock space.
    """
    dim = recommended_dim(alpha) + 40
    n = np.arange(dim)
    psi = coherent_state(alpha, dim).amps * np.exp(1j * sign * math.pi / c * n ** 2)
    a = destroy(dim).matrix
    ad = a.conj().T
    mu, nu = math.cosh(sq.r), np.exp(1j * sq.phi) * math.sinh(sq.r)
    b = mu * a - nu * ad
    bd = b.conj().T
    num = bd @ b
    v = num @ psi
    mean = np.vdot(psi, v).real
    second = np.vdot(v, v).real
    return mean, second


def test_params_validation():
    with pytest.raises(DomainError):
        SqueezeParams(-0.1)
    with pytest.raises(DomainError):
        SqueezeParams(0.1, c=1)
    assert SqueezeParams(0.1, 2 * math.pi + 0.5).phi == pytest.approx(0.5)


def test_unsqueezed_moments_match_coherent_state():
    m = sq_cat_moments(2.0, SqueezeParams(0.0))
    assert m.mean == pytest.approx(4.0) and m.variance == pytest.approx(4.0)


@pytest.mark.parametrize("c", [2, 3, 4, 5])
@pytest.mark.parametrize("sign", [1, -1])
def test_closed_form_against_bogoliubov_oracle(c, sign):
    rng = np.random.default_rng(10 * c + sign)
    for _ in range(4):
        alpha = rng.uniform(0.5, 2.5)
        sq = SqueezeParams(rng.uniform(0, 0.8), rng.uniform(0, 2 * math.pi), c)
        m = sq_cat_moments(alpha, sq, sign)
        mean, second = _normal_ordered_moments(alpha, sq, c, sign)
        assert abs(m.mean - mean) < 1e-9
        assert abs(m.second - second) < 1e-8 * max(1.0, second)
        assert abs(m.variance - (m.second - m.mean ** 2)) < 1e-8 * max(1.0, second)


def test_legacy_b_only_agrees_for_two_components():
    for phi in (0.0, 1.0):
        assert interference_factors(2.0, phi, 2, legacy_b=True) == pytest.approx(
            interference_factors(2.0, phi, 2))
    assert interference_factors(2.0, 0.3, 3, legacy_b=True)[1] != pytest.approx(
        interference_factors(2.0, 0.3, 3)[1])


def test_state_moments_match_closed_form():
    sq = SqueezeParams(0.4, 0.7)
    psi = sq_cat_state(2.0, sq)
    mom = number_moments(psi, 2)
    m = sq_cat_moments(2.0, sq)
    assert abs(mom[0] - m.mean) < 1e-8 and abs(mom[1] - m.second) < 1e-7


def test_state_requires_real_alpha():
    with pytest.raises(DomainError):
        sq_cat_state(1 + 1j, SqueezeParams(0.1))
    with pytest.raises(DomainError):
        sq_cat_state(1.0, SqueezeParams(0.1), sign=2)


def test_state_is_ys_cat_without_squeezing():
    from kerrcat.fock import cat_state
    # exp(-i pi/2 N^2) is the forward Kerr evolution and yields phi = +pi/2
    psi = sq_cat_state(2.0, SqueezeParams(0.0), 40, sign=-1)
    assert fidelity(psi, cat_state(2.0, math.pi / 2, 40)) > 1 - 1e-12
    psi = sq_cat_state(2.0, SqueezeParams(0.0), 40, sign=1)
    assert fidelity(psi, cat_state(2.0, -math.pi / 2, 40)) > 1 - 1e-12


def test_optimum_equal_rates():
    opt = optimize_squeezing(2.0, LindbladParams(1.0, 1.0))
    assert opt.sq.r == pytest.approx(0.509, abs=2e-3)
    assert min(opt.sq.phi, 2 * math.pi - opt.sq.phi) < 1e-3
    assert opt.slope < decay_slope(2.0, SqueezeParams(0.0), LindbladParams(1.0, 1.0))


def test_optimum_needs_a_rate():
    with pytest.raises(DomainError):
        optimize_squeezing(2.0, LindbladParams())


def test_pure_loss_prefers_reduced_mean():
    # with loss only the slope is the mean photon number, which squeezing along phi=0 lowers
    opt = optimize_squeezing(2.0, LindbladParams(1.0, 0.0))
    assert opt.mean < 4.0


@settings(max_examples=20, deadline=None)
@given(st.floats(0.3, 2.5), st.floats(0.0, 1.0), st.floats(0.0, 6.28))
def test_variance_nonnegative(alpha, r, phi):
    m = sq_cat_moments(alpha, SqueezeParams(r, phi))
    assert m.variance > -1e-9 and m.mean > 0


def test_decay_scan_initial_slope():
    p = LindbladParams(1.0, 1.0)
    sqs = [SqueezeParams(0.0), SqueezeParams(0.51)]
    pts = decay_scan(2.0, sqs, p, [0.0, 1e-4])
    assert pts[0].overlap == pytest.approx(1.0)
    for i, sq in enumerate(sqs):
        slope = (1 - pts[2 * i + 1].overlap) / 1e-4
        assert slope == pytest.approx(decay_slope(2.0, sq, p), rel=2e-3)
