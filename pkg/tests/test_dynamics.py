import math

import numpy as np
import pytest
from scipy.linalg import expm

from kerrcat.design import design
from kerrcat.dynamics import (Pulse, evolve_diagonal, evolve_driven, interval_propagator,
                              nested_drive_commutator, phase_diagonal)
from kerrcat.errors import DomainError
from kerrcat.fock import cat_state, coherent_state, destroy, fidelity, fock_state


def test_pulse_validation():
    with pytest.raises(DomainError):
        Pulse(np.array([1.0, 2.0]), 0.1, bound=1.5)
    with pytest.raises(DomainError):
        Pulse(np.zeros(3), 0.0)
    p = Pulse.constant(0.5, 1.0, 10)
    assert p.nt == 10 and abs(p.duration - 1.0) < 1e-15
    assert np.allclose(p.refine(3).samples[:3], 0.5)


@pytest.mark.parametrize("m", [2, 3, 4, 5])
def test_design_forms_ys_cat(m):
    d = design(m)
    psi = evolve_diagonal(coherent_state(2.0, 40), d.coeffs, d.tc)
    assert fidelity(psi, cat_state(2.0, math.pi / 2, 40)) > 1 - 1e-12


def test_large_phase_reduction_keeps_precision():
    # K_6 n^6 t is ~1e9 rad at n = 39 but only its value mod 2 pi matters
    d = design(6)
    psi = evolve_diagonal(coherent_state(2.0, 40), d.coeffs, d.tc)
    assert fidelity(psi, cat_state(2.0, math.pi / 2, 40)) > 1 - 1e-10


def test_interval_propagator_matches_expm():
    dim = 12
    diag = phase_diagonal((0.3, 1.0, 0.5), dim)
    a = destroy(dim).matrix
    h = np.diag(diag) + 1.7 * (a + a.conj().T)
    assert np.allclose(interval_propagator(diag, 1.7, 0.03), expm(-1j * h * 0.03), atol=1e-12)


def test_exact_and_split_agree():
    rng = np.random.default_rng(5)
    pulse = Pulse(rng.uniform(-5, 5, 40), 0.02)
    vac = fock_state(0, 30)
    ex = evolve_driven(vac, (0, 1, 0.5), pulse, method="exact")
    sp = evolve_driven(vac, (0, 1, 0.5), pulse, method="split", tol=1e-11)
    assert fidelity(ex, sp) > 1 - 1e-9


def test_free_drive_displaces_vacuum():
    # H = eps (a + a^dag) for time T displaces the vacuum to alpha = -i eps T
    pulse = Pulse.constant(2.0, 0.5, 10)
    psi = evolve_driven(fock_state(0, 30), (0,), pulse)
    assert fidelity(psi, coherent_state(-1j, 30)) > 1 - 1e-12


def test_unknown_method():
    with pytest.raises(DomainError):
        evolve_driven(fock_state(0, 5), (0, 1), Pulse.zeros(1, 2), method="rk4")


def test_nested_commutator_is_linear():
    # three commutators with a + a^dag reduce the quartic form to 12 (a - a^dag)
    dim = 20
    c = nested_drive_commutator(1.0, dim)
    a = destroy(dim).matrix
    assert np.allclose(c[:15, :15], 12 * (a - a.T)[:15, :15], atol=1e-10)
