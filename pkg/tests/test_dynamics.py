import math
from fractions import Fraction

import numpy as np
import pytest
from scipy.linalg import expm

from qcat._validation import ConvergenceError, DomainError
from qcat.dynamics import (
    OMEGA_1,
    HamiltonianSpec,
    PulseEvent,
    closed_form_u_5half,
    evolve_lindblad,
    evolve_pure,
    lindblad_coefficients,
    lindblad_operators,
    liouvillian,
    make_schedule,
    propagator,
    pure_to_density,
    qi_hamiltonian,
)
from qcat.spin import build_operators, cardinal_state, coherent_spin_state
from tests.conftest import random_density, random_state


def test_hamiltonian_against_expanded_form():
    ops = build_operators(5)
    eta = 0.37
    ref = 2 * np.pi / 6 * (
        3 * ops.Iz @ ops.Iz - ops.casimir
        + eta * (ops.Ix @ ops.Ix - ops.Iy @ ops.Iy)
    )
    assert np.allclose(qi_hamiltonian(5, eta), ref, atol=1e-13)


def test_eta_one_equals_rotated_uniaxial_form():
    ops = build_operators(5)
    h1 = 2 * np.pi / 3 * (ops.Iz @ ops.Iz - ops.Iy @ ops.Iy)
    assert np.allclose(qi_hamiltonian(5, 1.0), h1, atol=1e-13)


def test_casimir_only_shifts_spectrum():
    a = np.linalg.eigvalsh(qi_hamiltonian(7, 0.4))
    b = np.linalg.eigvalsh(qi_hamiltonian(7, 0.4, include_casimir=False))
    shift = 2 * np.pi / 6 * 3.5 * 4.5
    assert np.allclose(b - a, shift, atol=1e-12)


def test_hamiltonian_spec_roundtrip():
    assert np.allclose(HamiltonianSpec(4, 0.2).matrix(), qi_hamiltonian(4, 0.2))
    with pytest.raises(DomainError):
        HamiltonianSpec(4, 1.2)


@pytest.mark.parametrize("t", [0.0, 0.113, 1.7, 9.99])
def test_propagator_matches_expm(t):
    H = qi_hamiltonian(8, 0.6)
    assert np.allclose(propagator(H, t), expm(-1j * H * t), atol=1e-12)


def test_closed_form_frequency():
    assert OMEGA_1 == pytest.approx(2 * math.sqrt(7) * 2 * math.pi / 3, rel=1e-15)
    # Period of the closed form is 2 pi / OMEGA_1.
    assert np.allclose(closed_form_u_5half(2 * np.pi / OMEGA_1), np.eye(6), atol=1e-12)


def test_evolve_pure_matches_direct_products():
    H = qi_hamiltonian(5, 0.8)
    psi0 = coherent_spin_state(5, np.pi / 2, 0.0)
    p1 = PulseEvent(0.3, 0.7)
    p2 = PulseEvent(0.5, 1.1, (0.0, 1.0, 0.0))
    times = np.array([0.0, 0.2, 0.3, 0.45, 0.5, 0.9])
    got = evolve_pure(psi0, H, [p1, p2], times)

    def U(t):
        return expm(-1j * H * t)

    def expected(t):
        psi = psi0
        if t < 0.3:
            return U(t) @ psi
        psi = p1.operator(5) @ U(0.3) @ psi
        if t < 0.5:
            return U(t - 0.3) @ psi
        psi = p2.operator(5) @ U(0.2) @ psi
        return U(t - 0.5) @ psi

    for row, t in zip(got, times):
        assert np.allclose(row, expected(t), atol=1e-12)


def test_zero_angle_pulse_is_identity():
    H = qi_hamiltonian(6, 1.0)
    psi0 = cardinal_state(6, "+X")
    t = np.linspace(0, 3, 31)
    assert np.allclose(evolve_pure(psi0, H, [PulseEvent(1.0, 0.0)], t), evolve_pure(psi0, H, (), t))


def test_schedule_validation():
    with pytest.raises(DomainError):
        make_schedule([PulseEvent(1.0, 0.1), PulseEvent(1.0, 0.2)])
    with pytest.raises(DomainError):
        PulseEvent(-1.0, 0.1)
    with pytest.raises(DomainError):
        PulseEvent(1.0, 0.1, (1.0, 1.0, 0.0))
    with pytest.raises(DomainError):
        evolve_pure(cardinal_state(5, "+X"), qi_hamiltonian(5, 1.0), (), [0.2, 0.1])


@pytest.mark.parametrize("twice_i", range(2, 10))
def test_lindblad_coefficients_exact(twice_i):
    gamma = 0.37
    p = Fraction((1 - math.exp(-gamma)) / 2)
    exact = [math.comb(twice_i, m) * p**m * (1 - p) ** (twice_i - m) for m in range(1, twice_i + 1)]
    assert np.allclose(lindblad_coefficients(twice_i, gamma), [float(x) for x in exact], rtol=1e-12)


def test_lindblad_operators_vanish_without_dephasing():
    assert all(np.allclose(L, 0) for L in lindblad_operators(5, 0.0))


def test_liouvillian_against_matrix_form(rng):
    H = qi_hamiltonian(3, 0.5)
    Ls = lindblad_operators(3, 0.2)
    rho = random_density(rng, 4)
    lhs = (liouvillian(H, Ls) @ rho.reshape(-1)).reshape(4, 4)
    rhs = -1j * (H @ rho - rho @ H)
    for L in Ls:
        rhs += L @ rho @ L.conj().T - 0.5 * (L.conj().T @ L @ rho + rho @ L.conj().T @ L)
    assert np.allclose(lhs, rhs, atol=1e-13)


@pytest.mark.parametrize("twice_i,gamma", [(2, 0.05), (5, 1e-2), (9, 3e-3)])
def test_lindblad_matches_exact_exponential(twice_i, gamma):
    H = qi_hamiltonian(twice_i, 0.7)
    sup = liouvillian(H, lindblad_operators(twice_i, gamma))
    psi0 = coherent_spin_state(twice_i, np.pi / 2, 0.0)
    rho0 = pure_to_density(psi0)
    pulse = PulseEvent(0.4, 0.9)
    times = np.linspace(0.0, 2.0, 9)
    got = evolve_lindblad(rho0, H, gamma, [pulse], times)
    R = pulse.operator(twice_i)
    d = twice_i + 1
    for rho, t in zip(got, times):
        if t < 0.4:
            ref = expm(sup * t) @ rho0.reshape(-1)
        else:
            mid = expm(sup * 0.4) @ rho0.reshape(-1)
            ref = expm(sup * (t - 0.4)) @ (np.kron(R, R.conj()) @ mid)
        assert np.max(np.abs(rho - ref.reshape(d, d))) < 1e-7


def test_lindblad_without_dephasing_reproduces_pure_evolution():
    H = qi_hamiltonian(5, 1.0)
    psi0 = cardinal_state(5, "+X")
    times = np.linspace(0, 1, 11)
    pulses = [PulseEvent(0.3, 0.6)]
    rho = evolve_lindblad(pure_to_density(psi0), H, 0.0, pulses, times)
    psi = evolve_pure(psi0, H, pulses, times)
    ref = np.einsum("ni,nj->nij", psi, psi.conj())
    assert np.max(np.abs(rho - ref)) < 1e-7


def test_lindblad_convergence_failure_is_reported(rng):
    H = qi_hamiltonian(4, 1.0)
    rho0 = random_density(rng, 5)
    with pytest.raises(ConvergenceError) as info:
        evolve_lindblad(rho0, H, 0.1, (), [0.0, 5.0], tol=1e-30, max_halvings=2)
    assert "last_change" in info.value.diagnostics


def test_dephasing_kills_coherence_between_m_levels():
    # Pure dephasing: the m-populations never change.
    H = np.zeros((6, 6))
    rho0 = pure_to_density(cardinal_state(5, "+X"))
    rho = evolve_lindblad(rho0, H, 0.5, (), [0.0, 4.0])
    assert np.allclose(np.diag(rho[1]), np.diag(rho0), atol=1e-9)
    assert abs(rho[1][0, 5]) < abs(rho0[0, 5]) * 1e-3


def test_rejects_nonphysical_inputs(rng):
    H = qi_hamiltonian(5, 1.0)
    with pytest.raises(DomainError):
        evolve_pure(2 * random_state(rng, 6), H)
    with pytest.raises(DomainError):
        evolve_lindblad(np.eye(6), H)
    with pytest.raises(DomainError):
        evolve_lindblad(np.eye(6) / 6, H, gamma=-1.0)
