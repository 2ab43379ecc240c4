"""Quadrupole-interaction dynamics: exact unitary evolution with instantaneous
pulses, the closed-form spin-5/2 propagator, and phase-flip master equations.

Units: hbar = 1 and f_Q = 1, so times are in 1/f_Q, rates in f_Q and the
quadrupole angular frequency is ``OMEGA_Q = 2 pi``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from qcat._validation import (
    ConvergenceError,
    DomainError,
    check_density_matrix,
    check_eta,
    check_gamma,
    check_hermitian,
    check_state,
    check_time_grid,
    check_twice_i,
    check_unit_vector,
)
from qcat.spin import build_operators, rotation_operator

OMEGA_Q = 2 * np.pi
# Nonzero eigenfrequency of the spin-5/2, eta = 1 Hamiltonian and its double.
OMEGA_1 = 2 * np.sqrt(7) * OMEGA_Q / 3
OMEGA_2 = 2 * OMEGA_1


@dataclass(frozen=True)
class HamiltonianSpec:
    twice_i: int
    eta: float
    include_casimir: bool = True

    def __post_init__(self):
        check_twice_i(self.twice_i)
        check_eta(self.eta)

    def matrix(self):
        return qi_hamiltonian(self.twice_i, self.eta, self.include_casimir)


def qi_hamiltonian(twice_i, eta, include_casimir=True):
    """``(2 pi / 6) [3 Iz^2 - I^2 + eta (Ix^2 - Iy^2)]``.

    Dropping the Casimir term shifts the spectrum by a constant and changes
    states only by a global phase.
    """
    ops = build_operators(twice_i)
    eta = check_eta(eta)
    h = 3 * ops.Iz @ ops.Iz + eta * (ops.Ix @ ops.Ix - ops.Iy @ ops.Iy)
    if include_casimir:
        h = h - ops.casimir
    h = OMEGA_Q / 6 * h
    return (h + h.conj().T) / 2


def _as_matrix(hamiltonian):
    if isinstance(hamiltonian, HamiltonianSpec):
        return hamiltonian.matrix()
    return check_hermitian(hamiltonian)


class PropagatorCache:
    """Eigendecomposition of a Hermitian ``H`` giving ``exp(-i H t)`` at any t."""

    def __init__(self, hamiltonian):
        H = _as_matrix(hamiltonian)
        self.hamiltonian = H
        self.eigenvalues, self.eigenvectors = np.linalg.eigh(H)

    def __call__(self, t):
        v = self.eigenvectors
        return (v * np.exp(-1j * self.eigenvalues * t)) @ v.conj().T

    def evolve(self, psi, times):
        """States ``exp(-i H t) psi`` for each t, stacked as rows."""
        times = np.atleast_1d(np.asarray(times, dtype=float))
        c = self.eigenvectors.conj().T @ psi
        phases = np.exp(-1j * np.outer(times, self.eigenvalues))
        return (phases * c) @ self.eigenvectors.T


def propagator(hamiltonian, t):
    """``exp(-i H t)`` via exact diagonalization."""
    return PropagatorCache(hamiltonian)(t)


def closed_form_u_5half(t):
    """Spin-5/2, eta = 1 propagator from its three-level distinct spectrum.

    ``U = (cos(w1 t) - 1)/w1^2 H1^2 - i sin(w1 t)/w1 H1 + 1`` with
    ``H1 = (OMEGA_Q / 3)(Iz^2 - Iy^2)`` and ``w1 = OMEGA_1``.
    """
    ops = build_operators(5)
    h1 = OMEGA_Q / 3 * (ops.Iz @ ops.Iz - ops.Iy @ ops.Iy)
    w = OMEGA_1
    return (
        (np.cos(w * t) - 1) / w**2 * (h1 @ h1)
        - 1j * np.sin(w * t) / w * h1
        + np.eye(6)
    )


@dataclass(frozen=True)
class PulseEvent:
    """Instantaneous rotation by ``angle`` about ``axis`` at ``time``."""

    time: float
    angle: float
    axis: tuple = (1.0, 0.0, 0.0)

    def __post_init__(self):
        if not self.time >= 0:
            raise DomainError(f"pulse time {self.time} must be >= 0")
        check_unit_vector(self.axis)

    def operator(self, twice_i):
        return rotation_operator(twice_i, self.axis, self.angle)


def make_schedule(events):
    """Validate a pulse sequence; times must be strictly increasing."""
    events = tuple(events)
    for a, b in zip(events, events[1:]):
        if not b.time > a.time:
            raise DomainError("pulse times must be strictly increasing")
    return events


def _segments(t_grid, schedule):
    """Yield ``(pulse_or_None, sample_indices)`` in chronological order.

    Samples at exactly a pulse time are placed after that pulse.
    """
    start = 0
    for pulse in schedule:
        stop = int(np.searchsorted(t_grid, pulse.time, side="left"))
        yield None, np.arange(start, stop)
        yield pulse, np.arange(stop, stop)
        start = stop
    yield None, np.arange(start, len(t_grid))


def evolve_pure(psi0, hamiltonian, schedule=(), t_grid=(0.0,)):
    """Piecewise-exact state evolution from t = 0, sampled on ``t_grid``.

    Returns an array of shape ``(len(t_grid), d)``.
    """
    H = _as_matrix(hamiltonian)
    d = H.shape[0]
    twice_i = d - 1
    psi = check_state(psi0, d, atol=1e-10)
    t_grid = check_time_grid(t_grid)
    schedule = make_schedule(schedule)
    cache = PropagatorCache(H)

    out = np.empty((len(t_grid), d), dtype=complex)
    t_cur = 0.0
    for pulse, idx in _segments(t_grid, schedule):
        if pulse is None:
            if len(idx):
                out[idx] = cache.evolve(psi, t_grid[idx] - t_cur)
            continue
        psi = pulse.operator(twice_i) @ cache(pulse.time - t_cur) @ psi
        t_cur = pulse.time
    return out


def lindblad_coefficients(twice_i, gamma):
    """Weights ``C(2I, m) p^m (1-p)^(2I-m)`` with ``p = (1 - e^-gamma)/2``, m = 1..2I."""
    twice_i = check_twice_i(twice_i)
    gamma = check_gamma(gamma)
    p = -math.expm1(-gamma) / 2
    q = 1 - p
    return np.array(
        [math.comb(twice_i, m) * p**m * q ** (twice_i - m) for m in range(1, twice_i + 1)]
    )


def lindblad_operators(twice_i, gamma):
    """Phase-flip Lindblad set ``sqrt(c_m) Iz^m`` for m = 1..2I."""
    iz = build_operators(twice_i).Iz
    ops = []
    power = np.eye(twice_i + 1, dtype=complex)
    for c in lindblad_coefficients(twice_i, gamma):
        power = power @ iz
        ops.append(np.sqrt(c) * power)
    return ops


def liouvillian(hamiltonian, jump_ops):
    """Superoperator acting on row-major ``rho.reshape(-1)``."""
    H = _as_matrix(hamiltonian)
    d = H.shape[0]
    one = np.eye(d)
    sup = -1j * (np.kron(H, one) - np.kron(one, H.T))
    for L in jump_ops:
        ld = L.conj().T @ L
        sup += np.kron(L, L.conj()) - 0.5 * np.kron(ld, one) - 0.5 * np.kron(one, ld.T)
    return sup


class _RK4Stepper:
    """Fixed-step classical RK4 for the linear ODE ``dv/dt = A v``.

    For a constant ``A`` one RK4 step of size h is exactly the degree-4
    Taylor polynomial of ``exp(A h)``; whole sample intervals are composed
    from it by repeated squaring.
    """

    def __init__(self, sup, step):
        self.sup = sup
        self.step = step
        self._cache = {}

    def over(self, dt):
        key = round(dt, 13)
        prop = self._cache.get(key)
        if prop is None:
            n = max(1, math.ceil(dt / self.step - 1e-9))
            a = self.sup * (dt / n)
            eye = np.eye(a.shape[0])
            a2 = a @ a
            one_step = eye + a + a2 / 2 + a2 @ a / 6 + a2 @ a2 / 24
            prop = np.linalg.matrix_power(one_step, n)
            self._cache[key] = prop
        return prop


def _lindblad_trajectory(vec0, stepper, t_grid, schedule, twice_i, d):
    out = np.empty((len(t_grid), d * d), dtype=complex)
    vec = vec0
    t_cur = 0.0
    for pulse, idx in _segments(t_grid, schedule):
        if pulse is None:
            for i in idx:
                vec = stepper.over(t_grid[i] - t_cur) @ vec
                t_cur = t_grid[i]
                out[i] = vec
            continue
        vec = stepper.over(pulse.time - t_cur) @ vec
        R = pulse.operator(twice_i)
        vec = np.kron(R, R.conj()) @ vec
        t_cur = pulse.time
    return out


def evolve_lindblad(rho0, hamiltonian, gamma=0.0, schedule=(), t_grid=(0.0,),
                    tol=1e-8, max_halvings=14):
    """Integrate the dephasing master equation from t = 0.

    The RK4 step is halved until two successive refinements differ by less
    than ``tol`` in every entry of every sampled density matrix.  Returns
    an array of shape ``(len(t_grid), d, d)``.
    """
    H = _as_matrix(hamiltonian)
    d = H.shape[0]
    twice_i = d - 1
    rho0 = check_density_matrix(rho0, d)
    t_grid = check_time_grid(t_grid)
    schedule = make_schedule(schedule)
    sup = liouvillian(H, lindblad_operators(twice_i, gamma))

    step = 0.1 / max(np.linalg.norm(sup, 2), 1e-12)
    horizon = max(float(t_grid[-1]) if len(t_grid) else 0.0,
                  max((p.time for p in schedule), default=0.0))
    step = min(step, horizon) if horizon > 0 else 1.0
    vec0 = rho0.reshape(-1)
    prev = _lindblad_trajectory(vec0, _RK4Stepper(sup, step), t_grid, schedule, twice_i, d)
    change = np.inf
    for _ in range(max_halvings):
        step /= 2
        cur = _lindblad_trajectory(vec0, _RK4Stepper(sup, step), t_grid, schedule, twice_i, d)
        change = float(np.max(np.abs(cur - prev))) if cur.size else 0.0
        prev = cur
        if change < tol:
            return cur.reshape(-1, d, d)
    raise ConvergenceError(
        "RK4 step halving did not converge",
        {"final_step": step, "last_change": change, "tol": tol},
    )


def pure_to_density(psi):
    psi = np.asarray(psi, dtype=complex)
    return np.outer(psi, psi.conj())
