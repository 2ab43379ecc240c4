"""Mean-field flow of the quadrupole Hamiltonian on the Bloch sphere.

Canonical pair ``(phi, p)`` with ``p = cos(theta)``.  In units f_Q = 1 the
classical energy is ``(2 pi I / 6) [3 p^2 + eta (1 - p^2) cos 2 phi]``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from qcat._validation import DomainError, check_eta


@dataclass(frozen=True)
class ClassicalState:
    phi: float
    p_phi: float

    def __post_init__(self):
        if abs(self.p_phi) > 1 + 1e-12:
            raise DomainError(f"p_phi={self.p_phi} outside [-1, 1]")


@dataclass(frozen=True)
class FixedPointRecord:
    """``location`` is a ClassicalState, ``"north_pole"``/``"south_pole"``,
    or ``"equator"`` for the degenerate line at eta = 0."""

    location: object
    kind: str
    jacobian_eigenvalues: tuple = ()


def _rate(spin):
    return 2 * np.pi * spin / 3


def energy(eta, spin, phi, p):
    return _rate(spin) / 2 * (3 * p**2 + eta * (1 - p**2) * np.cos(2 * phi))


def flow_rhs(eta, spin, phi, p):
    """``(dphi/dt, dp/dt)``; works elementwise on arrays."""
    k = _rate(spin)
    return k * p * (3 - eta * np.cos(2 * phi)), k * eta * (1 - p**2) * np.sin(2 * phi)


def integrate_flow(s0, eta, spin, t_end, dt):
    """Classical RK4 trajectory; returns ``(t, phi, p)`` arrays.

    The last step is shortened so the trajectory ends exactly at ``t_end``.
    """
    if not dt > 0:
        raise DomainError("dt must be positive")
    eta = check_eta(eta)
    n = int(np.ceil(t_end / dt - 1e-12))
    t = np.minimum(np.arange(n + 1) * dt, t_end)
    y = np.empty((n + 1, 2))
    y[0] = (s0.phi, s0.p_phi)

    def f(v):
        return np.array(flow_rhs(eta, spin, v[0], v[1]))

    for i in range(n):
        h = t[i + 1] - t[i]
        v = y[i]
        k1 = f(v)
        k2 = f(v + h / 2 * k1)
        k3 = f(v + h / 2 * k2)
        k4 = f(v + h * k3)
        y[i + 1] = v + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    return t, y[:, 0], y[:, 1]


def _pole_jacobian(eta, spin, north):
    # Flow ds/dt = grad(H) x s linearized in the tangent plane at the pole.
    k = _rate(spin) / 2
    sz = 1.0 if north else -1.0
    return np.array([[0.0, -k * (6 + 2 * eta) * sz], [k * (6 - 2 * eta) * sz, 0.0]])


def jacobian(eta, spin, phi, p):
    """Jacobian of ``flow_rhs`` in the ``(phi, p)`` chart."""
    k = _rate(spin)
    return np.array([
        [2 * k * eta * p * np.sin(2 * phi), k * (3 - eta * np.cos(2 * phi))],
        [2 * k * eta * (1 - p**2) * np.cos(2 * phi), -2 * k * eta * p * np.sin(2 * phi)],
    ])


def _classify(jac):
    ev = np.linalg.eigvals(jac)
    if np.all(np.abs(ev.real) < 1e-12 * max(1.0, np.abs(ev).max())):
        kind = "stable_center"
    else:
        kind = "unstable_saddle"
    return kind, tuple(complex(x) for x in ev)


def fixed_points(eta, spin=1.0):
    """Enumerate the flow's fixed points and classify them.

    ``spin`` only scales the Jacobian; the classification is spin-free.
    """
    eta = check_eta(eta)
    out = []
    for name, north in (("north_pole", True), ("south_pole", False)):
        kind, ev = _classify(_pole_jacobian(eta, spin, north))
        out.append(FixedPointRecord(name, kind, ev))
    if eta == 0:
        out.append(FixedPointRecord("equator", "degenerate_line"))
        return out
    for phi in (0.0, np.pi / 2, np.pi, 3 * np.pi / 2):
        kind, ev = _classify(jacobian(eta, spin, phi, 0.0))
        out.append(FixedPointRecord(ClassicalState(phi, 0.0), kind, ev))
    return out


def portrait_dataset(eta, spin, seeds, t_end, dt):
    """Rows ``(trajectory_id, t, phi, p, speed)`` for each seed trajectory.

    ``speed`` is the Euclidean norm of the flow vector in the ``(phi, p)``
    plane.  Each seed contributes ``ceil(t_end/dt) + 1`` rows.
    """
    seeds = list(seeds)
    if not seeds:
        raise DomainError("need at least one seed")
    rows = []
    for tid, s0 in enumerate(seeds):
        t, phi, p = integrate_flow(s0, eta, spin, t_end, dt)
        dphi, dp = flow_rhs(eta, spin, phi, p)
        speed = np.hypot(dphi, dp)
        rows.extend(zip([tid] * len(t), t, phi, p, speed))
    return rows
