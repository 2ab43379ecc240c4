import numpy as np
import pytest
from scipy.integrate import solve_ivp

from qcat._validation import DomainError
from qcat.classical import (
    ClassicalState,
    energy,
    fixed_points,
    flow_rhs,
    integrate_flow,
    jacobian,
    portrait_dataset,
)


def _numeric_jacobian(eta, spin, phi, p, h=1e-6):
    cols = []
    for dphi, dp in ((h, 0), (0, h)):
        f1 = np.array(flow_rhs(eta, spin, phi + dphi, p + dp))
        f0 = np.array(flow_rhs(eta, spin, phi - dphi, p - dp))
        cols.append((f1 - f0) / (2 * h))
    return np.array(cols).T


def test_flow_is_hamiltonian():
    # dphi/dt = dE/dp and dp/dt = -dE/dphi.
    eta, spin, phi, p, h = 0.6, 2.5, 0.4, 0.3, 1e-6
    dEdp = (energy(eta, spin, phi, p + h) - energy(eta, spin, phi, p - h)) / (2 * h)
    dEdphi = (energy(eta, spin, phi + h, p) - energy(eta, spin, phi - h, p)) / (2 * h)
    dphi, dp = flow_rhs(eta, spin, phi, p)
    assert dphi == pytest.approx(dEdp, rel=1e-8)
    assert dp == pytest.approx(-dEdphi, rel=1e-8)


def test_jacobian_against_finite_differences():
    for args in ((0.3, 1.5, 0.2, -0.4), (1.0, 4.5, 2.0, 0.7)):
        assert np.allclose(jacobian(*args), _numeric_jacobian(*args), atol=1e-6)


@pytest.mark.parametrize("eta", [0.1, 0.5, 1.0])
def test_fixed_point_classification(eta):
    recs = fixed_points(eta, 2.5)
    kinds = {r.location if isinstance(r.location, str) else round(r.location.phi, 6): r.kind
             for r in recs}
    assert kinds["north_pole"] == kinds["south_pole"] == "stable_center"
    assert kinds[0.0] == kinds[round(np.pi, 6)] == "unstable_saddle"
    assert kinds[round(np.pi / 2, 6)] == kinds[round(3 * np.pi / 2, 6)] == "stable_center"
    for r in recs:
        if not isinstance(r.location, str):
            assert np.allclose(flow_rhs(eta, 2.5, r.location.phi, r.location.p_phi), 0, atol=1e-12)


def test_uniaxial_limit_has_degenerate_equator():
    recs = fixed_points(0.0)
    assert [r.kind for r in recs] == ["stable_center", "stable_center", "degenerate_line"]


def test_integrator_against_solve_ivp_and_energy():
    s0 = ClassicalState(0.3, 0.5)
    t, phi, p = integrate_flow(s0, 0.7, 2.5, 1.0, 1e-3)
    ref = solve_ivp(lambda _, y: flow_rhs(0.7, 2.5, *y), (0, 1.0), [0.3, 0.5],
                    rtol=1e-11, atol=1e-12, t_eval=[1.0])
    assert t[-1] == 1.0
    assert np.allclose([phi[-1], p[-1]], ref.y[:, 0], atol=1e-8)
    e = energy(0.7, 2.5, phi, p)
    assert np.ptp(e) < 1e-8


def test_closed_orbit_period_matches_event_oracle():
    # Around the north pole phi advances monotonically; one lap is +2 pi.
    def lap(_, y):
        return y[0] - 2 * np.pi

    lap.terminal = True
    sol = solve_ivp(lambda _, y: flow_rhs(1.0, 1.0, *y), (0.0, 10.0), [0.0, 0.8],
                    events=lap, rtol=1e-12, atol=1e-12)
    period = sol.t_events[0][0]
    t, phi, p = integrate_flow(ClassicalState(0.0, 0.8), 1.0, 1.0, period, 1e-4)
    assert phi[-1] == pytest.approx(2 * np.pi, abs=1e-8)
    assert p[-1] == pytest.approx(0.8, abs=1e-8)


def test_portrait_rows_schema():
    rows = portrait_dataset(0.5, 1.5, [ClassicalState(0.0, 0.2), ClassicalState(1.0, -0.3)], 0.1, 0.01)
    assert len(rows) == 2 * 11
    assert rows[0][0] == 0 and rows[-1][0] == 1
    assert all(len(r) == 5 and r[4] >= 0 for r in rows)


def test_domain_checks():
    with pytest.raises(DomainError):
        ClassicalState(0.0, 1.5)
    with pytest.raises(DomainError):
        integrate_flow(ClassicalState(0, 0), 0.5, 1.0, 1.0, 0.0)
    with pytest.raises(DomainError):
        portrait_dataset(0.5, 1.0, [], 1.0, 0.1)
