import logging

import numpy as np
import pytest

from qcat._validation import DomainError
from qcat.decay import DecayFit
from qcat.dynamics import OMEGA_1, PulseEvent, evolve_pure, qi_hamiltonian
from qcat.protocols import (
    decay_constant,
    decoherence_series,
    fidelity_spectrum,
    harmonic_ratio,
    run_n2,
    run_n4,
    sensitivity_scan,
    tau_scaling,
)
from qcat.spin import cardinal_state


def test_n2_series_shapes_and_range(polar_52):
    res = run_n2(5, 1.0, "polar", polar_52)
    n = len(res.times)
    assert res.fidelity.shape == res.rqfi.shape == (n,)
    assert polar_52.t_R in res.times
    assert res.times[-1] == pytest.approx(10 * polar_52.t_R)
    assert np.all((res.fidelity >= 0) & (res.fidelity <= 1))
    assert set(res.snapshots) == {"t0", "tR_minus", "tR_plus", "t10R"}
    assert res.metadata["rqfi_axis"] == "z"


def test_n2_post_pulse_matches_optimizer(polar_52):
    stats = run_n2(5, 1.0, "polar", polar_52).post_pulse()
    assert stats["f_max"] == pytest.approx(polar_52.score.f_max, abs=1e-3)
    assert stats["f_ripple"] == pytest.approx(polar_52.score.f_ripple, abs=1e-3)


def test_n2_rqfi_ripple_exceeds_fidelity_ripple(polar_52):
    res = run_n2(5, 1.0, "polar", polar_52, snapshots=False)
    post = res.times >= polar_52.t_R
    assert np.ptp(res.rqfi[post]) > np.ptp(res.fidelity[post])


def test_n2_grid_density_independence(polar_52):
    coarse = np.linspace(0, 10 * polar_52.t_R, 101)
    fine = np.linspace(0, 10 * polar_52.t_R, 1001)
    a = run_n2(5, 1.0, "polar", polar_52, t_grid=coarse, snapshots=False)
    b = run_n2(5, 1.0, "polar", polar_52, t_grid=fine, snapshots=False)
    assert np.max(np.abs(a.fidelity - b.fidelity[::10])) < 1e-10


def test_explicit_params_equal_result_object(polar_52):
    explicit = {"t_R": polar_52.t_R, "theta_R": polar_52.theta_R, "varphi": polar_52.varphi}
    a = run_n2(5, 1.0, "polar", polar_52, snapshots=False)
    b = run_n2(5, 1.0, "polar", explicit, snapshots=False)
    assert np.array_equal(a.fidelity, b.fidelity)


def test_strong_dephasing_hits_fidelity_harder_than_rqfi(polar_52):
    clean = run_n2(5, 1.0, "polar", polar_52, snapshots=False)
    noisy = run_n2(5, 1.0, "polar", polar_52, gamma=1e-2, t_grid=clean.times, snapshots=False)
    end = slice(-50, None)
    assert clean.fidelity[end].mean() - noisy.fidelity[end].mean() > 0.01
    drop_f = 1 - noisy.fidelity[end].mean() / clean.fidelity[end].mean()
    drop_q = 1 - noisy.rqfi[end].mean() / clean.rqfi[end].mean()
    assert drop_q < drop_f


def test_decoherence_ordering(polar_52):
    series = decoherence_series(5, 1.0, "polar", polar_52)
    assert [s.metadata["gamma"] for s in series] == [1e-4, 1e-3, 1e-2]
    f = np.stack([s.fidelity for s in series])
    assert np.all(np.diff(f, axis=0) <= 1e-6)


def test_sensitivity_report(polar_32_showcase):
    rep = sensitivity_scan(params=polar_32_showcase)
    assert rep.rows[0]["parameter"] == "baseline"
    assert np.array_equal(rep.rows[0]["fidelity"], rep.baseline.fidelity)
    assert len(rep.rows) == 1 + 16
    assert rep.metadata["twice_i"] == 3 and rep.metadata["eta"] == 0.3
    by = {(r["parameter"], r["deviation"]): r for r in rep.rows}
    base = rep.rows[0]
    # A pulse-time error mostly adds ripple around a similar mean.
    tr = by[("t_R", 0.1)]
    assert tr["f_ripple"] > base["f_ripple"]
    assert abs(tr["f_mean"] - base["f_mean"]) < 0.05


def test_spectrum_bins_on_synthetic_series():
    n_periods, spp = 8, 32
    x = np.arange(n_periods * spp) / spp
    y = 0.5 + 0.2 * np.cos(2 * np.pi * x) + 0.1 * np.cos(2 * np.pi * 2 * x + 0.3)
    amps = fidelity_spectrum(y, n_periods)
    assert amps[0] == pytest.approx(0.5)
    assert amps[1] == pytest.approx(0.1)
    assert amps[2] == pytest.approx(0.05)


def test_harmonic_ratio_symmetry_and_sentinels():
    grid = [(0.7, 0.4), (0.7, 0.4 + np.pi), (1.9, 2.0), (1.9, 2.0 + np.pi)]
    r = harmonic_ratio(grid)
    assert r[0] == pytest.approx(r[1], rel=1e-8)
    assert r[2] == pytest.approx(r[3], rel=1e-8)
    # |+X> only has the fundamental: the modulus overlap is |cos| shaped.
    assert harmonic_ratio([(np.pi / 2, 0.0)])[0] < 1e-8
    assert 0 < harmonic_ratio([(np.pi / 2, 0.0)], power=2)[0] < 1
    # No dynamics at all: both amplitudes vanish.
    assert np.isnan(harmonic_ratio([(0.0, 0.0)], eta=0.0)[0])
    with pytest.raises(DomainError):
        harmonic_ratio(grid, n_periods=4)


def test_harmonic_ratio_reference_value():
    # Independent path: sample the overlap directly with evolve_pure.
    psi0 = cardinal_state(5, "+Y")
    period = 2 * np.pi / OMEGA_1
    t = np.arange(8 * 64) * period / 64
    f = np.abs(evolve_pure(psi0, qi_hamiltonian(5, 1.0), (), t) @ psi0.conj())
    amps = np.abs(np.fft.rfft(f))
    assert harmonic_ratio([(np.pi / 2, np.pi / 2)])[0] == pytest.approx(amps[16] / amps[8], rel=1e-10)


def test_n4_protocol(polar_52):
    res = run_n4(params=polar_52)
    m = res.metadata
    assert m["x_cat_fidelity_after_pulse2"] > 0.95
    assert m["pulses"][1]["axis"] == [0.0, 1.0, 0.0]
    assert m["dominant_harmonic"] == 2
    post = res.times >= res.pulse_times[-1]
    fixed = res.fidelity[post]
    rotating = res.extra_series["fidelity_rotating"][post]
    assert np.ptp(fixed) > 0.5
    assert np.ptp(rotating) < 0.2 * np.ptp(fixed)
    # Without pulse 3 the overlap with the template stays lower.
    assert res.extra_series["fidelity_no_pulse3"][post].max() < fixed.max()


def test_n4_explicit_third_pulse(polar_52):
    a = run_n4(params=polar_52)
    p3 = a.metadata["pulses"][2]
    b = run_n4(params=polar_52, pulse3={"time": p3["time"], "angle": p3["angle"]})
    assert np.allclose(a.fidelity, b.fidelity, atol=1e-12)


def test_decay_constant_of_spin_one():
    fit, res = decay_constant(2, 1.0, 1e-2)
    assert isinstance(fit, DecayFit) and fit.ok
    assert 0.5 < 1e-2 * fit.tau < 2


def test_tau_scaling_excludes_flagged_fits(monkeypatch, caplog):
    import qcat.protocols as proto

    real = proto.decay_constant

    def fake(s, eta, gamma, params=None):
        fit, res = real(s, eta, gamma, params)
        if s == 3:
            fit = DecayFit(fit.f0, fit.tau, fit.f_sat, fit.residual, True, fit.t_ref)
        return fit, res

    monkeypatch.setattr(proto, "decay_constant", fake)
    with caplog.at_level(logging.WARNING):
        sc = tau_scaling([2, 3, 4, 5], 1.0, 1e-2)
    assert sc.excluded == [3] and "2I=3" in caplog.text
    assert sc.spins == [1.0, 2.0, 2.5]
    with pytest.raises(DomainError):
        tau_scaling([2, 3, 4], 1.0, 1e-2)


def test_decay_requires_dephasing():
    with pytest.raises(DomainError):
        decay_constant(2, 1.0, 0.0)
