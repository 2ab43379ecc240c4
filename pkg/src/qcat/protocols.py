"""End-to-end pulse protocols and the scans built on them."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize, minimize_scalar

from qcat._parallel import parallel_map
from qcat._validation import DomainError, check_gamma, check_twice_i
from qcat.decay import DecayFit, fit_decay
from qcat.dynamics import (
    OMEGA_1,
    OMEGA_2,
    PropagatorCache,
    PulseEvent,
    evolve_lindblad,
    evolve_pure,
    pure_to_density,
    qi_hamiltonian,
)
from qcat.measures import BOUND_RQFI_AXIS, fidelity, normalized_rqfi
from qcat.optimize import OptimizationResult, optimize
from qcat.spin import build_operators, cat_target, coherent_spin_state, n4_target
from qcat.wigner import wigner_map

log = logging.getLogger(__name__)

TWO_PI = 2 * np.pi


@dataclass
class ProtocolResult:
    times: np.ndarray
    fidelity: np.ndarray
    rqfi: np.ndarray
    pulse_times: list
    snapshots: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)
    extra_series: dict = field(default_factory=dict)

    def post_pulse(self, after=None):
        """Fidelity statistics at and after ``after`` (default: last pulse)."""
        t0 = self.pulse_times[-1] if after is None else after
        f = self.fidelity[self.times >= t0]
        return {
            "f_max": float(f.max()),
            "f_min": float(f.min()),
            "f_ripple": float((f.max() - f.min()) / 2),
            "f_mean": float(f.mean()),
        }

    def wigner(self, label, n_theta=61, n_phi=120):
        return wigner_map(self.snapshots[label], n_theta, n_phi)


def _params(twice_i, eta, bound, params):
    if params is None:
        params = optimize(twice_i, eta, bound)
    if isinstance(params, OptimizationResult):
        return params.t_R, params.theta_R, params.varphi
    p = dict(params)
    return float(p["t_R"]), float(p["theta_R"]), float(p["varphi"])


def _n_samples(twice_i, eta, span, minimum=1001, per_period=32):
    lam = np.linalg.eigvalsh(qi_hamiltonian(twice_i, eta))
    return max(minimum, math.ceil(per_period * span * np.ptp(lam) / TWO_PI) + 1)


def _propagate(psi0, H, schedule, t_grid, gamma):
    if gamma > 0:
        return evolve_lindblad(pure_to_density(psi0), H, gamma, schedule, t_grid)
    return evolve_pure(psi0, H, schedule, t_grid)


def run_n2(twice_i=5, eta=1.0, bound="polar", params=None, gamma=0.0,
           t_grid=None, theta_css=np.pi / 2, phi_css=0.0, rqfi_axis=None,
           snapshots=True):
    """Coherent state -> free evolution -> one x pulse -> stabilization.

    ``params`` is an OptimizationResult, a mapping with ``t_R``, ``theta_R``
    and ``varphi``, or None to optimize first.  ``gamma > 0`` switches to
    the master equation.  The default grid covers ``[0, 10 t_R]`` and
    contains ``t_R`` itself (sampled after the pulse).
    """
    twice_i = check_twice_i(twice_i)
    gamma = check_gamma(gamma)
    t_R, theta_R, varphi = _params(twice_i, eta, bound, params)
    H = qi_hamiltonian(twice_i, eta)
    if t_grid is None:
        t_grid = np.linspace(0.0, 10 * t_R, _n_samples(twice_i, eta, 10 * t_R))
        t_grid = np.union1d(t_grid, [t_R])
    t_grid = np.asarray(t_grid, dtype=float)
    psi0 = coherent_spin_state(twice_i, theta_css, phi_css)
    pulse = PulseEvent(t_R, theta_R)
    states = _propagate(psi0, H, [pulse], t_grid, gamma)
    target = cat_target(twice_i, bound, varphi)
    axis = rqfi_axis or BOUND_RQFI_AXIS[bound]

    snaps = {}
    if snapshots:
        snaps["t0"] = pure_to_density(psi0)
        before = _propagate(psi0, H, [], [t_R], gamma)[0]
        after = _propagate(psi0, H, [pulse], [t_R, 10 * t_R], gamma)
        for label, s in (("tR_minus", before), ("tR_plus", after[0]), ("t10R", after[1])):
            snaps[label] = s if s.ndim == 2 else pure_to_density(s)

    return ProtocolResult(
        times=t_grid,
        fidelity=fidelity(target, states),
        rqfi=normalized_rqfi(states, axis),
        pulse_times=[t_R],
        snapshots=snaps,
        metadata={
            "twice_i": twice_i, "eta": float(eta), "bound": bound, "gamma": gamma,
            "t_R": t_R, "theta_R": theta_R, "varphi": varphi,
            "theta_css": float(theta_css), "phi_css": float(phi_css),
            "rqfi_axis": axis, "rqfi_axis_note": "bound axis by default (inferred)",
        },
    )


def decoherence_series(twice_i=5, eta=1.0, bound="polar", params=None,
                       gammas=(1e-4, 1e-3, 1e-2)):
    """``run_n2`` for each dephasing rate on a shared time grid."""
    if params is None:
        params = optimize(twice_i, eta, bound)
    base = run_n2(twice_i, eta, bound, params, snapshots=False)
    return parallel_map(
        lambda g: run_n2(twice_i, eta, bound, params, gamma=g, t_grid=base.times),
        [check_gamma(g) for g in gammas],
    )


@dataclass
class SensitivityReport:
    baseline: ProtocolResult
    rows: list
    metadata: dict = field(default_factory=dict)


SENSITIVITY_PARAMETERS = ("t_R", "theta_R", "theta_css", "phi_css")


def sensitivity_scan(twice_i=3, eta=0.3, bound="polar", params=None,
                     deviations=(0.05, -0.05, 0.10, -0.10)):
    """Rerun the protocol with one parameter perturbed at a time.

    Pulse time and angle are scaled by ``1 + dev``; the coherent-state angles
    are offset additively by ``dev * pi/2``.  All rows share the baseline
    time grid and target phase; statistics are taken from each row's own
    pulse instant to the end of that grid.
    """
    if params is None:
        params = optimize(twice_i, eta, bound)
    t_R, theta_R, varphi = _params(twice_i, eta, bound, params)
    base = run_n2(twice_i, eta, bound, params, snapshots=False)

    def one(item):
        name, dev = item
        kw = {"t_R": t_R, "theta_R": theta_R, "varphi": varphi,
              "theta_css": np.pi / 2, "phi_css": 0.0}
        if name in ("t_R", "theta_R"):
            kw[name] *= 1 + dev
        else:
            kw[name] += dev * np.pi / 2
        res = run_n2(
            twice_i, eta, bound,
            {k: kw[k] for k in ("t_R", "theta_R", "varphi")},
            t_grid=base.times, theta_css=kw["theta_css"], phi_css=kw["phi_css"],
            snapshots=False,
        )
        stats = res.post_pulse(kw["t_R"])
        return {"parameter": name, "deviation": dev, "fidelity": res.fidelity, **stats}

    items = [(p, d) for p in SENSITIVITY_PARAMETERS for d in deviations]
    rows = [{"parameter": "baseline", "deviation": 0.0, "fidelity": base.fidelity,
             **base.post_pulse()}]
    rows += parallel_map(one, items)
    return SensitivityReport(
        base, rows,
        {"twice_i": twice_i, "eta": eta, "bound": bound, "t_R": t_R,
         "theta_R": theta_R, "varphi": varphi,
         "angular_offsets": "additive, fraction of pi/2"},
    )


def fidelity_spectrum(series, n_periods):
    """Amplitudes of harmonics 0, 1, 2, ... of a series spanning ``n_periods``
    whole fundamental periods (endpoint excluded)."""
    amps = np.abs(np.fft.rfft(np.asarray(series, dtype=float))) / len(series)
    return amps[::n_periods]


def harmonic_ratio(css_grid, twice_i=5, eta=1.0, n_periods=8, samples_per_period=64,
                   power=1):
    """``|A(2 w1)| / |A(w1)|`` of the fidelity-to-initial series per coherent state.

    ``power=2`` analyses the squared overlap instead of the overlap modulus.

    Evolution is free and sampled over exactly ``n_periods`` fundamental
    periods so both harmonics fall on DFT bins.  Returns an array aligned
    with ``css_grid``: ``inf`` when only the fundamental vanishes, ``nan``
    when both amplitudes are below 1e-12.
    """
    if n_periods < 8:
        raise DomainError("use at least 8 fundamental periods")
    if power not in (1, 2):
        raise DomainError("power must be 1 or 2")
    period = TWO_PI / OMEGA_1
    n = n_periods * samples_per_period
    times = np.arange(n) * (period / samples_per_period)
    cache = PropagatorCache(qi_hamiltonian(twice_i, eta))
    out = []
    for theta, phi in css_grid:
        psi0 = coherent_spin_state(twice_i, theta, phi)
        f = np.abs(cache.evolve(psi0, times) @ psi0.conj()) ** power
        amps = fidelity_spectrum(f, n_periods)
        a1, a2 = amps[1], amps[2]
        if a1 < 1e-12 and a2 < 1e-12:
            out.append(np.nan)
        elif a1 < 1e-12:
            out.append(np.inf)
        else:
            out.append(a2 / a1)
    return np.array(out)


def _first_local_max(fn, t_start, t_stop, step):
    ts = np.arange(t_start, t_stop, step)
    f = fn(ts)
    for k in range(1, len(f) - 1):
        if f[k] >= f[k - 1] and f[k] > f[k + 1]:
            res = minimize_scalar(lambda t: -fn(np.array([t]))[0],
                                  bounds=(ts[k - 1], ts[k + 1]), method="bounded",
                                  options={"xatol": 1e-12})
            return float(res.x)
    raise DomainError("no interior fidelity maximum found")


def run_n4(twice_i=5, eta=1.0, params=None, pulse3=None, gamma=0.0, n_periods=8,
           samples_per_period=64, n_t3=120, n_theta3=121):
    """Three-pulse route to the four-legged cat.

    1. The optimal polar pulse makes the two-legged polar cat.
    2. At the first subsequent maximum of that cat's fidelity, ``R(y, pi/2)``
       turns the pair onto the x axis.
    3. An x pulse, whose time (within one fundamental period after pulse 2)
       and angle maximize the peak fidelity to the fixed four-leg template,
       splits the legs.

    The returned trace covers ``n_periods`` fundamental periods after pulse
    3.  Extra series hold the fidelity to the rotating target and the trace
    without pulse 3; the metadata hold the harmonic amplitudes of the
    fixed-template fidelity after pulse 3.
    """
    twice_i = check_twice_i(twice_i)
    gamma = check_gamma(gamma)
    if params is None:
        params = optimize(twice_i, eta, "polar")
    t1, th1, ph1 = _params(twice_i, eta, "polar", params)
    H = qi_hamiltonian(twice_i, eta)
    cache = PropagatorCache(H)
    psi0 = coherent_spin_state(twice_i, np.pi / 2, 0.0)
    p1 = PulseEvent(t1, th1)
    polar = cat_target(twice_i, "polar", ph1)
    after1 = evolve_pure(psi0, H, [p1], [t1])[0]
    period = TWO_PI / OMEGA_1

    def f_polar(ts):
        return fidelity(polar, cache.evolve(after1, ts - t1))

    t2 = _first_local_max(f_polar, t1 + 1e-6, t1 + 10 * t1 + period, period / 400)
    p2 = PulseEvent(t2, np.pi / 2, (0.0, 1.0, 0.0))
    after2 = p2.operator(twice_i) @ cache.evolve(after1, [t2 - t1])[0]
    x_cat_fid = max(fidelity(cat_target(twice_i, "x_axis", ph), after2) for ph in (0.0, np.pi))

    template = n4_target(twice_i, np.pi)
    probe = np.linspace(0.0, 2 * period, 400, endpoint=False)
    rx_w, rx_v = np.linalg.eigh(build_operators(twice_i).Ix)

    def peak(t3_off, thetas):
        pre = cache.evolve(after2, [t3_off])[0]
        rot = rx_v @ (np.exp(-1j * np.outer(rx_w, thetas)) * (rx_v.conj().T @ pre)[:, None])
        c = cache.eigenvectors.conj().T @ rot
        ph = np.exp(-1j * np.outer(probe, cache.eigenvalues))
        amp = (ph * (template.conj() @ cache.eigenvectors)) @ c
        return np.abs(amp).max(axis=0)

    if pulse3 is None:
        offs = period * np.arange(1, n_t3 + 1) / n_t3
        thetas = np.linspace(-np.pi / 2, np.pi / 2, n_theta3)
        grid = np.stack([peak(o, thetas) for o in offs])
        i, j = np.unravel_index(np.argmax(grid), grid.shape)
        res = minimize(lambda x: -peak(x[0], [x[1]])[0], [offs[i], thetas[j]],
                       method="Nelder-Mead",
                       options={"xatol": 1e-10, "fatol": 1e-10, "maxiter": 2000})
        off3, th3 = (float(v) for v in res.x)
        if -res.fun < grid[i, j]:
            off3, th3 = float(offs[i]), float(thetas[j])
        t3 = t2 + off3
    else:
        t3, th3 = float(pulse3["time"]), float(pulse3["angle"])
    p3 = PulseEvent(t3, th3)

    spp = samples_per_period
    pre = np.arange(0.0, t3, period / spp)
    post = t3 + np.arange(n_periods * spp) * (period / spp)
    times = np.concatenate([pre, post])
    schedule = [p1, p2, p3]
    states = _propagate(psi0, H, schedule, times, gamma)
    no_p3 = _propagate(psi0, H, [p1, p2], times, gamma)
    f_fixed = fidelity(template, states)
    f_no_p3 = fidelity(template, no_p3)

    post_mask = times >= t3
    f_post = f_fixed[post_mask]
    t_star = float(post[int(np.argmax(f_post))])
    rotating = {}
    for sign in (1.0, -1.0):
        targets = np.stack([n4_target(twice_i, np.pi + sign * OMEGA_2 * (t - t_star))
                            for t in times])
        if states.ndim == 2:
            amp = np.abs(np.einsum("ni,ni->n", targets.conj(), states))
        else:
            amp = np.sqrt(np.clip(np.einsum("ni,nij,nj->n", targets.conj(), states,
                                            targets).real, 0, None))
        rotating[sign] = np.clip(amp, 0, 1)
    sign = max(rotating, key=lambda s: rotating[s][post_mask].mean())

    amps = fidelity_spectrum(f_post, n_periods)
    return ProtocolResult(
        times=times,
        fidelity=f_fixed,
        rqfi=normalized_rqfi(states, "auto"),
        pulse_times=[t1, t2, t3],
        snapshots={},
        extra_series={"fidelity_rotating": rotating[sign], "fidelity_no_pulse3": f_no_p3},
        metadata={
            "twice_i": twice_i, "eta": float(eta), "gamma": gamma,
            "pulses": [
                {"time": p.time, "angle": p.angle, "axis": list(p.axis)} for p in schedule
            ],
            "x_cat_fidelity_after_pulse2": float(x_cat_fid),
            "rotating_target_sign": sign, "rotating_target_anchor": t_star,
            "harmonic_amplitudes": amps[: 2 * 4 + 1].tolist(),
            "dominant_harmonic": int(np.argmax(amps[1:]) + 1),
            "omega_2": OMEGA_2,
        },
    )


@dataclass
class TauScaling:
    exponent: float
    intercept: float
    spins: list
    taus: list
    fits: list
    excluded: list
    metadata: dict = field(default_factory=dict)


def decay_constant(twice_i, eta, gamma, params=None, n_samples=2000, max_rounds=12):
    """Fit the post-pulse fidelity decay of the polar two-legged cat.

    The window starts at the pulse and doubles until the fitted envelope has
    fallen below a tenth of its initial excess or the window reaches
    ``10 / gamma``.
    """
    if not gamma > 0:
        raise DomainError("gamma must be positive for a decay fit")
    if params is None:
        params = optimize(twice_i, eta, "polar")
    t_R, theta_R, varphi = _params(twice_i, eta, "polar", params)
    limit = 10.0 / gamma
    width = min(9 * t_R, limit)
    fit = None
    for _ in range(max_rounds):
        t_grid = t_R + np.linspace(0.0, width, n_samples)
        res = run_n2(twice_i, eta, "polar", params, gamma=gamma, t_grid=t_grid,
                     snapshots=False)
        fit = fit_decay(res.times, res.fidelity, t_ref=t_R)
        done = fit.ok and width >= fit.tau * np.log(10)
        if done or width >= limit:
            break
        grow = 2 * width if not fit.ok else max(2 * width, 3 * fit.tau)
        width = min(grow, limit)
    return fit, res


def tau_scaling(spins_twice, eta, gamma, params=None):
    """Power-law exponent of ``1/tau`` against ``2I``.

    ``params`` optionally maps ``twice_i`` to precomputed optimal settings.
    Flagged fits are dropped with a warning.
    """
    spins_twice = [check_twice_i(s) for s in spins_twice]
    if len(set(spins_twice)) < 4:
        raise DomainError("need at least four distinct spins")
    params = params or {}
    fits = parallel_map(
        lambda s: decay_constant(s, eta, gamma, params.get(s))[0], spins_twice
    )
    keep, excluded = [], []
    for s, fit in zip(spins_twice, fits):
        if fit.ok:
            keep.append((s, fit))
        else:
            log.warning("decay fit for 2I=%d flagged; excluded", s)
            excluded.append(s)
    if len(keep) < 2:
        raise DomainError("fewer than two usable decay fits")
    x = np.log([s for s, _ in keep])
    y = np.log([1.0 / f.tau for _, f in keep])
    slope, intercept = np.polyfit(x, y, 1)
    return TauScaling(
        float(slope), float(intercept), [s / 2 for s, _ in keep],
        [f.tau for _, f in keep], fits, excluded,
        {"eta": eta, "gamma": gamma},
    )
