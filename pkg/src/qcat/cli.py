"""Command-line front end: ``qcat COMMAND [--config PATH] [--out DIR] [overrides]``.

Every command writes CSV tables, a deterministic ``summary.json`` and a
``manifest.json`` listing each emitted file with its SHA-256.  Exit codes:
0 on success, 2 on a usage or configuration error, 3 when a numerical
procedure fails to converge.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import os
import sys
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from qcat import __version__
from qcat._validation import ConvergenceError, DomainError

COMMANDS = (
    "simulate-n2", "simulate-n4", "optimize", "sweep-eta", "sensitivity",
    "portrait", "wigner", "harmonic-map", "decoherence", "decay-scan",
)
SNAPSHOT_LABELS = ("t0", "tR_minus", "tR_plus", "t10R")


class UsageError(Exception):
    pass


def _float_list(raw):
    if isinstance(raw, (list, tuple)):
        return [float(x) for x in raw]
    return [float(x) for x in str(raw).split(",") if x.strip()]


def _int_list(raw):
    vals = _float_list(raw)
    if any(v != int(v) for v in vals):
        raise ValueError("expected integers")
    return [int(v) for v in vals]


def _bool(raw):
    if isinstance(raw, bool):
        return raw
    s = str(raw).strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ValueError("expected a boolean")


def _optional_float(raw):
    if raw is None or str(raw).strip().lower() in ("", "none", "auto"):
        return None
    return float(raw)


@dataclass(frozen=True)
class Key:
    parse: object
    default: object
    check: object
    accepted: str


def _between(lo, hi, lo_open=False):
    def ok(v):
        return (lo < v if lo_open else lo <= v) and v <= hi
    return ok


def _all(pred):
    return lambda vs: len(vs) > 0 and all(pred(v) for v in vs)


KEYS = {
    "twice_i": Key(int, 5, _between(2, 9), "integer 2..9 (I = 1 .. 9/2)"),
    "eta": Key(float, 1.0, _between(0.0, 1.0), "real in [0, 1]"),
    "bound": Key(str, "polar", lambda v: v in ("polar", "equator"), "polar | equator"),
    "gamma": Key(float, 0.0, lambda v: 0.0 <= v <= 10.0, "real in [0, 10]"),
    "t_r": Key(_optional_float, None, lambda v: v is None or v > 0, "positive real or auto"),
    "theta_r": Key(_optional_float, None, lambda v: v is None or abs(v) <= 2 * math.pi,
                   "real in [-2 pi, 2 pi] or auto"),
    "varphi": Key(_optional_float, None, lambda v: v is None or 0 <= v < 2 * math.pi,
                  "real in [0, 2 pi) or auto"),
    "trmax": Key(float, 2.0, _between(0.0, 20.0, lo_open=True), "real in (0, 20]"),
    "n_t": Key(int, 400, _between(2, 5000), "integer 2..5000"),
    "n_theta": Key(int, 91, _between(2, 2000), "integer 2..2000"),
    "window_factor": Key(float, 10.0, _between(1.0, 100.0, lo_open=True), "real in (1, 100]"),
    "etas": Key(_float_list, [0.05, 0.1, 0.2, 0.3, 0.5, 0.7, 1.0],
                _all(_between(0.0, 1.0, lo_open=True)), "comma list of reals in (0, 1]"),
    "gammas": Key(_float_list, [1e-4, 1e-3, 1e-2], _all(lambda v: 0 <= v <= 10),
                  "comma list of reals in [0, 10]"),
    "spins": Key(_int_list, [2, 3, 4, 5, 6, 7, 8, 9], lambda vs: len(set(vs)) >= 4
                 and all(2 <= v <= 9 for v in vs), "comma list of >= 4 distinct integers 2..9"),
    "wigner_n_theta": Key(int, 61, _between(3, 721), "integer 3..721"),
    "wigner_n_phi": Key(int, 120, _between(3, 1440), "integer 3..1440"),
    "wigner_time": Key(str, "t10R", lambda v: v in SNAPSHOT_LABELS, " | ".join(SNAPSHOT_LABELS)),
    "snapshots": Key(_bool, True, lambda v: True, "boolean"),
    "map_n_theta": Key(int, 19, _between(2, 361), "integer 2..361"),
    "map_n_phi": Key(int, 36, _between(1, 720), "integer 1..720"),
    "periods": Key(int, 8, _between(8, 1000), "integer 8..1000"),
    "harmonic_power": Key(int, 1, lambda v: v in (1, 2), "1 | 2"),
    "t_end": Key(float, 1.0, _between(0.0, 1000.0, lo_open=True), "real in (0, 1000]"),
    "dt": Key(float, 1e-3, _between(0.0, 1.0, lo_open=True), "real in (0, 1]"),
    "n_seeds": Key(int, 12, _between(1, 1000), "integer 1..1000"),
}

# Keys whose default differs for a particular command.
COMMAND_DEFAULTS = {
    "sensitivity": {"twice_i": 3, "eta": 0.3},
    "decay-scan": {"gamma": 1e-2},
}

FLAG_KEYS = {
    "--twice-i": "twice_i", "--eta": "eta", "--bound": "bound", "--gamma": "gamma",
    "--tr": "t_r", "--theta-r": "theta_r", "--varphi": "varphi", "--trmax": "trmax",
    "--n-t": "n_t", "--n-theta": "n_theta", "--etas": "etas", "--gammas": "gammas",
    "--spins": "spins",
}


@dataclass
class RunConfig:
    command: str
    values: dict
    out: Path

    def __getitem__(self, key):
        return self.values[key]

    def echo(self):
        return {"command": self.command, **self.values}


def _load_file(path):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc.strerror}") from exc
    if text.lstrip().startswith("{"):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise UsageError(f"config {path} is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise UsageError("JSON config must be an object")
        return data
    data = {}
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"config line {n}: expected key=value")
        k, v = line.split("=", 1)
        data[k.strip()] = v.strip()
    return data


def _normalize_key(k):
    return str(k).strip().replace("-", "_").lower()


def parse_config(command, file_values=None, overrides=None, out="qcat_out"):
    """Merge defaults, file values and overrides (later wins) and validate.

    Raises UsageError naming the offending key and its accepted range.
    """
    if command not in COMMANDS:
        raise UsageError(f"unknown command {command!r}; choose from {', '.join(COMMANDS)}")
    raw = {}
    for source in (file_values or {}, overrides or {}):
        for k, v in source.items():
            key = _normalize_key(k)
            if key == "command":
                continue
            if key not in KEYS:
                raise UsageError(f"unknown config key {k!r}")
            raw[key] = v
    values = {}
    for key, rule in KEYS.items():
        if key in raw:
            try:
                v = rule.parse(raw[key])
            except (TypeError, ValueError):
                raise UsageError(f"{key}={raw[key]!r} invalid; accepted: {rule.accepted}") from None
        else:
            v = COMMAND_DEFAULTS.get(command, {}).get(key, rule.default)
        if not rule.check(v):
            raise UsageError(f"{key}={v!r} out of range; accepted: {rule.accepted}")
        values[key] = v
    return RunConfig(command, values, Path(out))


# ---------------------------------------------------------------- output


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer, int)):
        return int(x)
    if isinstance(x, (np.floating, float)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    if isinstance(x, (complex, np.complexfloating)):
        return [_jsonable(x.real), _jsonable(x.imag)]
    return x


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


@dataclass
class Writer:
    out: Path
    files: list = field(default_factory=list)

    def csv(self, name, header, rows):
        path = self.out / name
        with path.open("w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([_cell(v) for v in row])
        self.files.append(name)

    def json(self, name, payload):
        path = self.out / name
        path.write_text(json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n",
                        encoding="utf-8")
        self.files.append(name)


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


# ---------------------------------------------------------------- commands


def _pulse_params(cfg, bound=None):
    from qcat.optimize import optimize

    bound = bound or cfg["bound"]
    explicit = [cfg[k] for k in ("t_r", "theta_r", "varphi")]
    if all(v is not None for v in explicit):
        return {"t_R": explicit[0], "theta_R": explicit[1], "varphi": explicit[2]}, None
    res = optimize(cfg["twice_i"], cfg["eta"], bound, **_opt_kw(cfg))
    params = {"t_R": res.t_R, "theta_R": res.theta_R, "varphi": res.varphi}
    for k, name in (("t_r", "t_R"), ("theta_r", "theta_R"), ("varphi", "varphi")):
        if cfg[k] is not None:
            params[name] = cfg[k]
    return params, res


def _opt_kw(cfg):
    return {"t_max": cfg["trmax"], "n_t": cfg["n_t"], "n_theta": cfg["n_theta"],
            "window_factor": cfg["window_factor"]}


def cmd_simulate_n2(cfg, w):
    from qcat.protocols import run_n2

    params, opt = _pulse_params(cfg)
    res = run_n2(cfg["twice_i"], cfg["eta"], cfg["bound"], params, gamma=cfg["gamma"],
                 snapshots=cfg["snapshots"])
    w.csv("fidelity.csv", ["t", "fidelity", "rqfi"], zip(res.times, res.fidelity, res.rqfi))
    wmins = {}
    for label in res.snapshots if cfg["snapshots"] else ():
        wm = res.wigner(label, cfg["wigner_n_theta"], cfg["wigner_n_phi"])
        w.csv(f"wigner_{label}.csv", ["theta", "phi", "W"], wm.rows())
        wmins[label] = float(wm.values.min())
    return {"metadata": res.metadata, "post_pulse": res.post_pulse(),
            "rqfi_post_pulse_ripple": float(np.ptp(res.rqfi[res.times >= params["t_R"]]) / 2),
            "wigner_min": wmins, "optimization": opt.to_dict() if opt else None}


def cmd_simulate_n4(cfg, w):
    from qcat.protocols import run_n4

    params, opt = _pulse_params(cfg, "polar")
    res = run_n4(cfg["twice_i"], cfg["eta"], params, gamma=cfg["gamma"],
                 n_periods=cfg["periods"])
    w.csv("fidelity.csv", ["t", "fidelity", "fidelity_rotating", "fidelity_no_pulse3", "rqfi"],
          zip(res.times, res.fidelity, res.extra_series["fidelity_rotating"],
              res.extra_series["fidelity_no_pulse3"], res.rqfi))
    return {"metadata": res.metadata, "post_pulse": res.post_pulse(),
            "optimization": opt.to_dict() if opt else None}


def cmd_optimize(cfg, w):
    from qcat.optimize import PulseOptimizer

    est = PulseOptimizer(twice_i=cfg["twice_i"], eta=cfg["eta"], bound=cfg["bound"],
                         t_max=cfg["trmax"], n_t=cfg["n_t"], n_theta=cfg["n_theta"],
                         window_factor=cfg["window_factor"]).fit()
    t_grid = cfg["trmax"] * np.arange(1, cfg["n_t"] + 1) / cfg["n_t"]
    th_grid = np.linspace(0.0, np.pi / 2, cfg["n_theta"])
    w.csv("landscape.csv", ["t_R", "theta_R", "score"],
          ((t, th, est.grid_scores_[i, j]) for i, t in enumerate(t_grid)
           for j, th in enumerate(th_grid)))
    return {"result": est.result_.to_dict()}


def cmd_sweep_eta(cfg, w):
    from qcat.optimize import eta_sweep

    results = eta_sweep(cfg["twice_i"], cfg["etas"], cfg["bound"], **_opt_kw(cfg))
    w.csv("sweep.csv", ["eta", "t_R", "theta_R", "varphi", "f_max", "f_ripple"],
          ((r.eta, r.t_R, r.theta_R, r.varphi, r.score.f_max, r.score.f_ripple) for r in results))
    return {"results": [r.to_dict() for r in results]}


def cmd_sensitivity(cfg, w):
    from qcat.protocols import sensitivity_scan

    params, opt = _pulse_params(cfg)
    rep = sensitivity_scan(cfg["twice_i"], cfg["eta"], cfg["bound"], params)
    t = rep.baseline.times
    w.csv("sensitivity.csv", ["parameter", "deviation", "t", "fidelity"],
          ((r["parameter"], r["deviation"], ti, fi) for r in rep.rows
           for ti, fi in zip(t, r["fidelity"])))
    stats = [{k: v for k, v in r.items() if k != "fidelity"} for r in rep.rows]
    return {"metadata": rep.metadata, "rows": stats}


def cmd_portrait(cfg, w):
    from qcat.classical import ClassicalState, fixed_points, portrait_dataset

    n = cfg["n_seeds"]
    # Seeds along the meridian through a saddle and through a center.
    ps = np.linspace(-0.9, 0.9, (n + 1) // 2)
    seeds = [ClassicalState(0.0, p) for p in ps]
    seeds += [ClassicalState(np.pi / 2, p) for p in np.linspace(-0.9, 0.9, n // 2)]
    spin = cfg["twice_i"] / 2
    rows = portrait_dataset(cfg["eta"], spin, seeds, cfg["t_end"], cfg["dt"])
    w.csv("portrait.csv", ["trajectory_id", "t", "phi", "p_phi", "speed"], rows)
    fps = []
    for rec in fixed_points(cfg["eta"], spin):
        loc = rec.location
        fps.append({
            "location": loc if isinstance(loc, str) else {"phi": loc.phi, "p_phi": loc.p_phi},
            "kind": rec.kind,
            "jacobian_eigenvalues": [[e.real, e.imag] for e in rec.jacobian_eigenvalues],
        })
    return {"spin": spin, "eta": cfg["eta"], "n_trajectories": len(seeds),
            "fixed_points": fps}


def cmd_wigner(cfg, w):
    from qcat.protocols import run_n2

    params, opt = _pulse_params(cfg)
    res = run_n2(cfg["twice_i"], cfg["eta"], cfg["bound"], params, gamma=cfg["gamma"],
                 t_grid=[0.0, params["t_R"]])
    wm = res.wigner(cfg["wigner_time"], cfg["wigner_n_theta"], cfg["wigner_n_phi"])
    w.csv("wigner.csv", ["theta", "phi", "W"], wm.rows())
    return {"snapshot": cfg["wigner_time"], "params": params, "w_min": float(wm.values.min()),
            "w_max": float(wm.values.max()), "integral": wm.integral()}


def cmd_harmonic_map(cfg, w):
    from qcat.protocols import harmonic_ratio

    thetas = np.linspace(0.0, np.pi, cfg["map_n_theta"])
    phis = 2 * np.pi * np.arange(cfg["map_n_phi"]) / cfg["map_n_phi"]
    grid = [(th, ph) for th in thetas for ph in phis]
    ratio = harmonic_ratio(grid, cfg["twice_i"], cfg["eta"], cfg["periods"],
                           power=cfg["harmonic_power"])
    w.csv("harmonic_map.csv", ["theta", "phi", "ratio"],
          ((th, ph, r) for (th, ph), r in zip(grid, ratio)))
    finite = ratio[np.isfinite(ratio)]
    return {"twice_i": cfg["twice_i"], "eta": cfg["eta"], "periods": cfg["periods"],
            "power": cfg["harmonic_power"], "n_points": len(grid),
            "n_infinite": int(np.isinf(ratio).sum()), "n_undefined": int(np.isnan(ratio).sum()),
            "ratio_max_finite": float(finite.max()) if finite.size else None}


def cmd_decoherence(cfg, w):
    from qcat.protocols import decoherence_series, run_n2

    params, opt = _pulse_params(cfg)
    series = decoherence_series(cfg["twice_i"], cfg["eta"], cfg["bound"], params, cfg["gammas"])
    w.csv("decoherence.csv", ["gamma", "t", "fidelity", "rqfi"],
          ((r.metadata["gamma"], t, f, q) for r in series
           for t, f, q in zip(r.times, r.fidelity, r.rqfi)))
    out = []
    for r in series:
        wm = r.wigner("t10R", cfg["wigner_n_theta"], cfg["wigner_n_phi"])
        out.append({"gamma": r.metadata["gamma"], "post_pulse": r.post_pulse(),
                    "wigner_min_t10R": float(wm.values.min())})
    return {"params": params, "series": out}


def cmd_decay_scan(cfg, w):
    from qcat.optimize import optimize
    from qcat.protocols import tau_scaling

    if not cfg["gamma"] > 0:
        raise UsageError("gamma=0 invalid for decay-scan; accepted: real in (0, 10]")
    params = {s: optimize(s, cfg["eta"], "polar", **_opt_kw(cfg)) for s in cfg["spins"]}
    sc = tau_scaling(cfg["spins"], cfg["eta"], cfg["gamma"], params)
    w.csv("decay.csv", ["twice_i", "spin", "tau", "f0", "f_sat", "residual", "at_boundary"],
          ((s, s / 2, f.tau, f.f0, f.f_sat, f.residual, f.at_boundary)
           for s, f in zip(cfg["spins"], sc.fits)))
    return {"exponent": sc.exponent, "intercept": sc.intercept, "excluded": sc.excluded,
            "gamma_tau": [cfg["gamma"] * t for t in sc.taus], "spins": sc.spins,
            "eta": cfg["eta"], "gamma": cfg["gamma"]}


DISPATCH = {
    "simulate-n2": cmd_simulate_n2, "simulate-n4": cmd_simulate_n4,
    "optimize": cmd_optimize, "sweep-eta": cmd_sweep_eta, "sensitivity": cmd_sensitivity,
    "portrait": cmd_portrait, "wigner": cmd_wigner, "harmonic-map": cmd_harmonic_map,
    "decoherence": cmd_decoherence, "decay-scan": cmd_decay_scan,
}


def execute(cfg: RunConfig):
    """Run one command and write its outputs; returns the manifest dict."""
    started = datetime.now(timezone.utc).isoformat()
    cfg.out.mkdir(parents=True, exist_ok=True)
    w = Writer(cfg.out)
    summary = DISPATCH[cfg.command](cfg, w)
    w.json("summary.json", {"command": cfg.command, "config": cfg.echo(),
                            "version": __version__, "result": summary})
    manifest = {
        "config": _jsonable(cfg.echo()),
        "version": __version__,
        "started": started,
        "finished": datetime.now(timezone.utc).isoformat(),
        "files": [{"path": name, "sha256": _sha256(cfg.out / name),
                   "bytes": (cfg.out / name).stat().st_size} for name in sorted(w.files)],
    }
    (cfg.out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n",
                                           encoding="utf-8")
    return manifest


def build_parser():
    p = argparse.ArgumentParser(prog="qcat", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", help="key=value or JSON file")
    p.add_argument("--out", default="qcat_out", help="output directory")
    for flag, key in FLAG_KEYS.items():
        p.add_argument(flag, dest=key, default=None, help=KEYS[key].accepted)
    p.add_argument("--set", dest="extra", action="append", default=[], metavar="KEY=VALUE",
                   help="override any config key; repeatable")
    p.add_argument("--version", action="version", version=__version__)
    return p


def _check_threads():
    raw = os.environ.get("QCAT_THREADS")
    if raw is None or raw == "":
        return
    try:
        ok = int(raw) >= 1
    except ValueError:
        ok = False
    if not ok:
        raise UsageError(f"QCAT_THREADS={raw!r} invalid; accepted: integer >= 1")


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        _check_threads()
        file_values = _load_file(args.config) if args.config else {}
        overrides = {key: getattr(args, key) for key in FLAG_KEYS.values()
                     if getattr(args, key) is not None}
        for item in args.extra:
            if "=" not in item:
                raise UsageError(f"--set expects KEY=VALUE, got {item!r}")
            k, v = item.split("=", 1)
            overrides[k] = v
        cfg = parse_config(args.command, file_values, overrides, args.out)
        manifest = execute(cfg)
    except (UsageError, DomainError) as exc:
        print(f"qcat: error: {exc}", file=sys.stderr)
        return 2
    except ConvergenceError as exc:
        print(f"qcat: convergence failure: {exc} {exc.diagnostics}", file=sys.stderr)
        return 3
    print(json.dumps({"out": str(cfg.out), "files": [f["path"] for f in manifest["files"]]}))
    return 0


if __name__ == "__main__":
    sys.exit(main())
