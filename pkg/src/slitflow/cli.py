"""Experiment orchestration.

One experiment = one JSON config file; command-line flags only override the
seed, the output directory, the worker count and verbosity, so archived
configs reproduce runs exactly.  Unknown or missing config keys abort
before any computation (exit 2); numerical failures exit 3.

Subcommands:
  cluster   event log + cluster boundary (JSONL, CSV, SVG)
  hull      measure-driven Loewner hull (CSV, SVG)
  flow      event-driven boundary flow (per-point CSV, omega series, JSON, SVG)
  ode       deterministic reference flow panel (CSV, SVG)
  fluct     fluctuation statistics report (JSON, sample path CSV)
  compare   cluster-vs-hull and flow-vs-ODE distance tables (CSV)
  verify    run the acceptance checks and write a report (exit 3 on failure)
"""

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .cluster import (
    CONVENTIONS,
    Cluster,
    eval_cluster_map,
    finger_histogram,
    generate_event_log,
    trace_cluster_boundary,
)
from .loewner import AbsorbedError, ConstantDensity, solve_map_at_point, trace_hull
from .measures import (
    ConstantDiameter,
    IntervalAngles,
    MFoldAngles,
    TabulatedAngles,
    TabulatedDiameters,
    UniformAngles,
    particle_stats,
)
from .flow import (
    flow_distance,
    fluctuation_paths,
    limit_sde_ensemble,
    ode_reference_flow,
    simulate_boundary_flow,
)
from .output import (
    Manifest,
    render_flow_svg,
    render_svg,
    write_geometry_csv,
    write_json,
    write_series_csv,
)


class ConfigError(ValueError):
    pass


def _require(cond, msg):
    if not cond:
        raise ConfigError(msg)


def _check_keys(obj, allowed, required, where):
    _require(isinstance(obj, dict), f"{where}: expected an object")
    unknown = set(obj) - set(allowed)
    _require(not unknown, f"{where}: unknown keys {sorted(unknown)}")
    missing = set(required) - set(obj)
    _require(not missing, f"{where}: missing required keys {sorted(missing)}")


def build_angle_measure(spec):
    _check_keys(spec, {"kind", "eta", "m", "values", "csv", "smooth_width"},
                {"kind"}, "nu")
    kind = spec["kind"]
    if kind == "uniform":
        _check_keys(spec, {"kind"}, {"kind"}, "nu")
        return UniformAngles()
    if kind == "interval":
        _check_keys(spec, {"kind", "eta", "smooth_width"}, {"kind", "eta"}, "nu")
        nu = IntervalAngles(float(spec["eta"]))
        if "smooth_width" in spec:
            nu = nu.smoothed(float(spec["smooth_width"]))
        return nu
    if kind == "mfold":
        _check_keys(spec, {"kind", "m"}, {"kind", "m"}, "nu")
        return MFoldAngles(int(spec["m"]))
    if kind == "tabulated":
        _require(("values" in spec) ^ ("csv" in spec),
                 "nu: tabulated needs exactly one of 'values' or 'csv'")
        if "csv" in spec:
            return TabulatedAngles.from_csv(spec["csv"])
        return TabulatedAngles(np.asarray(spec["values"], dtype=float))
    raise ConfigError(f"nu: unknown kind {kind!r}")


def build_diameter_law(spec):
    _check_keys(spec, {"kind", "d", "atoms", "weights"}, {"kind"}, "sigma")
    kind = spec["kind"]
    if kind == "constant":
        _check_keys(spec, {"kind", "d"}, {"kind", "d"}, "sigma")
        return ConstantDiameter(float(spec["d"]))
    if kind == "tabulated":
        _check_keys(spec, {"kind", "atoms", "weights"},
                    {"kind", "atoms", "weights"}, "sigma")
        return TabulatedDiameters(np.asarray(spec["atoms"], dtype=float),
                                  np.asarray(spec["weights"], dtype=float))
    raise ConfigError(f"sigma: unknown kind {kind!r}")


_COMMON = {"nu", "sigma", "seed", "out"}
_SCHEMAS = {
    "cluster": (_COMMON | {"horizon", "rate_convention", "rate", "n_points",
                           "eps", "bins"},
                {"nu", "sigma", "horizon", "rate_convention", "seed"}),
    "hull": (_COMMON | {"horizon", "n_rays", "eps", "loewner_step"},
             {"nu", "horizon"}),
    "flow": (_COMMON | {"horizon", "rate_convention", "rate", "starts",
                        "sample_step", "beta_compensation"},
             {"nu", "sigma", "horizon", "rate_convention", "seed", "starts"}),
    "ode": (_COMMON | {"horizon", "c0", "starts", "ode_step"},
            {"nu", "horizon", "starts"}),
    "fluct": (_COMMON | {"horizon", "rate_convention", "rate", "start",
                         "replicas", "ode_step", "sde_paths"},
              {"nu", "sigma", "horizon", "rate_convention", "seed", "start",
               "replicas"}),
    "compare": (_COMMON | {"horizon", "rate_convention", "rate", "replicas",
                           "starts", "radius", "loewner_step"},
                {"nu", "sigma", "horizon", "rate_convention", "seed",
                 "replicas"}),
    "verify": ({"out", "only", "seed"}, set()),
}


def load_config(path, command):
    with open(path) as fh:
        try:
            cfg = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
    allowed, required = _SCHEMAS[command]
    _check_keys(cfg, allowed, required, "config")
    for key in ("horizon", "eps", "rate", "sample_step", "ode_step",
                "loewner_step", "beta_compensation", "c0", "radius"):
        if key in cfg:
            _require(isinstance(cfg[key], (int, float)), f"config: {key} must be numeric")
            if key not in ("beta_compensation", "c0"):
                _require(cfg[key] > 0, f"config: {key} must be positive")
    for key in ("n_points", "n_rays", "bins", "replicas", "seed", "sde_paths"):
        if key in cfg:
            _require(isinstance(cfg[key], int) and cfg[key] >= 0,
                     f"config: {key} must be a nonnegative integer")
    if "rate_convention" in cfg:
        _require(cfg["rate_convention"] in CONVENTIONS,
                 f"config: rate_convention must be one of {CONVENTIONS}")
    return cfg


def _event_log_from_config(cfg, seed):
    nu = build_angle_measure(cfg["nu"])
    sigma = build_diameter_law(cfg["sigma"])
    return nu, sigma, generate_event_log(
        nu, sigma, cfg["horizon"], cfg["rate_convention"], seed,
        rate=cfg.get("rate"))


def cmd_cluster(cfg, out, seed, verbose):
    man = Manifest(cfg)
    _, _, log = _event_log_from_config(cfg, seed)
    cluster = Cluster.from_event_log(log)
    if verbose:
        print(f"cluster: {log.n} events, total capacity {cluster.total_lcap:.6g}")
    man.add(log.to_jsonl(out / "events.jsonl"))
    boundary = trace_cluster_boundary(cluster, n_points=cfg.get("n_points", 1024),
                                      eps=cfg.get("eps", 1e-3))
    man.add(write_geometry_csv(out / "boundary.csv", boundary.vertices))
    man.add(render_svg(out / "boundary.svg", boundary))
    hist = finger_histogram(boundary, bins=cfg.get("bins", 36))
    man.add(write_json(out / "fingers.json", {
        "bin_edges": hist.bin_edges.tolist(),
        "mass": hist.mass.tolist(),
        "modes": hist.modes.tolist(),
        "threshold": hist.threshold,
        "capacity": boundary.capacity,
    }))
    man.write(out / "manifest.json")
    return 0


def cmd_hull(cfg, out, seed, verbose):
    man = Manifest(cfg)
    mu = ConstantDensity(build_angle_measure(cfg["nu"]))
    hull = trace_hull(mu, cfg["horizon"], n_rays=cfg.get("n_rays", 512),
                      eps=cfg.get("eps", 1e-3), step=cfg.get("loewner_step", 1e-3))
    if verbose:
        print(f"hull: capacity {hull.capacity:.8g} at horizon {cfg['horizon']}")
    man.add(write_geometry_csv(out / "hull.csv", hull.vertices))
    man.add(render_svg(out / "hull.svg", hull))
    man.write(out / "manifest.json")
    return 0


def cmd_flow(cfg, out, seed, verbose):
    man = Manifest(cfg)
    _, _, log = _event_log_from_config(cfg, seed)
    starts = np.asarray(cfg["starts"], dtype=float)
    step = cfg.get("sample_step", cfg["horizon"] / 400.0)
    grid = np.arange(0.0, cfg["horizon"] + step / 2, step)
    res = simulate_boundary_flow(log, starts, horizon=cfg["horizon"],
                                 sample_times=grid,
                                 beta_compensation=cfg.get("beta_compensation", 0.0))
    for k in range(res.n_points):
        man.add(write_series_csv(out / f"trajectory_{k:02d}.csv",
                                 res.times, res.values[k]))
    om = res.omega()
    for k in range(res.n_points):
        man.add(write_series_csv(out / f"omega_{k:02d}.csv", res.times, om[k]))
    man.add(write_json(out / "flow.json", {
        "seed": seed,
        "rate_convention": cfg["rate_convention"],
        "rate": log.rate,
        "n_events": int(log.n),
        "nu": cfg["nu"],
        "sigma": cfg["sigma"],
        "starts": starts.tolist(),
        "horizon": cfg["horizon"],
    }))
    man.add(render_flow_svg(out / "flow.svg", res.times, res.values))
    man.write(out / "manifest.json")
    return 0


def cmd_ode(cfg, out, seed, verbose):
    man = Manifest(cfg)
    nu = build_angle_measure(cfg["nu"])
    starts = np.asarray(cfg["starts"], dtype=float)
    res = ode_reference_flow(nu, cfg.get("c0", 0.0), starts, cfg["horizon"],
                             step=cfg.get("ode_step", 1e-3))
    for k in range(res.n_points):
        man.add(write_series_csv(out / f"ode_{k:02d}.csv", res.times, res.values[k]))
    man.add(render_flow_svg(out / "ode.svg", res.times, res.values))
    man.write(out / "manifest.json")
    return 0


def cmd_fluct(cfg, out, seed, verbose):
    man = Manifest(cfg)
    nu = build_angle_measure(cfg["nu"])
    sigma = build_diameter_law(cfg["sigma"])
    if not sigma.is_constant:
        raise ConfigError("fluct: needs a constant diameter law")
    replicas = cfg["replicas"]
    start = float(cfg["start"])
    horizon = cfg["horizon"]
    stats = particle_stats(sigma.d)
    z_final = np.empty(replicas)
    psi_T = None
    target = None
    sample = []
    for r in range(replicas):
        log = generate_event_log(nu, sigma, horizon, cfg["rate_convention"],
                                 seed + r, rate=cfg.get("rate"))
        res = fluctuation_paths(log, nu, start, horizon,
                                step=cfg.get("ode_step", 1e-3))
        z_final[r] = res.psi.values[-1] * res.z.values[-1]
        psi_T = res.psi.values[-1]
        target = res.variance_profile.values[-1]
        if r < 4:
            sample.append(res)
    grid, zpaths = limit_sde_ensemble(nu, stats.c0_hat, start, horizon,
                                      seed=seed, n_paths=cfg.get("sde_paths", 10_000))
    sde_var = float(np.var(psi_T * zpaths[:, -1])) if psi_T else float("nan")
    report = {
        "replicas": replicas,
        "d": sigma.d,
        "scale": float(np.sqrt(stats.lcap * stats.rho)),
        "variance_target": float(target),
        "variance_discrete": float(np.var(z_final)),
        "variance_sde": sde_var,
        "psi_T": float(psi_T),
    }
    if verbose:
        print(json.dumps(report, indent=2))
    man.add(write_json(out / "fluct.json", report))
    for i, res in enumerate(sample):
        man.add(write_series_csv(out / f"z_path_{i}.csv", res.z.times, res.z.values))
    man.write(out / "manifest.json")
    return 0


def cmd_compare(cfg, out, seed, verbose):
    man = Manifest(cfg)
    nu = build_angle_measure(cfg["nu"])
    sigma = build_diameter_law(cfg["sigma"])
    horizon = cfg["horizon"]
    radius = cfg.get("radius", 5.0)
    mu = ConstantDensity(nu)
    zs = radius * np.exp(2j * np.pi * np.arange(8) / 8)
    hull_vals = np.array([solve_map_at_point(mu, horizon, z,
                                             step=cfg.get("loewner_step", 1e-3))
                          for z in zs])
    rows = []
    flow_rows = []
    starts = np.asarray(cfg.get("starts", (np.arange(8) / 8).tolist()), dtype=float)
    for r in range(cfg["replicas"]):
        log = generate_event_log(nu, sigma, horizon, cfg["rate_convention"],
                                 seed + r, rate=cfg.get("rate"))
        cluster = Cluster.from_event_log(log)
        w = eval_cluster_map(cluster, zs)
        rel = np.abs(w - hull_vals) / np.abs(hull_vals)
        rows.append((seed + r, float(np.median(rel)), float(np.max(rel))))
        grid = np.linspace(0.0, horizon, 201)
        xres = simulate_boundary_flow(log, starts, horizon, sample_times=grid)
        phi = ode_reference_flow(nu, 0.0, starts, horizon)
        flow_rows.append((seed + r, flow_distance(xres, phi)))
    with open(out / "compare_map.csv", "w") as fh:
        fh.write("seed,median_rel_err,max_rel_err\n")
        for row in rows:
            fh.write(f"{row[0]},{row[1]!r},{row[2]!r}\n")
    man.add(out / "compare_map.csv")
    with open(out / "compare_flow.csv", "w") as fh:
        fh.write("seed,flow_distance\n")
        for row in flow_rows:
            fh.write(f"{row[0]},{row[1]!r}\n")
    man.add(out / "compare_flow.csv")
    man.write(out / "manifest.json")
    if verbose:
        print(f"compare: median map error {np.median([r[1] for r in rows]):.4g}, "
              f"median flow distance {np.median([r[1] for r in flow_rows]):.4g}")
    return 0


def cmd_verify(cfg, out, seed, verbose, only=None):
    from .acceptance import run_criteria
    results = run_criteria(only=only, report=print)
    write_json(out / "verify_report.json", [r.as_dict() for r in results])
    return 0 if all(r.passed for r in results) else 3


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="slitflow",
        description="slit-map aggregation, Loewner hulls and boundary flows")
    parser.add_argument("command", choices=sorted(_SCHEMAS))
    parser.add_argument("--config", help="JSON experiment config (one experiment per file)")
    parser.add_argument("--seed", type=int, help="override the config seed")
    parser.add_argument("--out", help="override the output directory")
    parser.add_argument("--threads", type=int, help="worker threads for compiled kernels")
    parser.add_argument("--verbose", action="store_true")
    parser.add_argument("--only", help="verify: comma-separated criterion numbers")
    args = parser.parse_args(argv)

    try:
        if args.command == "verify":
            cfg = {} if not args.config else load_config(args.config, "verify")
        else:
            if not args.config:
                raise ConfigError(f"{args.command}: --config is required")
            cfg = load_config(args.config, args.command)
        seed = args.seed if args.seed is not None else cfg.get("seed", 0)
        out = Path(args.out or cfg.get("out", "."))
        out.mkdir(parents=True, exist_ok=True)
        if args.threads:
            import numba
            numba.set_num_threads(max(1, args.threads))
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    handler = {
        "cluster": cmd_cluster,
        "hull": cmd_hull,
        "flow": cmd_flow,
        "ode": cmd_ode,
        "fluct": cmd_fluct,
        "compare": cmd_compare,
    }
    try:
        if args.command == "verify":
            only = None
            if args.only or cfg.get("only"):
                only = [int(tok) for tok in str(args.only or cfg["only"]).split(",")]
            return cmd_verify(cfg, out, seed, args.verbose, only=only)
        return handler[args.command](cfg, out, seed, args.verbose)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except AbsorbedError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
