"""Command-line pipeline: simulate, collect, fit, reach, activate, verify.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 failed acceptance threshold or manifest check.
"""

import argparse
import json
import os
import sys
import time
import warnings

import numpy as np

from . import ringsim as rs
from .config import (ConfigError, PipelineConfig, RunManifest, check_manifest, config_from_dict,
                     load_config, sha256_file)
from .experiments import curves_csv, numerical_example
from .koopman import (LiftedModel, MonomialBasis, RankDeficiencyWarning, StabilizationWarning,
                      fit_edmdc, one_step_residuals)
from .reach import (GridSpec, NoSamplesError, SimConfig, boundary_csv, brs_grid, brs_halfspace,
                    chain_boundary, grid_boundary, lifted_target, run_activation_experiment)
from .sysmodel import write_trajectory_csv

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_ACCEPT = 0, 2, 3, 4


class NumericalFailure(RuntimeError):
    pass


def _write_json(path, doc):
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")


def _write_text(path, text):
    with open(path, "w", newline="") as fh:
        fh.write(text)


class Run:
    """Output directory plus the manifest being assembled for it."""

    def __init__(self, command, cfg: PipelineConfig, out_dir):
        os.makedirs(out_dir, exist_ok=True)
        self.out = out_dir
        self.manifest = RunManifest(command, cfg.digest(), started=RunManifest.now())
        _write_json(self.path("config.json"), cfg.to_dict())
        self.manifest.record("outputs", self.path("config.json"), out_dir)

    def path(self, name):
        return os.path.join(self.out, name)

    def input(self, path):
        self.manifest.inputs[os.path.abspath(path)] = sha256_file(path)

    def output(self, name):
        self.manifest.record("outputs", self.path(name), self.out)

    def close(self):
        self.manifest.finished = RunManifest.now()
        return self.manifest.write(self.out)


def _tag(t_abs):
    return f"{t_abs:g}s"


def _load_model(path):
    try:
        return LiftedModel.load(path)
    except (OSError, ValueError, KeyError) as exc:
        raise ConfigError(f"model file {path}: {exc}") from None


def cmd_simulate(cfg: PipelineConfig, out_dir):
    run = Run("simulate", cfg, out_dir)
    opts = cfg.simulate
    policy = None
    if opts.adversary is not None:
        start = float(opts.adversary.get("start", 0.0))
        accel = float(opts.adversary.get("accel", cfg.input_bounds.a_min))
        duration = float(opts.adversary.get("duration", 1e9))
        k0, k1 = round(start / cfg.ring.dt), round((start + duration) / cfg.ring.dt)
        policy = lambda k, obs: accel if k0 <= k < k1 else None
    initial = None if opts.initial is None else rs.realize_state(opts.initial, cfg.ring, cfg.idm)
    ep = rs.run_episode(cfg.ring, cfg.idm, cfg.backdoor_config(opts.backdoor), opts.horizon,
                        policy, initial, cfg.av, cfg.input_bounds)
    write_trajectory_csv(ep.trajectory, run.path("trajectory.csv"))
    _write_text(run.path("vehicles.csv"), rs.vehicles_to_csv(ep.states, cfg.ring.dt))
    _write_json(run.path("episode.json"), {
        "termination": ep.termination, "collision": ep.collided,
        "collision_time": None if ep.collision_step is None else ep.collision_step * cfg.ring.dt,
        "trigger_times": [k * cfg.ring.dt for k in ep.trigger_steps],
    })
    for name in ("trajectory.csv", "vehicles.csv", "episode.json"):
        run.output(name)
    run.close()
    print(f"simulate: {ep.termination} after {len(ep.trajectory) - 1} steps, "
          f"{len(ep.trigger_steps)} trigger(s)")
    return EXIT_OK


def cmd_collect(cfg: PipelineConfig, out_dir):
    run = Run("collect", cfg, out_dir)
    ds = rs.collect_dataset(cfg.ring, cfg.idm, cfg.backdoor_config(), cfg.n_samples,
                            cfg.input_bounds, cfg.seed, cfg.state_bounds, cfg.episode_steps,
                            cfg.av)
    rs.write_dataset_csv(ds, run.path("dataset.csv"))
    run.output("dataset.csv")
    run.close()
    print(f"collect: {len(ds)} transitions")
    return EXIT_OK


def cmd_fit(cfg: PipelineConfig, out_dir, data_path):
    run = Run("fit", cfg, out_dir)
    try:
        ds = rs.read_dataset_csv(data_path)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"dataset {data_path}: {exc}") from None
    run.input(data_path)
    n_train = max(1, int(round(len(ds) * (1 - cfg.test_fraction))))
    train, test = ds.split(n_train)
    basis = MonomialBasis(cfg.degree)
    with warnings.catch_warnings():
        warnings.simplefilter("error", RankDeficiencyWarning)
        try:
            ls = fit_edmdc(train.X, train.U, train.X_next, basis, cfg.ring.dt)
        except RankDeficiencyWarning as exc:
            raise NumericalFailure(str(exc)) from None
        except ValueError as exc:
            raise ConfigError(f"n_samples: {exc}") from None
    ls.save(run.path("model_ls.json"))
    run.output("model_ls.json")
    model = ls
    if cfg.gamma is not None:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", StabilizationWarning)
            model = ls.stabilized(cfg.gamma)
        for w in caught:
            print(f"fit: warning: {w.message}", file=sys.stderr)
    model.save(run.path("model.json"))
    run.output("model.json")
    reports = {}
    if len(test):
        for name, m in (("raw-LS", ls), ("model", model)):
            rep = one_step_residuals(m, test.X, test.U, test.X_next, disjoint=True)
            reports[name] = rep.to_dict()
    _write_json(run.path("error_report.json"), reports)
    run.output("error_report.json")
    run.close()
    print(f"fit: N={model.N}, {model.stability_tag}, train={len(train)}, test={len(test)}")
    return EXIT_OK


def cmd_reach(cfg: PipelineConfig, out_dir, model_path):
    model = _load_model(model_path)
    run = Run("reach", cfg, out_dir)
    run.input(model_path)
    target = lifted_target(cfg.backdoor, model.basis)
    grid = GridSpec.from_bounds(cfg.state_bounds, cfg.grid_res)
    steps = [int(round(t / model.dt)) for t in cfg.horizons]
    t0 = time.perf_counter()
    chain = brs_halfspace(model, target, max(steps), cfg.input_bounds)
    rows = [(0, chain_boundary(chain, grid, 0))]
    rows += [(k, chain_boundary(chain, grid, k, cfg.within_horizon)) for k in steps]
    _write_text(run.path("brs_boundary.csv"), boundary_csv(rows))
    _write_json(run.path("chain.json"), {
        "K": chain.K, "dt": chain.dt, "within_horizon": cfg.within_horizon,
        "weights": chain.weights.tolist(), "offsets": chain.offsets.tolist(),
        "couplings": chain.couplings.tolist(),
    })
    run.output("brs_boundary.csv")
    run.output("chain.json")
    elapsed = time.perf_counter() - t0
    if model.basis.degree == 1:
        grows = []
        for t_abs in cfg.horizons:
            vg = brs_grid(model, target, t_abs, grid, cfg.input_bounds, cfg.within_horizon)
            name = f"value_grid_{_tag(t_abs)}.json"
            vg.save(run.path(name))
            run.output(name)
            grows.append((int(round(t_abs / model.dt)), grid_boundary(vg)))
        _write_text(run.path("grid_boundary.csv"), boundary_csv(grows))
        run.output("grid_boundary.csv")
    run.close()
    print(f"reach: chain K={chain.K} in {elapsed:.2f} s "
          f"({'grid exported' if model.basis.degree == 1 else 'no grid, N > 3'})")
    return EXIT_OK


def _pairs_csv(report, n_pairs=10):
    lines = ["sample,source,k,x1,x2,x3"]
    for i, (pred, res) in enumerate(zip(report.predicted[:n_pairs], report.results)):
        for source, states in (("predicted", pred.states), ("simulated", res.trajectory.states)):
            for k, x in enumerate(states):
                lines.append(f"{i},{source},{k}," + ",".join(repr(float(v)) for v in x))
    return "\n".join(lines) + "\n"


def cmd_activate(cfg: PipelineConfig, out_dir, model_path):
    model = _load_model(model_path)
    if not np.isclose(model.dt, cfg.ring.dt):
        raise ConfigError(f"ring.dt: {cfg.ring.dt} differs from the model's dt {model.dt}")
    run = Run("activate", cfg, out_dir)
    run.input(model_path)
    sim = SimConfig(cfg.ring, cfg.idm, cfg.backdoor_config(), cfg.av, cfg.input_bounds,
                    cfg.follow_through)
    reports = run_activation_experiment(model, sim, cfg.horizons, cfg.activation_samples,
                                        cfg.seed, cfg.state_bounds, cfg.within_horizon,
                                        cfg.terminal_tolerance)
    docs = [r.to_dict() for r in reports]
    _write_json(run.path("activation_report.json"), docs)
    run.output("activation_report.json")
    for r in reports:
        name = f"pairs_{_tag(r.t_abs)}.csv"
        _write_text(run.path(name), _pairs_csv(r))
        run.output(name)
    run.close()
    failed = False
    for d in docs:
        print(f"activate: |t|={d['t_abs']:g} s rate={d['rate']:.3f} "
              f"({d['n_activated']}/{d['n_samples']}), collisions={d['n_collisions']}")
        failed |= d["rate"] < cfg.min_activation_rate
        failed |= (d["frac_terminal_within_tolerance"] or 0.0) < 1.0
    return EXIT_ACCEPT if cfg.check_thresholds and failed else EXIT_OK


def cmd_verify(cfg: PipelineConfig, out_dir):
    run = Run("verify", cfg, out_dir)
    gamma = 0.999 if cfg.gamma is None else cfg.gamma
    result = numerical_example(range(cfg.seed, cfg.seed + cfg.verify_seeds), gamma=gamma)
    _write_text(run.path("propagated_error.csv"), curves_csv(result, "propagated"))
    _write_text(run.path("one_step_error.csv"), curves_csv(result, "one_step"))
    doc = result.to_dict()
    _write_json(run.path("verify_report.json"), doc)
    for name in ("propagated_error.csv", "one_step_error.csv", "verify_report.json"):
        run.output(name)
    run.close()
    print(f"verify: bound holds={doc['bound_holds']}, one-step ratio={doc['one_step_ratio']:.3f}")
    ok = doc["bound_holds"] and doc["one_step_ratio"] < 2.0
    return EXIT_ACCEPT if cfg.check_thresholds and not ok else EXIT_OK


def cmd_check(out_dir):
    try:
        bad = check_manifest(out_dir)
    except (OSError, ValueError, TypeError) as exc:
        print(f"manifest-check: cannot read manifest in {out_dir}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    for line in bad:
        print(f"manifest-check: {line}", file=sys.stderr)
    print("manifest-check: ok" if not bad else f"manifest-check: {len(bad)} problem(s)")
    return EXIT_OK if not bad else EXIT_ACCEPT


def build_parser():
    p = argparse.ArgumentParser(prog="trigreach", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="JSON pipeline config")
        sp.add_argument("--out", default="out", help="output directory")
        sp.add_argument("--seed", type=int, help="override the config seed")
        sp.add_argument("--d", type=int, dest="degree", help="monomial degree")
        sp.add_argument("--gamma", type=float, help="stability bound (<= 0 disables)")
        sp.add_argument("--horizons", type=float, nargs="+", help="reach times in seconds")
        sp.add_argument("--grid-res", type=int, help="grid nodes per axis")
        sp.add_argument("--within-horizon", action="store_true", default=None,
                        help="reach the target at any step up to the horizon")
        sp.add_argument("--check-thresholds", action="store_true", default=None,
                        help="exit 4 when acceptance thresholds fail")
        return sp

    common(sub.add_parser("simulate", help="run a ring episode"))
    common(sub.add_parser("collect", help="collect a transition dataset"))
    common(sub.add_parser("fit", help="fit a lifted model")).add_argument(
        "--data", required=True, help="dataset CSV")
    common(sub.add_parser("reach", help="backward reachable sets")).add_argument(
        "--model", required=True, help="model JSON")
    common(sub.add_parser("activate", help="closed-loop activation experiment")).add_argument(
        "--model", required=True, help="model JSON")
    common(sub.add_parser("verify", help="linear numerical example"))
    sub.add_parser("manifest-check", help="re-hash outputs of a run").add_argument(
        "out", help="run output directory")
    return p


def resolve_config(args) -> PipelineConfig:
    if args.config:
        cfg = load_config(args.config)
    elif args.seed is not None:
        cfg = PipelineConfig(seed=args.seed)
    else:
        raise ConfigError("seed: required; pass --seed or a --config with a seed")
    overrides = {"seed": args.seed, "degree": args.degree, "horizons": args.horizons,
                 "grid_res": args.grid_res, "within_horizon": args.within_horizon,
                 "check_thresholds": args.check_thresholds}
    changes = {k: v for k, v in overrides.items() if v is not None}
    if args.gamma is not None:
        changes["gamma"] = args.gamma if args.gamma > 0 else None
    if changes:
        doc = cfg.to_dict()
        doc.update(changes)
        cfg = config_from_dict(doc)
    return cfg


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.command == "manifest-check":
        return cmd_check(args.out)
    try:
        cfg = resolve_config(args)
        if args.command == "simulate":
            return cmd_simulate(cfg, args.out)
        if args.command == "collect":
            return cmd_collect(cfg, args.out)
        if args.command == "fit":
            return cmd_fit(cfg, args.out, args.data)
        if args.command == "reach":
            return cmd_reach(cfg, args.out, args.model)
        if args.command == "activate":
            return cmd_activate(cfg, args.out, args.model)
        return cmd_verify(cfg, args.out)
    except ConfigError as exc:
        print(f"trigreach: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalFailure, NoSamplesError, np.linalg.LinAlgError) as exc:
        print(f"trigreach: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
