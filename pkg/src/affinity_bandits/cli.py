"""Command-line entry point: experiment runs, figure data, bounds, fuzzing.

Subcommands:
  run           execute an experiment config (JSON) -> aggregate CSV + JSONL
  figure        regenerate a bundled figure's data files by id
  bounds        evaluate the closed-form bound report for an instance config
  check-lemmas  run the combinatorial fuzz suites, print a pass/fail table
  coupling      paired-run construction: per-run verdict CSV + aggregates

Exit codes: 0 success, 1 runtime failure (including lemma-suite violations),
2 configuration error. Every data row carries the config content digest and
the seed that produced it, so any row can be regenerated.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from importlib import resources

from .bias import BiasFunction
from .bounds import (Instance, bound_report, fmin_table,
                     proxy_inequality_check, small_bias_set,
                     stability_minimal_witness, stability_recursion_check)
from .coupling import CouplingConfig, coupled_monte_carlo, linear_regret_stat
from .envs import Environment
from .policies import policy_from_config
from .rng import make_generator
from .simulate import (config_digest, monte_carlo, run_from_config,
                       write_aggregate_csv, write_jsonl, write_trace_csv)

FIGURE_IDS = ("fig3", "fig4", "fig8", "fig9", "fig10", "fig11", "fig12")


class ConfigError(Exception):
    """Invalid configuration; message names the file and offending field."""


def load_json(path: str) -> dict:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror or exc}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc


def bundled_config_path(name: str):
    return resources.files("affinity_bandits").joinpath("configs", f"{name}.json")


def load_bundled_config(name: str) -> dict:
    path = bundled_config_path(name)
    try:
        return json.loads(path.read_text())
    except FileNotFoundError as exc:
        raise ConfigError(f"no bundled config named {name!r}") from exc


def _require(cfg: dict, key: str, where: str):
    if key not in cfg:
        raise ConfigError(f"{where}: missing required field '{key}'")
    return cfg[key]


def validate_experiment_config(cfg: dict, where: str) -> dict:
    """Validate an experiment config against module preconditions.

    Returns the config unchanged; raises ConfigError naming the first
    offending field.
    """
    _require(cfg, "name", where)
    kind = cfg.get("type", "sweep")
    if kind not in ("sweep", "trajectory"):
        raise ConfigError(f"{where}: type must be 'sweep' or 'trajectory'")
    repeats = _require(cfg, "repeats" if kind == "sweep" else "paths", where)
    if not isinstance(repeats, int) or repeats < 1:
        raise ConfigError(f"{where}: repeats/paths must be a positive integer")
    if not isinstance(cfg.get("base_seed", 0), int):
        raise ConfigError(f"{where}: base_seed must be an integer")
    if kind == "sweep":
        points = _require(cfg, "points", where)
        policies = _require(cfg, "policies", where)
        _require(cfg, "statistics", where)
        for p, pol in enumerate(policies):
            try:
                policy_from_config(pol)
            except (ValueError, KeyError, TypeError) as exc:
                raise ConfigError(f"{where}: policies[{p}]: {exc}") from exc
        for i, point in enumerate(points):
            loc = f"{where}: points[{i}]"
            _require(point, "point_id", loc)
            env_cfg = _require(point, "env", loc)
            try:
                Environment.from_config(env_cfg)
            except (ValueError, KeyError, TypeError, IndexError) as exc:
                raise ConfigError(f"{loc}.env: {exc}") from exc
            horizon = point.get("horizon", cfg.get("horizon"))
            if not isinstance(horizon, int) or horizon < 1:
                raise ConfigError(f"{loc}: horizon must be a positive integer")
            for e, ev in enumerate(point.get("events", cfg.get("events", []))):
                for k in ("name", "arm", "threshold"):
                    _require(ev, k, f"{loc}: events[{e}]")
    else:
        series = _require(cfg, "series", where)
        _require(cfg, "horizon", where)
        _require(cfg, "arm", where)
        for i, s in enumerate(series):
            loc = f"{where}: series[{i}]"
            _require(s, "series", loc)
            try:
                Environment.from_config(_require(s, "env", loc))
            except (ValueError, KeyError, TypeError, IndexError) as exc:
                raise ConfigError(f"{loc}.env: {exc}") from exc
            try:
                policy_from_config(_require(s, "policy", loc))
            except (ValueError, KeyError, TypeError) as exc:
                raise ConfigError(f"{loc}.policy: {exc}") from exc
    return cfg


def run_sweep_config(cfg: dict, out_dir: str, threads: int | None = None,
                     base_seed_override: int | None = None,
                     full_trace: bool = False) -> list[str]:
    """Run a sweep config: one monte_carlo per (point, policy) cell.

    Writes <name>.csv (aggregate rows, one per cell and statistic) and
    <name>.jsonl (per-repeat rows). With full_trace, additionally writes one
    long-format trace CSV per repeat. Returns the written paths.
    """
    name = cfg["name"]
    repeats = cfg["repeats"]
    base_seed = cfg.get("base_seed", 0) if base_seed_override is None \
        else base_seed_override
    statistics = cfg["statistics"]
    param_name = cfg.get("param_name", "point")
    os.makedirs(out_dir, exist_ok=True)
    csv_path = os.path.join(out_dir, f"{name}.csv")
    jsonl_path = os.path.join(out_dir, f"{name}.jsonl")
    paths = [csv_path, jsonl_path]
    rows = []
    first_jsonl = True
    for point in cfg["points"]:
        horizon = point.get("horizon", cfg.get("horizon"))
        events = point.get("events", cfg.get("events", []))
        env = Environment.from_config(point["env"])
        for pol_cfg in point.get("policies", cfg["policies"]):
            pol_name = pol_cfg["policy"] if isinstance(pol_cfg, dict) else pol_cfg
            result = monte_carlo(env, pol_cfg, horizon, repeats,
                                 base_seed=base_seed, events=events,
                                 threads=threads)
            series = point.get("series", pol_name)
            for stat in statistics:
                value, stderr = result.mean_stderr(stat)
                rows.append({
                    "point_id": point["point_id"],
                    "policy": pol_name,
                    "series": series,
                    "param_name": param_name,
                    "param_value": point.get("param_value", ""),
                    "statistic": stat,
                    "value": value,
                    "stderr": stderr,
                    "repeats": repeats,
                    "base_seed": base_seed,
                    "horizon": horizon,
                    "digest": result.digest,
                })
            write_jsonl(result, jsonl_path, append=not first_jsonl)
            first_jsonl = False
            if full_trace:
                for seed in range(base_seed + 1, base_seed + repeats + 1):
                    trace = run_from_config(result.config, seed,
                                            full_trace=True)
                    tpath = os.path.join(
                        out_dir, f"{name}_{point['point_id']}_{pol_name}"
                                 f"_seed{seed}.trace.csv")
                    write_trace_csv(trace, tpath, digest=result.digest)
                    paths.append(tpath)
    write_aggregate_csv(rows, csv_path)
    return paths


def run_trajectory_config(cfg: dict, out_dir: str, threads: int | None = None,
                          base_seed_override: int | None = None) -> list[str]:
    """Run a trajectory config: per-path curves at geometric checkpoints.

    Writes <name>.csv with columns series,seed,t,value,statistic,digest;
    value is count[arm](t)/sqrt(t).
    """
    import csv
    name = cfg["name"]
    paths = cfg["paths"]
    horizon = cfg["horizon"]
    arm = cfg["arm"]
    statistic = cfg.get("statistic", "subopt_pulls_over_sqrt_t")
    base_seed = cfg.get("base_seed", 0) if base_seed_override is None \
        else base_seed_override
    os.makedirs(out_dir, exist_ok=True)
    csv_path = os.path.join(out_dir, f"{name}.csv")
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["series", "seed", "t", "value", "statistic", "digest"])
        for s in cfg["series"]:
            env = Environment.from_config(s["env"])
            result = monte_carlo(env, s["policy"], horizon, paths,
                                 base_seed=base_seed, threads=threads)
            for row in result.per_repeat:
                for t, counts in row["snapshots"]:
                    writer.writerow([s["series"], row["seed"], t,
                                     repr(counts[arm] / math.sqrt(t)),
                                     statistic, result.digest])
    return [csv_path]


def run_experiment_config(cfg: dict, out_dir: str, threads: int | None = None,
                          base_seed_override: int | None = None,
                          full_trace: bool = False) -> list[str]:
    if cfg.get("type", "sweep") == "trajectory":
        return run_trajectory_config(cfg, out_dir, threads, base_seed_override)
    return run_sweep_config(cfg, out_dir, threads, base_seed_override,
                            full_trace=full_trace)


# ---------------------------------------------------------------------------
# Subcommands

def cmd_run(args) -> int:
    cfg = load_json(args.config)
    validate_experiment_config(cfg, args.config)
    paths = run_experiment_config(cfg, args.out, threads=args.threads,
                                  base_seed_override=args.seed,
                                  full_trace=args.full_trace)
    for p in paths:
        print(p)
    return 0


def cmd_figure(args) -> int:
    if args.id not in FIGURE_IDS:
        raise ConfigError(
            f"unknown figure id {args.id!r}; known: {', '.join(FIGURE_IDS)}")
    cfg = load_bundled_config(args.id)
    validate_experiment_config(cfg, f"bundled config {args.id}")
    paths = run_experiment_config(cfg, args.out, threads=args.threads,
                                  base_seed_override=args.seed)
    for p in paths:
        print(p)
    return 0


def _json_safe(obj):
    if isinstance(obj, float):
        if math.isinf(obj):
            return "inf" if obj > 0 else "-inf"
        if math.isnan(obj):
            return "nan"
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    return obj


def cmd_bounds(args) -> int:
    cfg = load_json(args.instance)
    try:
        inst = Instance.from_config(cfg)
    except (ValueError, KeyError, TypeError) as exc:
        raise ConfigError(f"{args.instance}: {exc}") from exc
    report = bound_report(inst, a=cfg.get("a", args.a))
    text = json.dumps(_json_safe(report), indent=2, sort_keys=True)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        path = os.path.join(args.out, "bounds.json")
        with open(path, "w") as fh:
            fh.write(text + "\n")
        print(path)
    else:
        print(text)
    return 0


def _suite_pigeonhole(gen, deadline) -> tuple[int, int]:
    trials = violations = 0
    while time.monotonic() < deadline:
        k = int(gen.integers(2, 65))
        fractions = gen.dirichlet([1.0] * k)
        for beta in (1.5, 2.0, 4.0, max(1.01, math.log(k))):
            trials += 1
            try:
                small_bias_set(fractions, beta)
            except RuntimeError:
                violations += 1
    return trials, violations


def _suite_stability(gen, deadline) -> tuple[int, int]:
    trials = violations = 0
    while time.monotonic() < deadline:
        k = float(gen.integers(3, 65))
        lo, hi = sorted(1.0 + (k - 1.0) * gen.random(2))
        if not (1.0 < lo < hi < k):
            continue
        t = 10.0 ** gen.uniform(-2, 3)
        m = int(gen.integers(1, 9))
        x = stability_minimal_witness(k, lo, hi, t, m)
        trials += 1
        hyp, concl = stability_recursion_check(k, lo, hi, t, x, details=True)
        if not (hyp and concl):
            violations += 1
    return trials, violations


def _suite_proxy(gen, deadline) -> tuple[int, int]:
    trials = violations = 0
    bias_cfgs = [
        {"kind": "power", "alpha": 1.0},
        {"kind": "sigmoid"},
        {"kind": "clip_min", "c1": 0.6, "inner": {"kind": "power", "alpha": 2.0}},
    ]
    while time.monotonic() < deadline:
        k = int(gen.integers(2, 6))
        means = sorted(float(m) for m in gen.uniform(0.1, 0.9, k))
        f_cfg = bias_cfgs[int(gen.integers(0, len(bias_cfgs)))]
        policy = ["uniform", "ucb1"][int(gen.integers(0, 2))]
        cfg = {
            "env": {"means": means,
                    "bias": {"f": f_cfg, "initial_pulls": [1] * k},
                    "noise": "bernoulli", "mode": "mask"},
            "policy": {"policy": policy},
            "horizon": 1500,
        }
        trace = run_from_config(cfg, int(gen.integers(1, 2 ** 31)),
                                full_trace=True)
        beta_prime = 0.8 * k
        for arm in range(k):
            for n0 in (10.0, 100.0):
                trials += 1
                ok, _, _, _ = proxy_inequality_check(trace, arm, n0, beta_prime)
                if not ok:
                    violations += 1
    return trials, violations


def _suite_fmin(gen, deadline) -> tuple[int, int]:
    trials = violations = 0
    kinds = [lambda: {"kind": "power", "alpha": 1.0 + 2.0 * gen.random()},
             lambda: {"kind": "sigmoid"},
             lambda: {"kind": "constant", "c": 0.3 + 0.7 * gen.random()}]
    while time.monotonic() < deadline:
        k = int(gen.integers(2, 7))
        n = int(10 ** gen.uniform(4, 6))
        means = sorted(float(m) for m in gen.uniform(0.1, 0.9, k))
        f = BiasFunction.from_config(kinds[int(gen.integers(0, 3))]())
        regime_cap = 2.0 ** 7 * math.log(12.0 / math.pi ** 2 * k * k * n)
        pulls = [int(gen.integers(1, max(2, int(regime_cap)))) for _ in range(k)]
        inst = Instance(means, f, pulls, n)
        table = fmin_table(inst, max_round=4)
        floor_all = f(min(pulls) / (inst.t0 + k - 1))
        floor_r2 = f(1.0 / (15.0 * k))
        for r, row in enumerate(table.fbar, start=1):
            for v in row:
                if v is None:
                    continue
                trials += 1
                if v < floor_all - 1e-12:
                    violations += 1
                if r >= 2 and v < floor_r2 - 1e-12:
                    violations += 1
    return trials, violations


def cmd_check_lemmas(args) -> int:
    suites = [
        ("pigeonhole", _suite_pigeonhole),
        ("stability-recursion", _suite_stability),
        ("proxy-inequality", _suite_proxy),
        ("fmin-scaling", _suite_fmin),
    ]
    per_suite = max(0.5, args.budget / len(suites))
    print(f"{'suite':<22}{'trials':>10}{'violations':>12}  status")
    failed = False
    for i, (name, fn) in enumerate(suites):
        gen = make_generator(args.seed, 100 + i)
        trials, violations = fn(gen, time.monotonic() + per_suite)
        status = "PASS" if violations == 0 and trials > 0 else "FAIL"
        if status == "FAIL":
            failed = True
        print(f"{name:<22}{trials:>10}{violations:>12}  {status}")
    return 1 if failed else 0


def cmd_coupling(args) -> int:
    import csv
    config = CouplingConfig.paper_instance(n=args.n)
    digest = config_digest(config.to_config())
    verdicts = coupled_monte_carlo(config, args.repeats, base_seed=args.seed,
                                   threads=args.threads)
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, "coupling_verdicts.csv")
    cols = ["seed", "dominance_ok", "queue_identity_ok", "b_final",
            "sufficient_event", "break_reason", "break_t",
            "bias_count_opt", "bias_count_subopt", "static_count_opt",
            "static_count_subopt", "digest"]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(cols)
        for v in verdicts:
            writer.writerow([
                v["seed"], v["dominance_ok"], v["queue_identity_ok"],
                v["b_final"], v["sufficient_event"],
                v["break_reason"] or "", v["break_t"] or "",
                v["bias_counts"][0], v["bias_counts"][1],
                v["static_counts"][0], v["static_counts"][1], digest,
            ])
    n_dom = sum(not v["dominance_ok"] for v in verdicts)
    n_queue = sum(not v["queue_identity_ok"] for v in verdicts)
    mean_frac = sum(v["bias_subopt_frac"] for v in verdicts) / len(verdicts)
    print(path)
    print(f"runs={len(verdicts)} dominance_violations={n_dom} "
          f"queue_identity_violations={n_queue} "
          f"mean_bias_subopt_frac={mean_frac:.4f}")
    if args.regret_repeats > 0:
        stat = linear_regret_stat(config, args.regret_repeats,
                                  base_seed=args.seed, threads=args.threads)
        print(f"linear_regret: P(T_subopt >= 0.99n)="
              f"{stat['prob_suboptimal_ge_99']:.3f} "
              f"mean_regret_over_n={stat['mean_regret_over_n']:.4f}")
    return 1 if (n_dom or n_queue) else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="affinity-bandits",
        description="Biased-feedback bandit simulation and verification toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, seed_default=None):
        p.add_argument("--threads", type=int, default=None,
                       help="worker pool size (default: AFFINITY_BANDITS_THREADS "
                            "or CPU count)")
        p.add_argument("--out", default="data",
                       help="output directory (default: ./data)")
        p.add_argument("--seed", type=int, default=seed_default,
                       help="override the config base seed")

    p_run = sub.add_parser("run", help="run an experiment config")
    p_run.add_argument("config", help="path to experiment config JSON")
    add_common(p_run)
    p_run.add_argument("--full-trace", action="store_true",
                       help="retain full per-step traces in memory "
                            "(diagnostic; summaries are unchanged)")
    p_run.set_defaults(fn=cmd_run)

    p_fig = sub.add_parser("figure", help="regenerate bundled figure data")
    p_fig.add_argument("id", help=f"figure id: {', '.join(FIGURE_IDS)}")
    add_common(p_fig)
    p_fig.set_defaults(fn=cmd_figure)

    p_bounds = sub.add_parser("bounds", help="closed-form bound report")
    p_bounds.add_argument("instance", help="instance config JSON path")
    p_bounds.add_argument("--a", type=float, default=0.5,
                          help="consistency exponent for the lower bound")
    p_bounds.add_argument("--out", default=None,
                          help="write bounds.json here instead of stdout")
    p_bounds.set_defaults(fn=cmd_bounds)

    p_lem = sub.add_parser("check-lemmas", help="fuzz the combinatorial lemmas")
    p_lem.add_argument("--budget", type=float, default=20.0,
                       help="total time budget in seconds (default 20)")
    p_lem.add_argument("--seed", type=int, default=7,
                       help="master seed for the fuzzers")
    p_lem.set_defaults(fn=cmd_check_lemmas)

    p_coup = sub.add_parser("coupling", help="paired-run dominance checks")
    p_coup.add_argument("--n", type=int, default=20000, help="horizon")
    p_coup.add_argument("--repeats", type=int, default=100)
    p_coup.add_argument("--regret-repeats", type=int, default=0,
                        help="also run the plain biased-UCB regret statistic")
    add_common(p_coup, seed_default=0)
    p_coup.set_defaults(fn=cmd_coupling)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
