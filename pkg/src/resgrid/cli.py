"""Command-line entry point: ``resgrid {simulate,compare,sweep} --config FILE``.

Exit codes: 0 success, 1 internal error, 2 invalid configuration,
3 infeasible scenario (essential demand cannot be met in some slot).
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np
import yaml
from pydantic import ValidationError

from resgrid.config import ConfigFile, load_config
from resgrid.errors import ConfigurationError, DomainError, InfeasibleDemandError, RationalPricingError
from resgrid.simkit import POLICIES, build_trace, compare_runs, run_policy, sweep

log = logging.getLogger("resgrid")

EXIT_OK, EXIT_INTERNAL, EXIT_CONFIG, EXIT_INFEASIBLE = 0, 1, 2, 3


class UsageError(Exception):
    """Command-line precondition failed (reported as an invalid configuration)."""


def _overrides(args) -> dict:
    out = {}
    if args.seed is not None:
        out["seed"] = args.seed
    if args.v is not None:
        out["v"] = args.v
    if args.epsilon is not None:
        out["epsilon"] = args.epsilon
    return out


def _load(args) -> tuple[ConfigFile, Path]:
    cfg = load_config(args.config, _overrides(args))
    out_dir = Path(args.out_dir or cfg.output.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    return cfg, out_dir


def _seeds(args, cfg: ConfigFile) -> list[int]:
    return [args.seed] if args.seed is not None else list(cfg.seeds)


def cmd_simulate(args) -> int:
    cfg, out_dir = _load(args)
    scenario = cfg.to_scenario()
    summary = run_policy(scenario, args.policy)
    stem = f"{args.policy}_seed{scenario.seed}"
    summary.write_csv(out_dir / f"{stem}_slots.csv")
    summary.write_json(out_dir / f"{stem}_summary.json")
    log.info("%s: total cost %.6g, worst delay %d", stem, summary.total_cost, summary.worst_delay)
    return EXIT_OK


def cmd_compare(args) -> int:
    cfg, out_dir = _load(args)
    policies = list(dict.fromkeys(cfg.policies))
    if len(policies) < 2:
        raise UsageError("compare needs at least two distinct policies in 'policies'")
    rows, series_path = [], out_dir / "compare_series.csv"
    per_policy: dict[str, dict[str, list[float]]] = {p: {"total_cost": [], "time_average_q": []} for p in policies}
    with open(series_path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(
            ["seed", "t"] + [f"cum_cost[{p}]" for p in policies] + [f"log10_Q[{p}]" for p in policies]
        )
        for seed in _seeds(args, cfg):
            scenario = cfg.to_scenario(seed=seed)
            trace = build_trace(scenario)
            runs = [run_policy(scenario, p, trace) for p in policies]
            report = compare_runs(runs)
            for t in range(scenario.horizon):
                writer.writerow(
                    [seed, t]
                    + [repr(float(report.cumulative_cost[lab][t])) for lab in report.labels]
                    + [repr(float(report.log10_queue[lab][t])) for lab in report.labels]
                )
            row = {"seed": seed}
            for p, s in zip(policies, runs):
                row[f"total_cost[{p}]"] = s.total_cost
                row[f"time_average_q[{p}]"] = s.time_average_q
                row[f"worst_delay[{p}]"] = s.worst_delay
                per_policy[p]["total_cost"].append(s.total_cost)
                per_policy[p]["time_average_q"].append(s.time_average_q)
            rows.append(row)

    with open(out_dir / "compare_report.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        head = list(rows[0])
        writer.writerow(head)
        for row in rows:
            writer.writerow([repr(row[k]) if isinstance(row[k], float) else row[k] for k in head])

    means = {
        p: {k: float(np.mean(v)) for k, v in stats.items()} for p, stats in per_policy.items()
    }
    with open(out_dir / "compare_summary.json", "w") as fh:
        json.dump({"policies": policies, "seeds": [r["seed"] for r in rows], "means": means}, fh, indent=2)
        fh.write("\n")
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg, out_dir = _load(args)
    scenario = cfg.to_scenario()
    v_values = [args.v] if args.v is not None else cfg.sweep.v
    eps_values = [args.epsilon] if args.epsilon is not None else cfg.sweep.epsilon
    seeds = [args.seed] if args.seed is not None else cfg.sweep.seeds
    rows = sweep(scenario, v_values, eps_values, seeds, jobs=args.jobs)
    with open(out_dir / "sweep.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["v", "epsilon", "seed", "total_cost", "time_average_q", "worst_delay", "delay_bound"])
        for r in rows:
            writer.writerow([
                repr(float(r.v)), repr(float(r.epsilon)), r.seed,
                repr(r.total_cost), repr(r.time_average_q), r.worst_delay, r.delay_bound,
            ])
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="resgrid", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="scenario YAML file")
        p.add_argument("--seed", type=int, help="override the scenario seed (or seed list)")
        p.add_argument("--out-dir", help="output directory (default: output.out_dir from the config)")
        p.add_argument("--v", type=float, help="override the Lyapunov weight V")
        p.add_argument("--epsilon", type=float, help="override the virtual-queue growth epsilon")
        p.add_argument("-q", "--quiet", action="store_true")

    p_sim = sub.add_parser("simulate", help="run one policy and write the slot log and summary")
    common(p_sim)
    p_sim.add_argument("--policy", choices=POLICIES, default="bts_lo")
    p_sim.set_defaults(func=cmd_simulate)

    p_cmp = sub.add_parser("compare", help="run every configured policy on shared traces")
    common(p_cmp)
    p_cmp.set_defaults(func=cmd_compare)

    p_sw = sub.add_parser("sweep", help="BTS-LO cost/delay table over (V, epsilon, seed)")
    common(p_sw)
    p_sw.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    p_sw.set_defaults(func=cmd_sweep)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO, format="%(message)s")
    try:
        return args.func(args)
    except ValidationError as exc:
        for err in exc.errors():
            loc = ".".join(str(x) for x in err["loc"])
            print(f"invalid config: {loc}: {err['msg']}", file=sys.stderr)
        return EXIT_CONFIG
    except (ConfigurationError, DomainError, RationalPricingError, UsageError, yaml.YAMLError, OSError) as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InfeasibleDemandError as exc:
        print(f"infeasible scenario: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except Exception as exc:  # noqa: BLE001
        log.exception("internal error: %s", exc)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
