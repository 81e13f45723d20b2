"""
Command line entry point (``python -m app``).

    relaybeam run --config cfg.json [--seeds N] [--policies genie,drl] [--out DIR]
    relaybeam grid --config cfg.json [--out DIR]
    relaybeam gradcheck [--nets 20] [--config cfg.json]
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Sequence

from app.agent.ddpg import train, write_training_log
from app.baselines.baselines import (
    GridSpec,
    estimate_tau_max,
    grid_search_thresholds,
    write_threshold_table,
)
from app.core.config import ExperimentConfig, build_config, load_config
from app.core.errors import RelayBeamError
from app.engine.experiment_engine import ExperimentEngine
from app.engine.results import emit_csv, emit_plotdata
from app.env.relay_env import state_dim
from app.nn.checkpoint import save_mlp
from app.nn.gradcheck import run_gradcheck

logger = logging.getLogger("relaybeam")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def _load(path: str | None) -> ExperimentConfig:
    return load_config(path) if path else build_config({})


def _override(cfg: ExperimentConfig, seeds: int | None, policies: str | None) -> ExperimentConfig:
    data = cfg.model_dump()
    if seeds is not None:
        data["seeds"] = list(range(seeds))
    if policies:
        data["policies"] = [p.strip() for p in policies.split(",") if p.strip()]
    return build_config(data)


# ── Commands ───────────────────────────────────────────────────────

def cmd_run(args: argparse.Namespace) -> int:
    cfg = _override(_load(args.config), args.seeds, args.policies)
    table = ExperimentEngine().run_sweep(cfg, horizon=args.horizon)
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    emit_csv(table, out / "results.csv")
    emit_plotdata(table, out / "plotdata.csv")
    print(table.to_frame().to_string(index=False))

    if "drl" in cfg.policies and args.out is not None:
        point = cfg.with_override(cfg.sweep.name, cfg.sweep.values[0])
        result = train(point, cfg.seeds[0], args.horizon)
        save_mlp(result.actor, out / "actor.json")
        save_mlp(result.critic, out / "critic.json")
        write_training_log(result.log, out / "training_log.csv")
    return EXIT_FAIL if table.failures else EXIT_OK


def cmd_grid(args: argparse.Namespace) -> int:
    cfg = _load(args.config)
    point = cfg.with_override(cfg.sweep.name, cfg.sweep.values[0])
    tau_max = point.grid_tau_max or estimate_tau_max(point, horizon=args.horizon)
    result = grid_search_thresholds(
        point, GridSpec(tau_max=tau_max, n_points=point.grid_points), horizon=args.horizon
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_threshold_table(result.table, out / "thresholds.csv")
    print(
        f"tau_max={tau_max:.6g} best tau_relay={result.best.tau_relay:.6g} "
        f"tau_mode={result.best.tau_mode:.6g} mean_reward={result.best_reward:.6g}"
    )
    return EXIT_OK


def cmd_gradcheck(args: argparse.Namespace) -> int:
    cfg = _load(args.config)
    dim = state_dim(cfg.n_relays, cfg.include_mode)
    reports = run_gradcheck(dim, cfg.ddpg.hidden, n_nets=args.nets, seed=args.seed)
    ok = True
    for name, report in reports.items():
        status = "ok" if report.passed(args.tol) else "FAIL"
        ok = ok and report.passed(args.tol)
        print(f"{name}: max relative error {report.max_rel_error:.3e} ({status})")
    return EXIT_OK if ok else EXIT_FAIL


# ── Parser ─────────────────────────────────────────────────────────

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="relaybeam",
        description="Joint relay selection and beam management simulator.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a Monte-Carlo sweep")
    run.add_argument("--config", help="JSON experiment configuration")
    run.add_argument("--seeds", type=int, help="evaluate seeds 0..N-1")
    run.add_argument("--policies", help="comma-separated policy names")
    run.add_argument("--horizon", type=int, help="slots per run (default from config)")
    run.add_argument("--out", help="output directory (default: current directory)")
    run.set_defaults(func=cmd_run)

    grid = sub.add_parser("grid", help="grid-search fixed thresholds")
    grid.add_argument("--config", help="JSON experiment configuration")
    grid.add_argument("--horizon", type=int)
    grid.add_argument("--out", default=".")
    grid.set_defaults(func=cmd_grid)

    check = sub.add_parser("gradcheck", help="verify network gradients")
    check.add_argument("--config", help="JSON experiment configuration")
    check.add_argument("--nets", type=int, default=20)
    check.add_argument("--seed", type=int, default=0)
    check.add_argument("--tol", type=float, default=1e-4)
    check.set_defaults(func=cmd_gradcheck)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s | %(levelname)-8s | %(name)s | %(message)s",
    )
    try:
        return args.func(args)
    except (RelayBeamError, KeyError, ValueError) as exc:
        logger.error("%s", exc)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
