"""Command line entry point: ``naac {train,eval,sweep,oracle,gradcheck}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path


from .config import METHODS, ConfigError, RunConfig, load_config
from .env import D2DEnv, OracleSizeError, brute_force_oracle
from .experiments import (
    CheckpointError,
    emit_csv,
    run_eval,
    run_sweep,
    run_training,
    write_run_artifacts,
)
from .seeding import make_stream
from .topo_channel import ScenarioConfig, sample_topology


def _csv_ints(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc


def _u64(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="naac", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", type=Path, help="flat JSON config (missing keys take defaults)")
        sp.add_argument("--seed", type=_u64, help="master seed (overrides the config)")
        sp.add_argument("--out", type=Path, default=None, help="output directory")

    for name, help_ in [("train", "train one method"), ("eval", "greedy evaluation of checkpoints")]:
        sp = sub.add_parser(name, help=help_)
        common(sp)
        sp.add_argument("--method", choices=METHODS)

    sp = sub.add_parser("sweep", help="train + evaluate over N, methods and seeds")
    common(sp)
    sp.add_argument("--method", default=",".join(METHODS),
                    help="method or comma-separated methods (default: all)")
    sp.add_argument("--n-list", type=_csv_ints, default=[2, 4, 6, 8, 10])
    sp.add_argument("--seeds", type=int, default=5)

    sp = sub.add_parser("oracle", help="exhaustive best allocation for one sampled topology")
    common(sp)

    sp = sub.add_parser("gradcheck", help="finite-difference check of every gradient path")
    common(sp)
    return p


def _configs(args) -> tuple[ScenarioConfig, RunConfig]:
    scenario, run = load_config(args.config) if args.config else (ScenarioConfig(), RunConfig())
    changes = {}
    if args.seed is not None:
        changes["master_seed"] = args.seed
    if getattr(args, "method", None) and args.command in ("train", "eval"):
        changes["method"] = args.method
    if args.out is not None:
        changes["output_dir"] = str(args.out)
    return scenario, run.with_(**changes) if changes else run


def cmd_train(args) -> int:
    scenario, run = _configs(args)
    out = Path(run.output_dir)
    res = run_training(scenario, run, out_dir=out)
    path = write_run_artifacts(out, scenario, run, res.rows, f"train_{run.method}.csv")
    last = res.rows[-1]
    print(f"{run.method}: {len(res.rows)} episodes, final total reward {last.total_reward:.4f}; "
          f"metrics in {path}")
    return 0


def cmd_eval(args) -> int:
    scenario, run = _configs(args)
    out = Path(run.output_dir)
    row = run_eval(scenario, run, checkpoint_dir=out)
    path = emit_csv([row], out / f"eval_{run.method}.csv")
    print(f"{run.method}: outage {row.outage_prob:.6g}, sum rate {row.sum_rate_bps_hz:.6g} "
          f"bit/s/Hz; metrics in {path}")
    return 0


def cmd_sweep(args) -> int:
    scenario, run = _configs(args)
    methods = [m.strip() for m in args.method.split(",") if m.strip()]
    rows = run_sweep(scenario, run, args.n_list, methods, args.seeds, out_dir=run.output_dir)
    print(f"{len(rows)} rows written to {Path(run.output_dir) / 'sweep.csv'}")
    return 0


def cmd_oracle(args) -> int:
    scenario, run = _configs(args)
    topo = sample_topology(scenario, make_stream(run.master_seed, "topology", 0))
    env = D2DEnv(scenario, topo, stream=make_stream(run.master_seed, "channel", 0))
    env.reset()
    res = brute_force_oracle(env.gains, scenario)
    print(json.dumps({
        "best_feasible": None if res.best_feasible is None else res.best_feasible.tolist(),
        "best_feasible_value": None if res.best_feasible is None else res.best_feasible_value,
        "best_any": res.best_any.tolist(),
        "best_any_value": res.best_any_value,
    }, indent=2))
    return 0


def cmd_gradcheck(args) -> int:
    from .gradcheck import run_gradchecks

    scenario, run = _configs(args)
    report = run_gradchecks(scenario, run)
    ok = True
    for name, (err, tol) in report.items():
        passed = err <= tol
        ok &= passed
        print(f"{'PASS' if passed else 'FAIL'} {name}: max rel err {err:.3e} (tol {tol:g})")
    return 0 if ok else 1


COMMANDS = {
    "train": cmd_train, "eval": cmd_eval, "sweep": cmd_sweep,
    "oracle": cmd_oracle, "gradcheck": cmd_gradcheck,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, CheckpointError, OracleSizeError, ValueError, OSError) as exc:
        print(f"naac {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
