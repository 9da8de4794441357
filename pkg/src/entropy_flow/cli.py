"""Command line: ``run``, ``verify`` and ``sweep``."""

from __future__ import annotations

import argparse
import copy
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from .errors import ConfigInvalid
from .scenario import config_from_mapping, load_config, output_dir, run_scenario


def _cmd_run(args) -> int:
    try:
        cfg = load_config(args.config, args.set)
    except ConfigInvalid as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    out = output_dir(cfg)
    status, summary = run_scenario(cfg, out)
    if "error" in summary:
        print(f"error [{summary['error']['code']}]: {summary['error']['message']}", file=sys.stderr)
        return status
    for msg in summary["warnings"]:
        print(f"warning: {msg}", file=sys.stderr)
    state = "converged" if summary["converged"] else "NOT converged"
    print(
        f"{state} after {summary['steps']} steps; S = {summary['final_entropy']:.12g} "
        f"(limit {summary['limit_entropy']:.12g}), Linf to limit {summary['final_dist_linf']:.3e}"
    )
    print(f"artifacts written to {out}")
    return status


def _cmd_verify(args) -> int:
    from .verify import AcceptanceContext, verify_suite

    ctx = AcceptanceContext(gamma=args.gamma, dt=args.dt)
    results = verify_suite(ctx)
    return 0 if all(r.passed for r in results) else 1


def _parse_vary(text: str) -> tuple[str, list[str]]:
    if "=" not in text:
        raise ConfigInvalid(f"--vary expects key=v1,v2,..., got {text!r}")
    key, values = text.split("=", 1)
    values = [v.strip() for v in values.split(",") if v.strip()]
    if not values:
        raise ConfigInvalid(f"--vary {key}: no values given")
    return key.strip(), values


def _cmd_sweep(args) -> int:
    try:
        base = load_config(args.config, args.set)
        key, values = _parse_vary(args.vary)
        configs = []
        root = output_dir(base)
        for v in values:
            cfg = config_from_mapping({key: v}, base=copy.deepcopy(base))
            configs.append((v, cfg, root / f"{key}={v}"))
    except ConfigInvalid as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    with ThreadPoolExecutor(max_workers=args.workers) as pool:
        outcomes = list(pool.map(lambda item: run_scenario(item[1], item[2]), configs))

    worst = 0
    print(f"{key:>12}  {'status':>10}  {'steps':>8}  {'final Linf':>12}")
    for (v, _, out), (status, summary) in zip(configs, outcomes):
        worst = max(worst, status)
        if "error" in summary:
            print(f"{v:>12}  {summary['error']['code']:>10}  {'-':>8}  {'-':>12}")
            continue
        flag = "converged" if summary["converged"] else "stalled"
        print(f"{v:>12}  {flag:>10}  {summary['steps']:>8}  {summary['final_dist_linf']:>12.3e}")
    print(f"artifacts written under {root}")
    return worst


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="entropy-flow", description="Speed-gradient entropy dynamics of probability densities"
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one scenario and write its artifacts")
    p_run.add_argument("--config", required=True, type=Path, help="key = value config file")
    p_run.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override a config key")
    p_run.set_defaults(func=_cmd_run)

    p_verify = sub.add_parser("verify", help="run the acceptance criteria")
    p_verify.add_argument("--dt", type=float, default=0.01, help="time step of the convergence runs")
    p_verify.add_argument("--gamma", type=float, default=1.0, help="gain of the convergence runs")
    p_verify.set_defaults(func=_cmd_verify)

    p_sweep = sub.add_parser("sweep", help="run a scenario for several values of one key")
    p_sweep.add_argument("--config", required=True, type=Path)
    p_sweep.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    p_sweep.add_argument("--vary", required=True, metavar="KEY=V1,V2,...")
    p_sweep.add_argument("--workers", type=int, default=4)
    p_sweep.set_defaults(func=_cmd_sweep)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
