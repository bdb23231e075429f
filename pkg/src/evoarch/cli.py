"""Command-line front end: run/resume searches, inspect runs and genomes.

Exit codes: 0 success, 1 configuration problem (missing/invalid config
file, unknown run data), 2 runtime failure.  Flags are the only way to
override config-file fields; the effective config is echoed into the run
header.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from . import orchestrator
from .arch_metrics import arch_stats
from .orchestrator import ConfigError, SearchConfig, config_from_dict, config_to_dict
from .search_space import MNEMONIC, encode_text
from .evaluation import genome_from_wire


def _load_config(path: str) -> SearchConfig:
    p = Path(path)
    if not p.exists():
        raise ConfigError([f"config file not found: {p}"])
    try:
        doc = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ConfigError([f"config file {p} is not valid JSON: {e}"]) from None
    return config_from_dict(doc)


def _apply_overrides(config: SearchConfig, args) -> SearchConfig:
    updates = {}
    if args.seed is not None:
        updates["run_seed"] = args.seed
    if args.workers is not None:
        updates["workers"] = args.workers
    if args.out_dir is not None:
        updates["out_dir"] = args.out_dir
    if args.evaluator is not None:
        updates["evaluator"] = replace(config.evaluator, kind=args.evaluator)
    return replace(config, **updates) if updates else config


def _cmd_run(args) -> int:
    config = _apply_overrides(_load_config(args.config), args)
    violations = orchestrator.validate_config(config)
    if violations:
        raise ConfigError(violations)
    report = orchestrator.run(config)
    print(f"run complete: {report['evaluations']} evaluations, "
          f"max reward {report['reward_max']:.3f}")
    print(f"artifacts in {config.out_dir}")
    return 0


def _cmd_resume(args) -> int:
    report = orchestrator.resume(args.run)
    if report.get("status") == "already-complete":
        print("run already complete; nothing to do")
    else:
        print(f"resumed run complete: max reward {report['reward_max']:.3f}")
    return 0


def _cmd_report(args) -> int:
    summary = orchestrator.run_report(args.run, top=args.top)
    print(f"evaluations:     {summary['evaluations']}")
    print(f"25th percentile: {summary['reward_p25']:.3f}")
    print(f"median reward:   {summary['reward_median']:.3f}")
    print(f"75th percentile: {summary['reward_p75']:.3f}")
    print(f"max reward:      {summary['reward_max']:.3f}")
    print("pareto front (reward, params_m, flops_g):")
    for m in summary["pareto_front"]:
        print(f"  {m['id']:>10}  {m['reward']:12.4f}  {m['params_m']:.6f}  "
              f"{m['flops_g']:.6f}")
    return 0


def _cmd_export_csv(args) -> int:
    out = args.out or str(Path(args.run) / "evolution.csv")
    orchestrator.export_evolution_csv(args.run, out)
    print(f"wrote {out}")
    return 0


def _cmd_show_genome(args) -> int:
    records = orchestrator.read_log(args.run)
    if not records:
        raise ConfigError([f"no run log in {args.run}"])
    header = records[0]
    match = next((r for r in records
                  if r.get("record") == "evaluation" and r["id"] == args.id), None)
    if match is None:
        raise ConfigError([f"individual {args.id!r} not found in {args.run}"])
    config = config_from_dict(header["config"])
    chrom = genome_from_wire(match["genome"], args.id)
    stats = arch_stats(chrom, config.fidelity)
    print(encode_text(chrom))
    for name, cell in (("normal", chrom.normal), ("reduction", chrom.reduction)):
        print(f"{name} cell:")
        for k, block in enumerate(cell.blocks):
            parts = " + ".join(f"{MNEMONIC[g.op]}@{g.input}" for g in block)
            print(f"  block {k}: {parts}")
    print(f"params_m: {stats.params_m:.6f}")
    print(f"flops_g:  {stats.flops_g:.6f}")
    return 0


def _cmd_validate_config(args) -> int:
    config = _load_config(args.config)
    print(json.dumps(config_to_dict(config), indent=2, sort_keys=True))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="evoarch",
        description="evolutionary multi-objective architecture search")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="execute a search from a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--out-dir")
    p.add_argument("--evaluator", choices=orchestrator.EVALUATOR_KINDS)
    p.set_defaults(handler=_cmd_run)

    p = sub.add_parser("resume", help="continue an interrupted run")
    p.add_argument("--run", required=True)
    p.set_defaults(handler=_cmd_resume)

    p = sub.add_parser("report", help="reward statistics and Pareto front")
    p.add_argument("--run", required=True)
    p.add_argument("--top", type=int)
    p.set_defaults(handler=_cmd_report)

    p = sub.add_parser("export-csv", help="per-evaluation table for plotting")
    p.add_argument("--run", required=True)
    p.add_argument("--out")
    p.set_defaults(handler=_cmd_export_csv)

    p = sub.add_parser("show-genome", help="canonical text and stats of one individual")
    p.add_argument("--run", required=True)
    p.add_argument("--id", required=True)
    p.set_defaults(handler=_cmd_show_genome)

    p = sub.add_parser("validate-config", help="check a config file")
    p.add_argument("--config", required=True)
    p.set_defaults(handler=_cmd_validate_config)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except ConfigError as e:
        for violation in e.violations:
            print(f"error: {violation}", file=sys.stderr)
        return 1
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except Exception as e:  # noqa: BLE001 - runtime failures map to exit 2
        print(f"runtime failure: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
