"""Main entry point: command line for the quasiclassical experiments."""

import argparse
import asyncio
import logging
import os
import sys
from pathlib import Path

from shared.config import load_config
from shared.errors import LabError

logging.basicConfig(
    level=os.getenv("QCLAB_LOG_LEVEL", "INFO").upper(),
    format="%(asctime)s [%(levelname)s] %(name)s: %(message)s",
    datefmt="%Y-%m-%d %H:%M:%S",
)
log = logging.getLogger("qclab")

COMMANDS = {
    "effective": "partial-trace potentials against their classical limit",
    "gse": "quantum ground state energies against the classical infimum",
    "trap": "coherent states that reproduce an external trap",
    "check": "the invariant battery on seeded random states",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qclab", description="Quasiclassical field experiments")
    commands = parser.add_subparsers(dest="command", required=True)
    for name, help_text in COMMANDS.items():
        sub = commands.add_parser(name, help=help_text)
        sub.add_argument("--config", type=Path, help="YAML experiment configuration")
        sub.add_argument("--out", type=Path, help="output directory (default $QCLAB_OUTPUT_DIR)")
        sub.add_argument("--seed", type=int, help="random seed (default $QCLAB_SEED)")
        sub.add_argument("--eps-list", type=float, nargs="+", metavar="EPS", help="override the eps sweep")
        sub.add_argument("--dry-run", action="store_true", help="validate the configuration and stop")
    return parser


async def run_experiment(command: str, config):
    if command == "effective":
        from experiments.quasiclassical.convergence import cmd_effective

        return await cmd_effective(config)
    if command == "gse":
        from experiments.quasiclassical.ground_state import cmd_gse

        return await cmd_gse(config)
    if command == "trap":
        from experiments.quasiclassical.traps import cmd_trap

        return await cmd_trap(config)
    from experiments.quasiclassical.checks import cmd_check

    return await cmd_check(config)


async def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args.config).with_overrides(args.out, args.seed, args.eps_list)
        log.info("%s: config %s (hash %s)", args.command, config.source or "defaults", config.config_hash[:12])
        if args.dry_run:
            log.info("Configuration valid")
            return 0
        report = await run_experiment(args.command, config)
    except LabError as e:
        log.error("%s: %s", type(e).__name__, e)
        return e.exit_code

    path = report.write(Path(config.run.output_dir) / f"{args.command}_report.yaml")
    log.info("Report written to %s", path)
    if not report.passed:
        for failure in report.failures:
            log.warning("  [%s] %s", failure.invariant, failure.detail)
    return report.exit_code


if __name__ == "__main__":
    try:
        sys.exit(asyncio.run(main()))
    except KeyboardInterrupt:
        sys.exit(0)
