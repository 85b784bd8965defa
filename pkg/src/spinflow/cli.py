"""Command-line front end.

Exit codes: 0 success, 2 bad configuration, 3 numerical failure during a run,
4 validator failure (the validate battery completed but a check failed).
"""

from __future__ import annotations

import argparse
import os
import sys

from .exceptions import ConfigError, NumericalError
from .scenarios import build_config, parse_config_file, run_scenario

#: CLI subcommand name -> scenario key
_SUBCOMMANDS = {
    "dynamics": "dynamics",
    "conv-dt": "conv_dt",
    "conv-dx": "conv_dx",
    "validate": "validate",
}

_HELP = {
    "dynamics": "one coupled sampler/SDE/flow run from a shared Brownian path",
    "conv-dt": "strong-error order of the sampler against the SDE across a dt sweep",
    "conv-dx": "error order of the sampler against the deterministic flow as the lattice refines",
    "validate": "statistical battery: expansions, uniformity, energy bound, remainders",
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spinflow",
        description="Spin-lattice sampler, Langevin SDE, and heat-flow studies.",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True, metavar="SCENARIO")
    for name, scenario in _SUBCOMMANDS.items():
        p = sub.add_parser(name, help=_HELP[name])
        p.set_defaults(scenario=scenario)
        p.add_argument("--config", metavar="FILE", help="flat key = value config file")
        p.add_argument("--seed", type=int, help="root seed (64-bit unsigned)")
        p.add_argument("--out", metavar="DIR", help="output directory for artifacts")
        p.add_argument("--realizations", type=int, metavar="N", help="independent runs")
        p.add_argument(
            "--workers", type=int, metavar="N",
            help="worker processes (default: all cores); results do not depend on it",
        )
        p.add_argument("--model", choices=("xy", "heisenberg"), help="spin model")
    return parser


def _summarize(report: dict) -> str:
    lines = [f"scenario: {report['scenario']}"]
    if "slope" in report:
        lines.append(
            f"fitted order: {report['slope']:.4f}  (r^2 = {report['r_squared']:.4f})"
        )
        for p in report["points"]:
            lines.append(
                f"  h = {p['h']:.6g}  err = {p['err']:.6g} +/- {p['stderr']:.2g}"
                f"  ({p['n_realizations']} realizations)"
            )
    if "final_energies" in report:
        for kind, h in report["final_energies"].items():
            lines.append(f"final H ({kind}): {h:.6g}")
        lag = report["lag_comparison"]
        lines.append(
            f"rms distance to the flow at t={lag['t']:g}: sampler {lag['rms_mh_pde']:.4g}, "
            f"SDE {lag['rms_sde_pde']:.4g}"
        )
    if "checks" in report:
        for name, check in report["checks"].items():
            lines.append(f"{'PASS' if check['passed'] else 'FAIL'}  {name}")
        lines.append(f"overall: {'PASS' if report['passed'] else 'FAIL'}")
    lines.append(f"artifacts in {report['output_dir']}")
    return "\n".join(lines)


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    overrides = {
        "seed": args.seed,
        "output_dir": args.out,
        "realizations": args.realizations,
        "workers": args.workers,
        "model": args.model,
    }
    try:
        file_values = parse_config_file(args.config) if args.config else {}
        if args.workers is None and "workers" not in file_values:
            overrides["workers"] = os.cpu_count() or 1
        cfg = build_config(args.scenario, file_values, overrides)
        report = run_scenario(cfg)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3

    print(_summarize(report))
    if report.get("passed") is False:
        return 4
    return 0


if __name__ == "__main__":
    sys.exit(main())
