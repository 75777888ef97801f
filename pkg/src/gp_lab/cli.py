"""gp-lab command line: one subcommand per pipeline, JSON config in, artifacts out.

Exit codes: 0 success, 1 numerical failure (diagnostics.json written),
2 configuration error.
"""

from __future__ import annotations

import argparse
import json
import sys
import traceback
from pathlib import Path

from . import pipelines, reporting
from .config import load_config
from .errors import ConfigError, GpLabError

_COMMANDS = {
    "spectrum": pipelines.run_spectrum,
    "threshold": pipelines.run_threshold,
    "bound-state": pipelines.run_bound_state,
    "linearize": pipelines.run_linearize,
    "fgr": pipelines.run_fgr,
    "normal-form": pipelines.run_normal_form,
    "simulate": pipelines.run_simulate,
    "verify": pipelines.run_verify,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gp-lab",
        description="Spectral and dynamical laboratory for NLS/GP soliton relaxation",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name, help=f"run the {name} pipeline")
        p.add_argument("--config", required=True, help="path to the JSON run configuration")
        p.add_argument("--out", default=None, help="output directory (overrides config output.dir)")
        p.add_argument("--no-figures", action="store_true", help="skip figure rendering")
        if name == "normal-form":
            p.add_argument("--gamma", default=None, help="gamma.json from a previous fgr run")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    out_dir = args.out or cfg["output"]["dir"]
    figures = cfg["output"]["figures"] and not args.no_figures
    blob = Path(args.config).read_bytes()
    out = reporting.OutputDir(out_dir, config_blob=blob, figures=figures)

    try:
        if args.command == "normal-form":
            residuals = pipelines.run_normal_form(cfg, out, gamma_path=args.gamma)
        else:
            residuals = _COMMANDS[args.command](cfg, out)
        out.finalize(args.command, residuals)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except GpLabError as exc:
        diag = {
            "command": args.command,
            "error": type(exc).__name__,
            "message": str(exc),
        }
        if hasattr(exc, "residuals") and exc.residuals:
            diag["residual_history"] = list(map(float, exc.residuals))
        reporting.write_json(Path(out_dir) / "diagnostics.json", diag)
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 1
    except Exception:
        traceback.print_exc()
        return 1

    if args.command == "verify":
        verify = json.loads((Path(out_dir) / "verify.json").read_text())
        if not verify["all_pass"]:
            failed = [c["name"] for c in verify["checks"] if not c["pass"]]
            print(f"verify failed: {failed}", file=sys.stderr)
            return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
