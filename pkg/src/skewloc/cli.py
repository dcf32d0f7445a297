"""Command line entry point: ``skewloc <kind> --config FILE [options]``."""
from __future__ import annotations

import argparse
import json
import sys

from .errors import NumericalError, ResourceLimit, SkewlocError, SpecFormatError
from .lab.config import KINDS, ExperimentConfig, load_config
from .lab.runner import THREADS_ENV, default_threads, run

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_RESOURCE = 0, 2, 3, 4


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _error_record(kind: str, message: str, code: int, **extra) -> int:
    rec = {"error": kind, "message": message, "exit_code": code, **extra}
    print(json.dumps(rec), file=sys.stderr)
    return code


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="skewloc", description="Skew-shift lattice operator laboratory.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for kind in KINDS:
        s = sub.add_parser(kind, help=f"run a {kind} experiment")
        s.add_argument("--config", help="JSON or YAML experiment config (or a run manifest)")
        s.add_argument("--seed", type=int)
        s.add_argument("--out", help="output directory")
        s.add_argument("--format", choices=("csv", "json"))
        s.add_argument("--threads", type=int, help=f"worker threads (default: ${THREADS_ENV} or 1)")

    v = sub.add_parser("validate", help="check a spec file against the admissibility conditions")
    v.add_argument("path")

    m = sub.add_parser("make-spec", help="sample a random admissible spec and write it")
    m.add_argument("--seed", type=int, default=0)
    m.add_argument("--d", type=int, default=3)
    m.add_argument("--gamma", type=float, default=1e-3)
    m.add_argument("--C1", type=float, default=2.0)
    m.add_argument("--K-max", dest="K_max", type=int, default=20)
    m.add_argument("--v-degree", dest="v_degree", type=int, default=2)
    m.add_argument("--out", required=True, help="spec file to write")

    a = sub.add_parser("acceptance", help="run the acceptance criteria")
    a.add_argument("--only", type=lambda s: [int(v) for v in s.split(",")], help="e.g. 1,4,9")
    a.add_argument("--threads", type=int)
    return p


def _run_kind(args) -> int:
    overrides = {"seed": args.seed, "out": args.out, "format": args.format}
    if args.config:
        cfg = load_config(args.config, **overrides)
    else:
        cfg = ExperimentConfig.from_dict({"kind": args.command, **{k: v for k, v in overrides.items() if v}})
    if cfg.kind != args.command:
        raise UsageError(f"config is for kind {cfg.kind!r}, command was {args.command!r}")
    threads = args.threads if args.threads is not None else default_threads()
    manifest = run(cfg, threads)
    print(json.dumps({"outputs": manifest.outputs, "rows": manifest.stages[1]["rows"],
                      "partial": manifest.partial}))
    if manifest.partial:
        return _error_record("resource-limit", "some jobs exceeded a size limit; results are partial",
                             EXIT_RESOURCE, failures=manifest.failures)
    return EXIT_OK


def _validate(args) -> int:
    from .specio import validate_spec_file
    problems = validate_spec_file(args.path)
    print(json.dumps({"path": args.path, "violations": problems}, indent=1))
    return EXIT_OK if not problems else 1


def _make_spec(args) -> int:
    from .operator import sample_random_spec
    from .specio import save_spec
    spec = sample_random_spec(args.seed, args.d, args.gamma, args.C1, args.K_max, args.v_degree)
    print(str(save_spec(spec, args.out)))
    return EXIT_OK


def _acceptance(args) -> int:
    from .lab.recipes import run_all
    threads = args.threads if args.threads is not None else default_threads()
    results = run_all(args.only, threads)
    for r in results:
        print(r.line())
    return EXIT_OK if all(r.passed for r in results) else 1


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if args.command == "validate":
            return _validate(args)
        if args.command == "make-spec":
            return _make_spec(args)
        if args.command == "acceptance":
            return _acceptance(args)
        return _run_kind(args)
    except UsageError as exc:
        return _error_record("usage", str(exc), EXIT_USAGE)
    except SpecFormatError as exc:
        return _error_record("format", str(exc), EXIT_USAGE, line=exc.line, field=exc.field)
    except ResourceLimit as exc:
        return _error_record("resource-limit", str(exc), EXIT_RESOURCE)
    except NumericalError as exc:
        return _error_record("numeric", str(exc), EXIT_NUMERIC)
    except (SkewlocError, ValueError) as exc:
        return _error_record("usage", str(exc), EXIT_USAGE)


if __name__ == "__main__":
    sys.exit(main())
