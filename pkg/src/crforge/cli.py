"""Command line entry point: ``crforge <pipeline> --config cfg.json``.

Exit codes: 0 success, 1 invalid input, 2 a resource cap was hit.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .errors import CodebookTooLarge, ResourceLimitError, TailNotConvergent, ValidationError
from .harness import PIPELINES, compare_to_capacity, run_experiment


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="crforge", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in PIPELINES:
        s = sub.add_parser(name)
        s.add_argument("--config", required=True, type=Path)
        s.add_argument("--seed", type=int, default=None, help="overrides the config seed")
        s.add_argument("--out", type=Path, default=Path("."))
        s.add_argument("--workers", type=int, default=1)
    c = sub.add_parser("compare")
    c.add_argument("--protocol", required=True, type=Path)
    c.add_argument("--capacity", required=True, type=Path)
    c.add_argument("--out", type=Path, default=Path("."))
    return p


def _load(path: Path):
    try:
        return json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ValidationError(f"cannot read {path}: {exc}") from None


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "compare":
            art = compare_to_capacity(_load(args.protocol), _load(args.capacity))
        else:
            if args.seed is not None and not 0 <= args.seed < 2**64:
                raise ValidationError("--seed must be an unsigned 64-bit integer")
            if args.workers < 1:
                raise ValidationError("--workers must be at least 1")
            art = run_experiment(args.command, _load(args.config), args.seed, args.workers)
    except CodebookTooLarge as exc:
        print(f"error: {exc}", file=sys.stderr)
        if exc.max_feasible_n:
            print(f"suggestion: use n <= {exc.max_feasible_n}, or raise the cap", file=sys.stderr)
        return 2
    except ResourceLimitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValidationError, TailNotConvergent, KeyError, TypeError) as exc:
        msg = f"missing config key {exc}" if isinstance(exc, KeyError) else str(exc)
        print(f"error: {msg}", file=sys.stderr)
        return 1
    for path in art.write(args.out):
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
