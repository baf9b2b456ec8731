"""Command line: ``r2cs {bounds,sublines,subplanes,rank-sets,verify,replay,verify-set,table}``."""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
import warnings
from pathlib import Path

from .cache import Cache, CacheError, canonical_json
from .pipeline import (
    EXIT_INFEASIBLE,
    EXIT_OK,
    EXIT_VERIFY,
    HeaderError,
    InfeasibleError,
    ReportEnvelope,
    RunConfig,
    count_table,
    frame_for_report,
    replay_verify,
    run,
)

log = logging.getLogger("r2cs")


def _coeffs(text: str) -> list[int]:
    """'1,2,0,0,2' (highest degree first) -> lowest-first coefficient list."""
    vals = [int(c) for c in text.replace(" ", "").split(",") if c]
    return list(reversed(vals))


def _field_args(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--p", type=int, default=3, help="characteristic")
    sp.add_argument("--e", type=int, default=1, help="q = p^e")
    sp.add_argument("--n", type=int, default=4, help="extension degree")
    sp.add_argument("--modulus", type=_coeffs, default=None,
                    help="defining polynomial over F_p, comma separated, highest degree first")
    sp.add_argument("--eta", dest="eta_log", type=int, default=None, help="eta as a power of alpha")
    sp.add_argument("--threads", type=int, default=1)
    sp.add_argument("--force", action="store_true", help="run outside the feasible q range")


def build_parser() -> argparse.ArgumentParser:
    # output options are accepted before or after the command name
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--cache-dir", default=argparse.SUPPRESS, help="overrides $R2CS_CACHE_DIR")
    common.add_argument("--no-cache", action="store_true", default=argparse.SUPPRESS)
    common.add_argument("--format", dest="output_format", choices=("json", "csv", "text"),
                        default=argparse.SUPPRESS)
    common.add_argument("--out", default=argparse.SUPPRESS, help="write the report here instead of stdout")
    common.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)
    ap = argparse.ArgumentParser(prog="r2cs", description=__doc__, parents=[common])
    sub = ap.add_subparsers(dest="command", required=True)
    _add = sub.add_parser

    def add_parser(name, **kw):
        return _add(name, parents=[common], **kw)

    sub.add_parser = add_parser  # type: ignore[method-assign]

    sp = sub.add_parser("bounds", help="q values not excluded by the subline bounds")
    sp.add_argument("--n", type=int, required=True)

    sp = sub.add_parser("sublines", help="(b, mu) pairs and subline count on ell_e or ell_s")
    _field_args(sp)
    sp.add_argument("--secant", action="store_true")
    sp.add_argument("--block", type=int, default=256, help="b values per checkpoint")

    sp = sub.add_parser("subplanes", help="subplanes through x and their classes")
    _field_args(sp)

    sp = sub.add_parser("rank-sets", help="rank-4 or rank-5 linear sets through x")
    _field_args(sp)
    sp.add_argument("--rank", type=int, choices=(4, 5), default=4)

    sp = sub.add_parser("verify", help="semifield family checks")
    _field_args(sp)
    sp.add_argument("--family", choices=("dickson", "kk", "cg", "pw"), required=True)
    sp.add_argument("--m", dest="m_log", type=int, default=None,
                    help="m (Dickson) or eta (Cohen-Ganley) as a power of alpha")
    sp.add_argument("--sigma", type=int, default=1, help="automorphism index, x -> x^(q^sigma)")
    sp.add_argument("--samples", type=int, default=10**7)

    sp = sub.add_parser("replay", help="re-check the witnesses of a saved report")
    sp.add_argument("report")

    sp = sub.add_parser("verify-set", help="alias of replay")
    sp.add_argument("report")

    sp = sub.add_parser("table", help="count table: rows q, columns n")
    sp.add_argument("--n", type=int, nargs="+", default=[3, 4])
    sp.add_argument("--q", type=int, nargs="+", default=[3, 5, 7])
    sp.add_argument("--threads", type=int, default=1)
    return ap


GLOBAL_DEFAULTS = {"cache_dir": None, "no_cache": False, "output_format": "json", "out": None,
                   "verbose": False}


def parse_args(argv: list[str] | None = None) -> argparse.Namespace:
    args = build_parser().parse_args(argv)
    for k, v in GLOBAL_DEFAULTS.items():
        if not hasattr(args, k):
            setattr(args, k, v)
    return args


def _config(args: argparse.Namespace) -> RunConfig:
    stage = {"rank-sets": f"rank{getattr(args, 'rank', 4)}"}.get(args.command, args.command)
    cfg = RunConfig(stage=stage, cache_dir=args.cache_dir, use_cache=not args.no_cache,
                    output_format=args.output_format)
    for name in ("p", "e", "n", "modulus", "eta_log", "threads", "force", "secant", "family",
                 "m_log", "sigma", "samples", "block"):
        if hasattr(args, name):
            setattr(cfg, name, getattr(args, name))
    return cfg


def render(report: ReportEnvelope, fmt: str) -> str:
    d = report.to_json()
    if fmt == "json":
        return json.dumps(d, indent=2, sort_keys=True) + "\n"
    if fmt == "csv":
        buf = io.StringIO()
        flat = {"stage": report.stage, **report.params, **_scalars(report.counts), **report.checks}
        w = csv.DictWriter(buf, fieldnames=list(flat))
        w.writeheader()
        w.writerow(flat)
        return buf.getvalue()
    lines = [f"stage: {report.stage}", f"elapsed: {report.elapsed}s"]
    if report.field:
        lines.append(f"field: {report.field}")
    lines += [f"{k}: {v}" for k, v in report.params.items()]
    lines += [f"{k}: {v}" for k, v in report.counts.items()]
    lines += [f"check {k}: {v}" for k, v in report.checks.items()]
    return "\n".join(lines) + "\n"


def _scalars(d: dict) -> dict:
    return {k: (canonical_json(v) if isinstance(v, (list, dict)) else v) for k, v in d.items()}


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def main(argv: list[str] | None = None) -> int:
    warnings.filterwarnings("ignore", module="numba")
    args = parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command in ("replay", "verify-set"):
            report = ReportEnvelope.from_json(json.loads(Path(args.report).read_text()))
            res = replay_verify(report, frame_for_report(report) if report.field else None)
            _emit(json.dumps({"ok": res.ok, "failures": res.failures}, indent=2) + "\n", args.out)
            return EXIT_OK if res.ok else EXIT_VERIFY
        if args.command == "table":
            rows = count_table(args.n, args.q, Cache(args.cache_dir, enabled=not args.no_cache),
                               args.threads)
            buf = io.StringIO()
            w = csv.DictWriter(buf, fieldnames=list(rows[0]))
            w.writeheader()
            w.writerows(rows)
            _emit(buf.getvalue(), args.out)
            return EXIT_OK
        report = run(_config(args))
    except InfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (HeaderError, CacheError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VERIFY
    _emit(render(report, args.output_format), args.out)
    return EXIT_OK if report.ok else EXIT_VERIFY


if __name__ == "__main__":
    raise SystemExit(main())
