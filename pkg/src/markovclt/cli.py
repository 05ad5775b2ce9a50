"""``markovclt`` command line: analyze a chain spec, write gallery chains, run lemma campaigns.

Exit codes: 0 success, 2 input error, 3 resource cap exceeded.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import __version__
from .chain import dump_chain_spec
from .config import DEFAULT_CAPS
from .exceptions import ChainValidationError, HorizonExceeded, ResourceCapExceeded
from .gallery import DEFAULTS, GALLERY_NAMES, make
from .lemmas import replay_case
from .report import analyze_spec_bytes, campaign_report, dumps_csv, dumps_report
from .variance import write_variance_csv

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_CAP = 3
MIN_HORIZON = 16


class InputError(Exception):
    pass


def _emit(text: str, out):
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8")


def cmd_analyze(args) -> int:
    if args.horizon < MIN_HORIZON:
        raise InputError(f"--horizon must be >= {MIN_HORIZON}")
    if args.horizon > DEFAULT_CAPS.bridge_horizon:
        raise ResourceCapExceeded(f"--horizon {args.horizon} exceeds the bridge horizon cap {DEFAULT_CAPS.bridge_horizon}")
    if args.paths < 0:
        raise InputError("--paths must be >= 0")
    if not 0 <= args.seed < 2**64:
        raise InputError("--seed must be a 64-bit unsigned integer")
    try:
        data = Path(args.spec).read_bytes()
    except OSError as exc:
        raise InputError(f"cannot read {args.spec}: {exc.strerror}") from None
    report, profile = analyze_spec_bytes(
        data,
        horizon=args.horizon,
        seed=args.seed,
        n_paths=args.paths,
        workers=args.workers,
        lemma_cases=args.lemma_cases,
    )
    _emit(dumps_report(report) if args.format == "json" else dumps_csv(report), args.out)
    if args.variance_csv:
        write_variance_csv(profile, args.variance_csv)
    if args.paths_csv:
        from .chain import parse_chain_spec
        from .simulate import simulate

        chain = parse_chain_spec(data.decode("utf-8"))
        simulate(chain, args.horizon, max(args.paths, 1), seed=args.seed, workers=args.workers).write_csv(args.paths_csv)
    return EXIT_OK


def cmd_gallery(args) -> int:
    given = {"size": args.size, "p": args.p, "seed": args.seed}
    unused = [k for k, v in given.items() if v is not None and k not in DEFAULTS[args.name]]
    if unused:
        raise InputError(f"{args.name} takes no --{', --'.join(unused)}")
    try:
        chain = make(args.name, **given)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    dump_chain_spec(chain, args.out)
    return EXIT_OK


def cmd_lemmas(args) -> int:
    if args.cases is not None and args.cases < 0:
        raise InputError("--cases must be >= 0")
    if args.replay:
        lemma_id, seed = args.replay
        try:
            ratio = replay_case(lemma_id, int(seed), args.M)
        except ValueError as exc:
            raise InputError(str(exc)) from None
        sys.stdout.write(f"{lemma_id} seed={seed} ratio={ratio!r}\n")
        return EXIT_OK
    report = campaign_report(args.cases, args.seed, args.M)
    _emit(dumps_report(report), args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="markovclt", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    a = sub.add_parser("analyze", help="full analysis of a chain-spec file")
    a.add_argument("spec")
    a.add_argument("--horizon", type=int, default=4096, help="truncation horizon N_max (default 4096)")
    a.add_argument("--seed", type=int, default=0)
    a.add_argument("--paths", type=int, default=20_000, help="simulated paths (default 20000; 0 skips)")
    a.add_argument("--out", help="report path (default stdout)")
    a.add_argument("--format", choices=("json", "csv"), default="json")
    a.add_argument("--workers", type=int, default=1, help="simulation threads; output does not depend on it")
    a.add_argument("--lemma-cases", type=int, default=0, help="append lemma campaigns of this size")
    a.add_argument("--variance-csv", help="write n, var_seq, eta2_curve, theta2_curve")
    a.add_argument("--paths-csv", help="write per-path rows of the simulation")
    a.set_defaults(func=cmd_analyze)

    g = sub.add_parser("gallery", help="write a reference chain spec")
    g.add_argument("name", choices=GALLERY_NAMES)
    g.add_argument("--size", type=int)
    g.add_argument("--p", type=float)
    g.add_argument("--seed", type=int)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gallery)

    lm = sub.add_parser("lemmas", help="randomized lemma campaigns")
    lm.add_argument("--cases", type=int, help="cases per campaign (default: 1000/10000/100)")
    lm.add_argument("--seed", type=int, default=0)
    lm.add_argument("--M", type=int, default=4096, help="subadditive sequence length")
    lm.add_argument("--out", help="report path (default stdout)")
    lm.add_argument("--replay", nargs=2, metavar=("LEMMA_ID", "SEED"), help="recompute one case")
    lm.set_defaults(func=cmd_lemmas)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (InputError, ChainValidationError, HorizonExceeded) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ResourceCapExceeded as exc:
        print(f"resource cap exceeded: {exc}", file=sys.stderr)
        return EXIT_CAP


if __name__ == "__main__":
    sys.exit(main())
