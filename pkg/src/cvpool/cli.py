"""Command line: ``estimate``, ``bench``, ``sweep`` and ``synth``.

Exit codes: 0 success, 1 configuration error, 2 data error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import bench
from .algorithms import METHODS, EstimatorSpec, correct_image, estimate
from .contrast import CvpConfig
from .errors import ConfigError, DataError
from .imgio import PreprocessSpec, load_image, save_image
from .pooling import PoolingSpec
from .synth import write_corpus

EXIT_OK, EXIT_CONFIG, EXIT_DATA = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _fmt_vec(v) -> str:
    return " ".join(repr(float(c)) for c in v)


def cmd_estimate(args) -> int:
    cvp = CvpConfig(args.cvp_sigma, args.c_min, args.x_min, args.x_max)
    pooling = None if args.method == "grey_world" and args.pooling is None else PoolingSpec.parse(args.pooling or "max", cvp)
    spec = EstimatorSpec(args.method, pooling, sigma=args.sigma, k_surround=args.k)
    prep = PreprocessSpec(args.black_level, args.saturation, args.mask, args.gamma)
    img = load_image(args.image, prep)
    est = estimate(img, spec)
    print(f"illuminant {_fmt_vec(est.illuminant)}")
    if est.pooled.x_used is not None:
        print(f"x_c {_fmt_vec(est.pooled.x_used)}")
    if est.pooled.count is not None:
        print("pooled " + " ".join(str(int(n)) for n in est.pooled.count))
    if args.correct is not None:
        save_image(correct_image(img, est.illuminant), args.correct, illum_applied=est.illuminant)
    return EXIT_OK


def cmd_bench(args) -> int:
    cfg = bench.run_config_from_dict(bench.read_json(args.config), args.manifest, args.out)
    if args.jobs is not None:
        cfg.parallelism = args.jobs
    report = bench.run_bench(cfg)
    for s in report.summaries:
        e, st = s.estimator, s.stats
        where = f"{e.method:<17} {e.pooling_label:<12} sigma={e.sigma} k={e.k_surround}"
        if st is None:
            print(f"{where}  all {s.n_failed} failed")
        else:
            print(f"{where}  n={st.n} median={st.median:.3f} trimean={st.trimean:.3f} mean={st.mean:.3f} failed={s.n_failed}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    grid = bench.sweep_grid_from_dict(bench.read_json(args.grid))
    cfg = bench.RunConfig(grid.estimators(), Path(args.manifest), Path(args.out), parallelism=args.jobs)
    rows = bench.run_sweep(cfg, grid)
    print(f"wrote {len(rows)} rows to {args.out}")
    return EXIT_OK


def cmd_synth(args) -> int:
    spec = bench.synthetic_spec_from_dict(bench.read_json(args.spec)) if args.spec else bench.SyntheticSceneSpec()
    manifest = write_corpus(spec, args.seed, args.count, args.out)
    print(f"wrote {args.count} scene(s) and {manifest}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="cvpool", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("estimate", help="estimate the illuminant of one image")
    p.add_argument("image", type=Path)
    p.add_argument("--method", choices=METHODS, default="white_patch")
    p.add_argument("--pooling", help="max | cvp | minkowski:P | top_x:X (default max)")
    p.add_argument("--sigma", type=float)
    p.add_argument("--k", type=float, help="surround weight (double_opponency)")
    p.add_argument("--correct", type=Path, metavar="OUT", help="write the corrected image (.png or .ppm)")
    p.add_argument("--black-level", type=float, default=0.0)
    p.add_argument("--saturation", type=float, default=0.98)
    p.add_argument("--mask", type=Path)
    p.add_argument("--gamma", type=float, help="decode exponent applied as v**gamma")
    p.add_argument("--cvp-sigma", type=float, default=3.0)
    p.add_argument("--c-min", type=float, default=0.01)
    p.add_argument("--x-min", type=float, default=0.1)
    p.add_argument("--x-max", type=float, default=100.0)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("bench", help="evaluate estimators over a manifest")
    p.add_argument("--manifest", type=Path, required=True)
    p.add_argument("--config", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--jobs", type=int, help="override the config's parallelism")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("sweep", help="sigma/k parameter sweep, max vs cvp")
    p.add_argument("--manifest", type=Path, required=True)
    p.add_argument("--grid", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("synth", help="write a synthetic Mondrian corpus and its manifest")
    p.add_argument("--spec", type=Path)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
