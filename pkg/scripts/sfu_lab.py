#!/usr/bin/env python3
"""White-Patch with max and cvp pooling on a user-supplied dataset manifest.

The manifest is the JSON list read by ``cvpool bench`` (image, illuminant and
optional black_level, saturation, mask per entry). Nothing is downloaded.
"""

import argparse
from pathlib import Path

from cvpool.algorithms import EstimatorSpec
from cvpool.bench import RunConfig, run_bench
from cvpool.contrast import CvpConfig
from cvpool.pooling import PoolingSpec


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("manifest", type=Path)
    ap.add_argument("--out", type=Path, default=Path("sfu_lab.csv"))
    ap.add_argument("--jobs", type=int, default=4)
    ap.add_argument("--cvp-sigma", type=float, default=3.0)
    args = ap.parse_args()

    estimators = [EstimatorSpec("white_patch", PoolingSpec("max"))]
    estimators.append(EstimatorSpec("white_patch", PoolingSpec("cvp", cvp=CvpConfig(sigma=args.cvp_sigma))))
    report = run_bench(RunConfig(estimators, manifest_path=args.manifest, output_path=args.out, parallelism=args.jobs))
    for s in report.summaries:
        st = s.stats
        print(f"{s.estimator.pooling_label:<4} n={st.n} median={st.median:.2f} trimean={st.trimean:.2f} mean={st.mean:.2f} failed={s.n_failed}")
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
