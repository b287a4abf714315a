import csv
import io
import json

import numpy as np
import pytest

from cvpool.algorithms import EstimatorSpec
from cvpool.bench import (
    BENCH_COLUMNS,
    RunConfig,
    Scene,
    SweepGrid,
    SyntheticCorpus,
    bench_csv,
    estimator_from_dict,
    run_bench,
    run_config_from_dict,
    run_scenes,
    run_sweep,
    sweep_grid_from_dict,
)
from cvpool.errors import AllPixelsInvalidError, ConfigError, ImageFormatError
from cvpool.imgio import load_manifest
from cvpool.metrics import recovery_error, summarize
from cvpool.pooling import PoolingSpec
from cvpool.synth import SyntheticSceneSpec, generate_synthetic, write_corpus

from .conftest import uniform_image

WP_MAX = EstimatorSpec("white_patch", PoolingSpec("max"))
WP_CVP = EstimatorSpec("white_patch", PoolingSpec("cvp"))
GE1 = EstimatorSpec("grey_edge_1", PoolingSpec("max"), sigma=1.0)


def read_rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_synthetic_is_deterministic():
    spec = SyntheticSceneSpec(noise_sigma=0.02, salt_fraction=0.01)
    a, ea = generate_synthetic(spec, 9)
    b, eb = generate_synthetic(spec, 9)
    np.testing.assert_array_equal(a.channels, b.channels)
    np.testing.assert_array_equal(ea, eb)
    c, _ = generate_synthetic(spec, 10)
    assert not np.array_equal(a.channels, c.channels)


def test_synthetic_shape_and_range():
    spec = SyntheticSceneSpec(patch_grid=(4, 6), patch_size=5, noise_sigma=0.05)
    img, e = generate_synthetic(spec, 0)
    assert img.channels.shape == (3, 20, 30)
    assert img.channels.min() >= 0 and img.channels.max() <= 1
    assert abs(np.linalg.norm(e) - 1) < 1e-15 and np.all(e > 0)


@pytest.mark.parametrize(
    "kwargs", [dict(noise_sigma=-0.1), dict(salt_fraction=1.0), dict(patch_grid=(0, 3)), dict(illuminant_range=(0, 1))]
)
def test_synthetic_spec_validation(kwargs):
    with pytest.raises(ValueError):
        SyntheticSceneSpec(**kwargs)


def test_single_scene_manifest(tmp_path):
    manifest = write_corpus(SyntheticSceneSpec(), 3, 1, tmp_path)
    out = tmp_path / "r.csv"
    report = run_bench(RunConfig([WP_MAX], manifest_path=manifest, output_path=out))
    (row,) = [r for r in read_rows(out.read_text()) if r["row"] == "detail"]
    assert float(row["recovery_deg"]) < 0.1
    assert report.summaries[0].stats.n == 1


def test_cardinality_and_summary_consistency(tmp_path):
    manifest = write_corpus(SyntheticSceneSpec(noise_sigma=0.01), 0, 3, tmp_path)
    report = run_bench(RunConfig([WP_MAX, GE1], manifest_path=manifest))
    rows = read_rows(bench_csv(report))
    assert list(rows[0]) == BENCH_COLUMNS
    assert [r["row"] for r in rows].count("detail") == 6
    assert [r["row"] for r in rows].count("summary") == 2
    for s in (r for r in rows if r["row"] == "summary"):
        errs = [float(d["recovery_deg"]) for d in rows if d["row"] == "detail" and d["method"] == s["method"]]
        stats = summarize(errs)
        assert float(s["median"]) == stats.median and float(s["trimean"]) == stats.trimean
        assert float(s["mean"]) == stats.mean and int(s["n"]) == 3


def test_failures_counted_not_averaged():
    img, e = generate_synthetic(SyntheticSceneSpec(), 1)
    flat = uniform_image([0.5, 0.4, 0.3], (30, 30))

    def broken():
        raise AllPixelsInvalidError("all pixels invalid")

    scenes = [Scene("ok", lambda: img, e), Scene("flat", lambda: flat, e), Scene("sat", broken, e)]
    report = run_scenes(scenes, [WP_MAX, GE1])
    wp, ge = report.summaries
    assert (wp.stats.n, wp.n_failed) == (2, 1)
    assert (ge.stats.n, ge.n_failed) == (1, 2)
    rows = read_rows(bench_csv(report))
    failed = [r for r in rows if r["row"] == "detail" and r["error"]]
    assert len(failed) == 3 and all(r["recovery_deg"] == "" for r in failed)


def test_all_failed_summary():
    flat = uniform_image([0.5] * 3, (30, 30))
    report = run_scenes([Scene("flat", lambda: flat, np.ones(3))], [GE1])
    assert report.summaries[0].stats is None and report.summaries[0].n_failed == 1


def test_missing_image_names_the_path(tmp_path):
    (tmp_path / "m.json").write_text(json.dumps([{"image": "gone.ppm", "illuminant": [1, 1, 1]}]))
    with pytest.raises(ImageFormatError, match="gone.ppm"):
        run_bench(RunConfig([WP_MAX], manifest_path=tmp_path / "m.json"))


@pytest.mark.parametrize("jobs", [2, 5])
def test_parallel_csv_identical(jobs):
    corpus = SyntheticCorpus(SyntheticSceneSpec(noise_sigma=0.02, salt_fraction=0.005), 12)
    serial = bench_csv(run_bench(RunConfig([WP_MAX, WP_CVP, GE1], synthetic=corpus)))
    parallel = bench_csv(run_bench(RunConfig([WP_MAX, WP_CVP, GE1], synthetic=corpus, parallelism=jobs)))
    assert serial == parallel


def test_sweep_cardinality(tmp_path):
    manifest = write_corpus(SyntheticSceneSpec(), 0, 2, tmp_path)
    grid = SweepGrid(sigmas=(1.0, 2.0), methods=("grey_edge_1",), poolings=("max", "cvp"))
    out = tmp_path / "sweep.csv"
    rows = run_sweep(RunConfig(grid.estimators(), manifest_path=manifest, output_path=out), grid)
    assert len(rows) == 4
    assert len(read_rows(out.read_text())) == 4


def test_sweep_best_worst_k():
    grid = SweepGrid(sigmas=(1.0,), ks=(0.3, 0.7), methods=("double_opponency",), poolings=("max",))
    corpus = SyntheticCorpus(SyntheticSceneSpec(noise_sigma=0.01), 4)
    rows = run_sweep(RunConfig(grid.estimators(), synthetic=corpus), grid)
    cells = [r for r in rows if r["row"] == "cell"]
    best = next(r for r in rows if r["row"] == "best_k")
    worst = next(r for r in rows if r["row"] == "worst_k")
    assert best["median"] == min(c["median"] for c in cells)
    assert worst["median"] == max(c["median"] for c in cells)


@pytest.mark.parametrize(
    "d",
    [
        dict(sigmas=[1], methods=["double_opponency"]),
        dict(sigmas=[], methods=["grey_edge_1"]),
        dict(sigmas=[1], poolings=["top_x"]),
        dict(sigmas=[1], methods=[]),
        dict(sigmas=[1], colour=True),
    ],
)
def test_sweep_grid_validation(d):
    with pytest.raises(ConfigError):
        sweep_grid_from_dict(d)


@pytest.mark.parametrize(
    "d",
    [
        dict(estimators=[]),
        dict(estimators=[{"method": "white_patch"}], parallelism=0),
        dict(estimators=[{"method": "white_patch", "pooling": "median"}]),
        dict(estimators=[{"method": "white_patch", "extra": 1}]),
        dict(estimators=[{"method": "white_patch"}], workers=4),
        dict(estimators=[{"method": "white_patch", "cvp": {"sigma": 3, "c_max": 1}}]),
        dict(estimators=[{"pooling": "max"}]),
    ],
)
def test_run_config_validation(d, tmp_path):
    with pytest.raises(ConfigError):
        run_config_from_dict(d, manifest_path=tmp_path / "m.json")


def test_run_config_needs_one_source():
    with pytest.raises(ConfigError):
        RunConfig([WP_MAX])
    with pytest.raises(ConfigError):
        RunConfig([WP_MAX], manifest_path="m.json", synthetic=SyntheticCorpus())


def test_estimator_from_dict_defaults():
    assert estimator_from_dict({"method": "white_patch"}).pooling_label == "max"
    assert estimator_from_dict({"method": "grey_world"}).pooling_label == "minkowski:1"
    spec = estimator_from_dict({"method": "double_opponency", "sigma": 2, "k": 0.5, "pooling": "cvp", "cvp": {"c_min": 0.05}})
    assert spec.pooling.cvp.c_min == 0.05 and spec.k_surround == 0.5


def test_corpus_on_disk_matches_memory(tmp_path):
    spec = SyntheticSceneSpec(noise_sigma=0.01)
    manifest = write_corpus(spec, 5, 2, tmp_path)
    entries = load_manifest(manifest)
    assert [p.image_path.name for p in entries] == ["synth_000005.ppm", "synth_000006.ppm"]
    _, e = generate_synthetic(spec, 5)
    assert recovery_error(entries[0].ground_truth, e) < 1e-6


@pytest.mark.slow
def test_salt_noise_max_loses_to_cvp():
    spec = SyntheticSceneSpec(salt_fraction=0.005)
    wins = 0
    for seed in range(200):
        img, e = generate_synthetic(spec, seed)
        scene = Scene(str(seed), lambda img=img: img, e)
        rows = run_scenes([scene], [WP_MAX, WP_CVP]).details
        wins += rows[0].recovery_deg > rows[1].recovery_deg
    assert wins >= 140
