"""Batch evaluation over manifests or synthetic corpora, parameter sweeps, CSV reports.

Per-image work runs on a bounded thread pool; rows are merged back in scene order
so the CSV is byte-identical at any parallelism.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Callable

import numpy as np

from .algorithms import METHODS, SIGMA_METHODS, EstimatorSpec, estimate
from .contrast import CvpConfig
from .errors import AllPixelsInvalidError, ConfigError, DataError, DegenerateFeatureMapError
from .imgio import Image, load_image, load_manifest
from .metrics import ErrorStats, recovery_error, reproduction_error, summarize
from .pooling import PoolingSpec
from .synth import SyntheticSceneSpec, generate_synthetic

log = logging.getLogger(__name__)

DETAIL_COLUMNS = [
    "image", "method", "pooling", "sigma", "k",
    "x_r", "x_g", "x_b", "est_r", "est_g", "est_b",
    "recovery_deg", "reproduction_deg",
]  # fmt: skip
SUMMARY_COLUMNS = [
    "method", "pooling", "sigma", "k",
    "n", "mean", "median", "trimean", "best25", "worst25", "n_failed",
]  # fmt: skip
# one long-format file: a leading "row" column tags detail vs summary rows
BENCH_COLUMNS = ["row"] + DETAIL_COLUMNS + [c for c in SUMMARY_COLUMNS if c not in DETAIL_COLUMNS] + ["error"]
SWEEP_COLUMNS = ["row", "method", "pooling", "sigma", "k", "n", "n_failed", "median", "trimean", "mean"]


@dataclass(frozen=True)
class SyntheticCorpus:
    spec: SyntheticSceneSpec = field(default_factory=SyntheticSceneSpec)
    count: int = 200


@dataclass
class RunConfig:
    estimators: list[EstimatorSpec]
    manifest_path: Path | None = None
    output_path: Path | None = None
    parallelism: int = 1
    seed: int = 0
    synthetic: SyntheticCorpus | None = None

    def __post_init__(self):
        if not self.estimators:
            raise ConfigError("at least one estimator is required")
        if self.parallelism < 1:
            raise ConfigError(f"parallelism must be >= 1, got {self.parallelism}")
        if (self.manifest_path is None) == (self.synthetic is None):
            raise ConfigError("give exactly one of a manifest or a synthetic corpus")


@dataclass(frozen=True)
class SweepGrid:
    sigmas: tuple[float, ...] = ()
    ks: tuple[float, ...] = ()
    methods: tuple[str, ...] = ("grey_edge_1",)
    poolings: tuple[str, ...] = ("max", "cvp")
    cvp: CvpConfig = field(default_factory=CvpConfig)

    def __post_init__(self):
        if not self.methods:
            raise ConfigError("sweep grid needs at least one method")
        if not self.poolings:
            raise ConfigError("sweep grid needs at least one pooling")
        bad = set(self.methods) - set(METHODS)
        if bad:
            raise ConfigError(f"unknown method(s) {sorted(bad)}")
        bad = set(self.poolings) - {"max", "cvp"}
        if bad:
            raise ConfigError(f"sweep poolings must be 'max' or 'cvp', got {sorted(bad)}")
        if any(m in SIGMA_METHODS for m in self.methods) and not self.sigmas:
            raise ConfigError("sweep grid needs at least one sigma")
        if "double_opponency" in self.methods and not self.ks:
            raise ConfigError("double_opponency in a sweep needs at least one k")

    def estimators(self) -> list[EstimatorSpec]:
        out = []
        for method in self.methods:
            for pooling_kind in self.poolings:
                pooling = PoolingSpec(pooling_kind, cvp=self.cvp)
                if method == "grey_world":
                    pooling = None
                sigmas = self.sigmas if method in SIGMA_METHODS else (None,)
                ks = self.ks if method == "double_opponency" else (None,)
                for sigma in sigmas:
                    for k in ks:
                        out.append(EstimatorSpec(method, pooling, sigma=sigma, k_surround=k))
        return out


@dataclass(frozen=True)
class DetailRow:
    image: str
    estimator: EstimatorSpec
    x_used: np.ndarray | None = None
    estimate: np.ndarray | None = None
    recovery_deg: float = math.nan
    reproduction_deg: float = math.nan
    error: str = ""

    @property
    def failed(self) -> bool:
        return self.estimate is None


@dataclass(frozen=True)
class SummaryRow:
    estimator: EstimatorSpec
    stats: ErrorStats | None
    n_failed: int


@dataclass
class BenchReport:
    details: list[DetailRow]
    summaries: list[SummaryRow]

    def summary_for(self, method: str, pooling: str, sigma=None, k=None) -> SummaryRow:
        for s in self.summaries:
            e = s.estimator
            if (e.method, e.pooling_label, e.sigma, e.k_surround) == (method, pooling, sigma, k):
                return s
        raise KeyError((method, pooling, sigma, k))


@dataclass(frozen=True)
class Scene:
    name: str
    load: Callable[[], Image]
    ground_truth: np.ndarray


# ---------------------------------------------------------------------------
# scenes
# ---------------------------------------------------------------------------


def manifest_scenes(path) -> list[Scene]:
    path = Path(path)
    base = path.parent
    scenes = []
    for entry in load_manifest(path):
        try:
            name = str(entry.image_path.relative_to(base))
        except ValueError:
            name = str(entry.image_path)
        scenes.append(
            Scene(name, lambda e=entry: load_image(e.image_path, e.preprocess_spec()), entry.ground_truth)
        )
    return scenes


def synthetic_scenes(corpus: SyntheticCorpus, seed: int) -> list[Scene]:
    scenes = []
    for s in range(seed, seed + corpus.count):
        img, e = generate_synthetic(corpus.spec, s)
        scenes.append(Scene(f"synth_{s:06d}", lambda img=img: img, e))
    return scenes


def config_scenes(cfg: RunConfig) -> list[Scene]:
    if cfg.synthetic is not None:
        return synthetic_scenes(cfg.synthetic, cfg.seed)
    return manifest_scenes(cfg.manifest_path)


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------


def evaluate_scene(scene: Scene, estimators: list[EstimatorSpec]) -> list[DetailRow]:
    try:
        img = scene.load()
    except AllPixelsInvalidError as exc:
        return [DetailRow(scene.name, spec, error=str(exc)) for spec in estimators]
    except DataError as exc:
        raise type(exc)(f"{scene.name}: {exc}") from exc

    rows = []
    for spec in estimators:
        try:
            est = estimate(img, spec)
        except DegenerateFeatureMapError as exc:
            rows.append(DetailRow(scene.name, spec, error=str(exc)))
            continue
        e = est.illuminant
        repro = reproduction_error(e, scene.ground_truth) if np.all(e > 0) else math.nan
        rows.append(
            DetailRow(scene.name, spec, est.pooled.x_used, e, recovery_error(e, scene.ground_truth), repro)
        )
    return rows


def run_scenes(scenes: list[Scene], estimators: list[EstimatorSpec], parallelism: int = 1) -> BenchReport:
    if parallelism == 1:
        per_scene = [evaluate_scene(s, estimators) for s in scenes]
    else:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            per_scene = list(pool.map(lambda s: evaluate_scene(s, estimators), scenes))

    details = [row for rows in per_scene for row in rows]
    summaries = []
    for i, spec in enumerate(estimators):
        rows = [rows[i] for rows in per_scene]
        ok = [r.recovery_deg for r in rows if not r.failed]
        n_failed = len(rows) - len(ok)
        if n_failed:
            log.warning("%s/%s: %d of %d estimations failed", spec.method, spec.pooling_label, n_failed, len(rows))
        summaries.append(SummaryRow(spec, summarize(ok) if ok else None, n_failed))
    return BenchReport(details, summaries)


def run_bench(cfg: RunConfig) -> BenchReport:
    report = run_scenes(config_scenes(cfg), cfg.estimators, cfg.parallelism)
    if cfg.output_path is not None:
        Path(cfg.output_path).write_text(bench_csv(report), newline="")
    return report


def run_sweep(cfg: RunConfig, grid: SweepGrid) -> list[dict]:
    """Evaluate the full grid; returns long-format rows (also written as CSV if configured).

    For double_opponency, extra ``best_k``/``worst_k`` rows pick the k with the
    lowest/highest median per (pooling, sigma).
    """
    report = run_scenes(config_scenes(cfg), grid.estimators(), cfg.parallelism)
    rows = [_sweep_row("cell", s) for s in report.summaries]
    for method in grid.methods:
        if method != "double_opponency":
            continue
        for pooling in grid.poolings:
            for sigma in grid.sigmas:
                cells = [
                    s for s in report.summaries
                    if s.estimator.method == method and s.estimator.pooling_label == pooling
                    and s.estimator.sigma == sigma and s.stats is not None
                ]  # fmt: skip
                if not cells:
                    continue
                rows.append(_sweep_row("best_k", min(cells, key=lambda s: s.stats.median)))
                rows.append(_sweep_row("worst_k", max(cells, key=lambda s: s.stats.median)))
    if cfg.output_path is not None:
        Path(cfg.output_path).write_text(_csv_text(SWEEP_COLUMNS, rows), newline="")
    return rows


def _sweep_row(tag: str, s: SummaryRow) -> dict:
    e = s.estimator
    st = s.stats
    return {
        "row": tag,
        "method": e.method,
        "pooling": e.pooling_label,
        "sigma": e.sigma,
        "k": e.k_surround,
        "n": st.n if st else 0,
        "n_failed": s.n_failed,
        "median": st.median if st else None,
        "trimean": st.trimean if st else None,
        "mean": st.mean if st else None,
    }


# ---------------------------------------------------------------------------
# CSV
# ---------------------------------------------------------------------------


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _csv_text(columns, rows) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({c: _fmt(row.get(c)) for c in columns})
    return buf.getvalue()


def _estimator_cells(e: EstimatorSpec) -> dict:
    return {"method": e.method, "pooling": e.pooling_label, "sigma": e.sigma, "k": e.k_surround}


def bench_csv(report: BenchReport) -> str:
    rows = []
    for d in report.details:
        row = {"row": "detail", "image": d.image, **_estimator_cells(d.estimator), "error": d.error}
        if d.x_used is not None:
            row.update(zip(("x_r", "x_g", "x_b"), map(float, d.x_used)))
        if not d.failed:
            row.update(zip(("est_r", "est_g", "est_b"), map(float, d.estimate)))
            row["recovery_deg"] = d.recovery_deg
            row["reproduction_deg"] = d.reproduction_deg
        rows.append(row)
    for s in report.summaries:
        row = {"row": "summary", **_estimator_cells(s.estimator), "n_failed": s.n_failed}
        st = s.stats
        row["n"] = st.n if st else 0
        if st:
            row.update(mean=st.mean, median=st.median, trimean=st.trimean, best25=st.best25_mean, worst25=st.worst25_mean)
        rows.append(row)
    return _csv_text(BENCH_COLUMNS, rows)


# ---------------------------------------------------------------------------
# JSON configs (unknown keys rejected)
# ---------------------------------------------------------------------------


def _check_keys(d, allowed, what):
    if not isinstance(d, dict):
        raise ConfigError(f"{what} must be a JSON object")
    unknown = set(d) - set(allowed)
    if unknown:
        raise ConfigError(f"{what}: unknown key(s) {sorted(unknown)}")


def read_json(path):
    try:
        return json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: JSON parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None


def cvp_config_from_dict(d) -> CvpConfig:
    _check_keys(d, [f.name for f in fields(CvpConfig)], "cvp config")
    try:
        return CvpConfig(**d)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"cvp config: {exc}") from None


def estimator_from_dict(d, cvp: CvpConfig | None = None) -> EstimatorSpec:
    _check_keys(d, ["method", "pooling", "sigma", "k", "surround_ratio", "cvp"], "estimator")
    if "method" not in d:
        raise ConfigError("estimator: missing 'method'")
    if "cvp" in d:
        cvp = cvp_config_from_dict(d["cvp"])
    pooling_text = d.get("pooling", "minkowski:1" if d["method"] == "grey_world" else "max")
    try:
        pooling = PoolingSpec.parse(pooling_text, cvp)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return EstimatorSpec(
        d["method"],
        pooling,
        sigma=d.get("sigma"),
        k_surround=d.get("k"),
        surround_ratio=d.get("surround_ratio", 3.0),
    )


def synthetic_spec_from_dict(d) -> SyntheticSceneSpec:
    _check_keys(d, [f.name for f in fields(SyntheticSceneSpec)], "synthetic spec")
    try:
        return SyntheticSceneSpec.from_dict(d)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"synthetic spec: {exc}") from None


def run_config_from_dict(d, manifest_path=None, output_path=None) -> RunConfig:
    """Config file keys: ``estimators`` (required), ``parallelism``, ``seed``, ``cvp``, ``synthetic``."""
    _check_keys(d, ["estimators", "parallelism", "seed", "cvp", "synthetic"], "run config")
    cvp = cvp_config_from_dict(d["cvp"]) if "cvp" in d else CvpConfig()
    if not isinstance(d.get("estimators"), list):
        raise ConfigError("run config: 'estimators' must be a list")
    estimators = [estimator_from_dict(e, cvp) for e in d["estimators"]]
    synthetic = None
    if "synthetic" in d and manifest_path is None:
        syn = dict(d["synthetic"])
        count = syn.pop("count", 200)
        synthetic = SyntheticCorpus(synthetic_spec_from_dict(syn), int(count))
    return RunConfig(
        estimators=estimators,
        manifest_path=Path(manifest_path) if manifest_path is not None else None,
        output_path=Path(output_path) if output_path is not None else None,
        parallelism=int(d.get("parallelism", 1)),
        seed=int(d.get("seed", 0)),
        synthetic=synthetic,
    )


def sweep_grid_from_dict(d) -> SweepGrid:
    _check_keys(d, ["sigmas", "ks", "methods", "poolings", "cvp"], "sweep grid")
    cvp = cvp_config_from_dict(d["cvp"]) if "cvp" in d else CvpConfig()
    return SweepGrid(
        sigmas=tuple(float(s) for s in d.get("sigmas", ())),
        ks=tuple(float(k) for k in d.get("ks", ())),
        methods=tuple(d.get("methods", ("grey_edge_1",))),
        poolings=tuple(d.get("poolings", ("max", "cvp"))),
        cvp=cvp,
    )
