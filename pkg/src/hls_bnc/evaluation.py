"""Cross-validated benchmarking, Win-Draw-Loss tallies and fit timing."""

from __future__ import annotations

import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .classifier import SmootherConfig, predict_posterior, train
from .cpt_tree import CptTree, build_design, counts_from_values, duplicate_rows
from .data import Dataset, FoldPlan, gen_synthetic, make_folds
from .discretize import apply_discretization, fit_discretization
from .exceptions import ConfigError
from .hls_map import fit_ridge

PROB_FLOOR = 1e-300
LOSSES = ("zero_one", "log_loss")
DEFAULT_TOLERANCE = {"zero_one": 0.0, "log_loss": 1e-12}


class EvaluationError(RuntimeError):
    """A fold failed; the message names the dataset, model and fold."""


@dataclass(frozen=True)
class ModelConfig:
    """Structure spec plus smoother spec, e.g. ``ModelConfig("kdb:3", "hls-nb:1")``."""

    structure: str = "tan"
    smoother: str = "hls-nb:1"
    name: str | None = None

    @property
    def label(self) -> str:
        return self.name or f"{self.structure}/{self.smoother}"


@dataclass
class EvalResult:
    dataset: str
    model: str
    fold_zero_one: np.ndarray
    fold_log_loss: np.ndarray
    fit_seconds: float
    n_rows: int = 0

    @property
    def zero_one(self) -> float:
        """Mean of the per-fold error rates."""
        return float(np.mean(self.fold_zero_one))

    @property
    def log_loss(self) -> float:
        return float(np.mean(self.fold_log_loss))

    @property
    def n_folds(self) -> int:
        return len(self.fold_zero_one)

    def loss(self, name: str) -> float:
        if name not in LOSSES:
            raise ConfigError(f"loss must be one of {LOSSES}")
        return getattr(self, name)

    def summary(self) -> dict:
        return {
            "dataset": self.dataset,
            "model": self.model,
            "zero_one": self.zero_one,
            "log_loss": self.log_loss,
            "fit_seconds": self.fit_seconds,
            "folds": self.n_folds,
        }


@dataclass(frozen=True)
class WdlRecord:
    wins: int
    draws: int
    losses: int
    loss: str
    per_dataset: dict = field(default_factory=dict, compare=False)

    @property
    def total(self) -> int:
        return self.wins + self.draws + self.losses

    def __str__(self) -> str:
        return f"{self.wins}-{self.draws}-{self.losses}"


def _safe_name(text: str) -> str:
    return "".join(c if c.isalnum() or c in "-_." else "_" for c in text)


def score_rows(proba: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-row ``-ln P(y_true | x)`` and 0/1 error (argmax, lowest index on ties)."""
    p_true = proba[np.arange(len(y)), y]
    return -np.log(np.maximum(p_true, PROB_FLOOR)), (np.argmax(proba, axis=1) != y).astype(float)


def run_cv(
    dataset: Dataset,
    config: ModelConfig,
    folds: FoldPlan,
    *,
    dataset_name: str = "dataset",
    seed: int = 0,
    out_dir: str | Path | None = None,
) -> EvalResult:
    """k-fold CV: discretize on the training part, fit, score the held-out part.

    When ``out_dir`` is given, one JSON report per fold is written with the
    per-row scores so every aggregate can be recomputed offline.
    """
    if len(folds.assignment) != dataset.n_rows:
        raise ConfigError("fold plan does not match the dataset size")
    smoother = SmootherConfig.parse(config.smoother)
    fold_zo, fold_ll = np.empty(folds.k), np.empty(folds.k)
    fit_seconds = 0.0
    for f in range(folds.k):
        train_rows, test_rows = folds.split(f)
        try:
            train_raw, test_raw = dataset.take(train_rows), dataset.take(test_rows)
            disc = fit_discretization(train_raw)
            train_set = apply_discretization(disc, train_raw)
            test_set = apply_discretization(disc, test_raw)
            start = time.perf_counter()
            model = train(train_set, config.structure, smoother, seed=seed + f)
            fit_seconds += time.perf_counter() - start
            proba = predict_posterior(model, test_set.attribute_matrix())
        except Exception as exc:
            raise EvaluationError(f"{dataset_name} / {config.label} / fold {f}: {exc!r}") from exc
        y = test_set.y
        ll, zo = score_rows(proba, y)
        fold_ll[f], fold_zo[f] = ll.mean(), zo.mean()
        if out_dir is not None:
            out = Path(out_dir)
            out.mkdir(parents=True, exist_ok=True)
            doc = {
                "dataset": dataset_name,
                "model": config.label,
                "structure": config.structure,
                "smoother": config.smoother,
                "fold": f,
                "zero_one": fold_zo[f],
                "log_loss": fold_ll[f],
                "rows": test_rows.tolist(),
                "y_true": y.tolist(),
                "row_log_loss": ll.tolist(),
                "row_zero_one": zo.tolist(),
            }
            name = f"{_safe_name(dataset_name)}__{_safe_name(config.label)}__fold{f}.json"
            (out / name).write_text(json.dumps(doc))
    return EvalResult(dataset_name, config.label, fold_zo, fold_ll, fit_seconds, dataset.n_rows)


def load_fold_reports(directory: str | Path) -> list[dict]:
    return [json.loads(p.read_text()) for p in sorted(Path(directory).glob("*__fold*.json"))]


def _cv_job(args):
    name, dataset, config, k, seed, out_dir = args
    return run_cv(dataset, config, make_folds(dataset, k, seed), dataset_name=name, seed=seed, out_dir=out_dir)


def run_benchmark(
    datasets: Mapping[str, Dataset],
    configs: Sequence[ModelConfig],
    *,
    k: int = 10,
    seed: int = 0,
    out_dir: str | Path | None = None,
    n_jobs: int = 1,
) -> dict[str, dict[str, EvalResult]]:
    """CV every config on every dataset with shared folds; returns ``{model: {dataset: result}}``."""
    jobs = [(name, ds, cfg, min(k, ds.n_rows), seed, out_dir) for cfg in configs for name, ds in datasets.items()]
    if n_jobs > 1:
        with ProcessPoolExecutor(n_jobs) as pool:
            results = list(pool.map(_cv_job, jobs))
    else:
        results = [_cv_job(j) for j in jobs]
    table: dict[str, dict[str, EvalResult]] = {cfg.label: {} for cfg in configs}
    for res in results:
        table[res.model][res.dataset] = res
    return table


def _by_dataset(results) -> dict[str, EvalResult]:
    if isinstance(results, Mapping):
        return dict(results)
    return {r.dataset: r for r in results}


def wdl(results_a, results_b, loss: str = "log_loss", draw_tolerance: float | None = None) -> WdlRecord:
    """Win-Draw-Loss of A against B; a win means A has the lower mean loss.

    Zero-one loss draws on exact equality by default, log loss within 1e-12.
    """
    a, b = _by_dataset(results_a), _by_dataset(results_b)
    if set(a) != set(b):
        raise ConfigError(f"dataset sets differ: {sorted(set(a) ^ set(b))}")
    if loss not in LOSSES:
        raise ConfigError(f"loss must be one of {LOSSES}")
    tol = DEFAULT_TOLERANCE[loss] if draw_tolerance is None else draw_tolerance
    if tol < 0:
        raise ConfigError("draw_tolerance must be non-negative")
    wins = draws = losses = 0
    detail = {}
    for name in sorted(a):
        diff = a[name].loss(loss) - b[name].loss(loss)
        if abs(diff) <= tol:
            draws += 1
            detail[name] = "draw"
        elif diff < 0:
            wins += 1
            detail[name] = "win"
        else:
            losses += 1
            detail[name] = "loss"
    return WdlRecord(wins, draws, losses, loss, detail)


def write_summary_csv(table: Mapping[str, Mapping[str, EvalResult]], path: str | Path) -> None:
    import csv

    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, ["dataset", "model", "zero_one", "log_loss", "fit_seconds", "folds"])
        writer.writeheader()
        for per_model in table.values():
            for res in per_model.values():
                writer.writerow(res.summary())


# ---------------------------------------------------------------- timing


@dataclass(frozen=True)
class TimingConfig:
    """Synthetic node for timing: ``n_parents`` parents of equal ``cardinality``."""

    cardinality: int = 2
    n_samples: int = 1000
    n_parents: int = 4
    seed: int = 0


def timing_node(config: TimingConfig):
    """Synthetic data for one node: ``(tree, parent_values, child_values)``."""
    data = gen_synthetic(config.n_parents, config.cardinality, config.n_samples, config.seed)
    p = config.n_parents
    tree = CptTree(p, tuple(range(p)), (config.cardinality,) * p, config.cardinality)
    return tree, np.column_stack([data.columns[j] for j in range(p)]), data.columns[p]


def timing_design(node, variant: str = "fast"):
    """Build the design timed by :func:`time_fit`.

    ``fast`` aggregates observations into per-leaf counts; ``slow`` keeps
    one design row per observation.
    """
    if variant not in ("fast", "slow"):
        raise ConfigError("variant must be 'fast' or 'slow'")
    tree, X, child = node
    design = build_design(tree, drop_last_column=True, counts=counts_from_values(tree, X, child))
    return design if variant == "fast" else duplicate_rows(design)


def time_fit(
    config: TimingConfig = TimingConfig(),
    smoother: str = "hls-nb:1",
    repetitions: int = 10,
    variant: str = "fast",
    *,
    include_design: bool = False,
) -> float:
    """Minimum wall-clock seconds over ``repetitions`` ridge fits.

    Only the parameter-learning call is timed unless ``include_design``,
    in which case design construction is timed with it.
    """
    if repetitions < 1:
        raise ConfigError("repetitions must be >= 1")
    sm = SmootherConfig.parse(smoother)
    if sm.kind != "hls-nb":
        raise ConfigError("timing supports the fixed-tau ridge smoother only")
    best = np.inf
    node = timing_node(config)
    design = None if include_design else timing_design(node, variant)
    for _ in range(repetitions):
        start = time.perf_counter()
        d = timing_design(node, variant) if include_design else design
        fit_ridge(d, sm.tau)
        best = min(best, time.perf_counter() - start)
    return float(best)


def timing_record(config: TimingConfig, repetitions: int = 10, smoother: str = "hls-nb:1") -> dict:
    return {
        **asdict(config),
        "fast_seconds": time_fit(config, smoother, repetitions, "fast"),
        "slow_seconds": time_fit(config, smoother, repetitions, "slow"),
        "total_fast_seconds": time_fit(config, smoother, repetitions, "fast", include_design=True),
    }
