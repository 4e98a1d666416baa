"""Bayesian network classifiers assembled from per-node CPTs."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import logsumexp
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.preprocessing import LabelEncoder
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .cpt_tree import CptTree, aggregate_counts, build_design, build_tree, predict_cpt
from .data import Dataset
from .exceptions import ConfigError
from .hls_bayes import fit_bayes, preset
from .hls_map import NAIVE_GRID, INTERVAL_GRID, fit_lasso, fit_ridge, fit_ridge_cv
from .smoothing import additive_cpt
from .structure import CLASS, NetworkStructure, learn_structure

FORMAT_VERSION = 1
LOG_FLOOR = 1e-300


@dataclass(frozen=True)
class SmootherConfig:
    """Parameter-learning method for every CPT.

    ``kind`` is one of ``add`` (pseudo-count ``m``; ``m=0`` is maximum
    likelihood), ``hls-nb`` (ridge, fixed ``tau``), ``hls-cv`` (ridge with
    ``tau`` chosen by internal CV over ``grid``), ``hls-lasso`` or
    ``hls-bayes`` (Gibbs sampler, ``bayes`` names a preset).
    """

    kind: str = "hls-nb"
    m: float = 1.0
    tau: float = 1.0
    grid: str = "interval"
    bayes: str = "ridge-ig"
    burn_in: int = 100
    n_samples: int = 400
    drop_last_column: bool = True
    intercept: bool = False
    cv_folds: int = 5

    def __post_init__(self):
        if self.kind not in ("add", "hls-nb", "hls-cv", "hls-lasso", "hls-bayes"):
            raise ConfigError(f"unknown smoother {self.kind!r}")
        if self.m < 0 or self.tau < 0:
            raise ConfigError("m and tau must be non-negative")
        if self.grid not in ("interval", "naive"):
            raise ConfigError("grid must be 'interval' or 'naive'")

    @property
    def tag(self) -> str:
        if self.kind == "add":
            return "mle" if self.m == 0 else f"add-{self.m:g}"
        if self.kind == "hls-bayes":
            return {"ridge-ig": "hls-ig", "ridge-hc": "hls-hc"}.get(self.bayes, self.bayes)
        return self.kind

    @classmethod
    def parse(cls, text: str) -> "SmootherConfig":
        """Parse CLI strings such as ``add:1``, ``hls-nb:0.5``, ``hls-cv``, ``hls-cv:naive``,
        ``hls-lasso:1`` or ``hls-bayes:hs-ig``."""
        name, _, arg = text.partition(":")
        try:
            if name == "add":
                return cls("add", m=float(arg or 1.0))
            if name == "mle":
                return cls("add", m=0.0)
            if name == "hls-nb":
                return cls("hls-nb", tau=float(arg or 1.0))
            if name == "hls-cv":
                return cls("hls-cv", grid=arg or "interval")
            if name == "hls-lasso":
                return cls("hls-lasso", tau=float(arg or 1.0))
            if name == "hls-bayes":
                preset(arg or "ridge-ig")
                return cls("hls-bayes", bayes=arg or "ridge-ig")
        except ValueError as exc:
            raise ConfigError(f"bad smoother spec {text!r}: {exc}") from None
        raise ConfigError(f"unknown smoother spec {text!r}")


def parse_structure(text: str) -> tuple[str, int | None]:
    """``tan``, ``nb`` or ``kdb:K``."""
    name, _, arg = text.partition(":")
    if name == "tan" and not arg:
        return "tan", None
    if name == "nb" and not arg:
        return "kdb", 0
    if name == "kdb":
        try:
            k = int(arg)
        except ValueError:
            raise ConfigError(f"bad structure spec {text!r}") from None
        if k < 0:
            raise ConfigError("K must be non-negative")
        return "kdb", k
    raise ConfigError(f"unknown structure spec {text!r}")


def fit_cpt(tree: CptTree, counts: np.ndarray, smoother: SmootherConfig, rng=None) -> np.ndarray:
    """Estimate one ``(L, |X_c|)`` CPT from leaf counts."""
    K = tree.child_card
    if smoother.kind == "add":
        return additive_cpt(counts, K, smoother.m, tree)
    if tree.depth == 0:
        # intercept-only regression with an unpenalized intercept: the marginal
        total = counts.sum(axis=0)
        return (total / total.sum() if total.sum() > 0 else np.full(K, 1.0 / K))[None, :]
    design = build_design(tree, smoother.drop_last_column, smoother.intercept, counts)
    if smoother.kind == "hls-nb":
        B, _ = fit_ridge(design, smoother.tau)
    elif smoother.kind == "hls-lasso":
        B, _ = fit_lasso(design, smoother.tau)
    elif smoother.kind == "hls-cv":
        grid = INTERVAL_GRID if smoother.grid == "interval" else NAIVE_GRID
        seed = int(np.random.default_rng(rng).integers(2**32))
        B, _ = fit_ridge_cv(design, grid, smoother.cv_folds, seed)
    else:
        cfg = preset(smoother.bayes, burn_in=smoother.burn_in, n_samples=smoother.n_samples)
        theta, _ = fit_bayes(design, cfg, rng=np.random.default_rng(rng))
        return theta
    return predict_cpt(B, design)


@dataclass
class NodeCpt:
    tree: CptTree
    theta: np.ndarray


@dataclass
class BncModel:
    """Structure, class prior and per-attribute CPTs."""

    structure: NetworkStructure
    class_prior: np.ndarray
    nodes: list[NodeCpt]
    smoothing: str
    attribute_cardinalities: tuple[int, ...]
    metadata: dict = field(default_factory=dict)

    @property
    def n_classes(self) -> int:
        return len(self.class_prior)

    def to_dict(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "smoothing": self.smoothing,
            "structure": self.structure.to_dict(),
            "attribute_cardinalities": list(self.attribute_cardinalities),
            "class_prior": self.class_prior.tolist(),
            "nodes": [
                {
                    "child": n.tree.child,
                    "parents": ["class" if a == CLASS else a for a in n.tree.parents],
                    "parent_cardinalities": list(n.tree.parent_cards),
                    "child_cardinality": n.tree.child_card,
                    "theta": n.theta.tolist(),
                }
                for n in self.nodes
            ],
            "metadata": self.metadata,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "BncModel":
        if doc.get("format_version") != FORMAT_VERSION:
            raise ConfigError(f"unsupported model format version {doc.get('format_version')!r}")
        nodes = []
        for nd in doc["nodes"]:
            parents = tuple(CLASS if a == "class" else int(a) for a in nd["parents"])
            tree = CptTree(int(nd["child"]), parents, tuple(nd["parent_cardinalities"]), int(nd["child_cardinality"]))
            nodes.append(NodeCpt(tree, np.asarray(nd["theta"], dtype=float)))
        return cls(
            NetworkStructure.from_dict(doc["structure"]),
            np.asarray(doc["class_prior"], dtype=float),
            nodes,
            doc["smoothing"],
            tuple(doc["attribute_cardinalities"]),
            doc.get("metadata", {}),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def load(cls, path: str | Path) -> "BncModel":
        return cls.from_dict(json.loads(Path(path).read_text()))


def train(
    dataset: Dataset,
    structure: str | NetworkStructure = "tan",
    smoother: str | SmootherConfig = "hls-nb",
    seed: int = 0,
) -> BncModel:
    """Learn the structure (unless given), then fit every CPT independently."""
    if isinstance(smoother, str):
        smoother = SmootherConfig.parse(smoother)
    mi = None
    if isinstance(structure, str):
        kind, k = parse_structure(structure)
        structure, mi = learn_structure(dataset, kind, k)
    y = dataset.y
    seeds = np.random.SeedSequence(seed).spawn(structure.n_attributes + 1)

    class_tree = CptTree(CLASS, (), (), dataset.n_classes)
    class_counts = np.bincount(y, minlength=dataset.n_classes).astype(float)[None, :]
    class_prior = fit_cpt(class_tree, class_counts, smoother, seeds[-1])[0]

    nodes = []
    for i in range(structure.n_attributes):
        tree = build_tree(dataset, structure, i, mi)
        counts = aggregate_counts(dataset, tree)
        nodes.append(NodeCpt(tree, fit_cpt(tree, counts, smoother, seeds[i])))
    return BncModel(structure, class_prior, nodes, smoother.tag, tuple(dataset.attribute_cardinalities()))


def log_joint(model: BncModel, X: np.ndarray) -> np.ndarray:
    """``log P(y, x)`` for every class, shape ``(n, |Y|)``; unseen values clip to the last bin."""
    X = np.asarray(X, dtype=np.int64)
    if X.ndim == 1:
        X = X[None, :]
    cards = np.asarray(model.attribute_cardinalities)
    X = np.clip(X, 0, cards - 1)
    n, ky = len(X), model.n_classes
    out = np.tile(np.log(np.maximum(model.class_prior, LOG_FLOOR)), (n, 1))
    for node in model.nodes:
        tree = node.tree
        log_theta = np.log(np.maximum(node.theta, LOG_FLOOR))
        base = np.zeros(n, dtype=np.int64)
        class_stride = 0
        for a, stride in zip(tree.parents, tree.strides):
            if a == CLASS:
                class_stride = int(stride)
            else:
                base += X[:, a] * stride
        child = X[:, tree.child]
        for c in range(ky):
            out[:, c] += log_theta[base + c * class_stride, child]
    return out


def predict_posterior(model: BncModel, X: np.ndarray) -> np.ndarray:
    """Class posteriors by log-sum-exp normalization of :func:`log_joint`."""
    lj = log_joint(model, X)
    return np.exp(lj - logsumexp(lj, axis=1, keepdims=True))


def predict_class(model: BncModel, X: np.ndarray) -> np.ndarray:
    """Arg-max class; ``np.argmax`` already breaks ties to the lowest index."""
    return np.argmax(log_joint(model, X), axis=1)


class BayesianNetworkClassifier(ClassifierMixin, BaseEstimator):
    """Scikit-learn wrapper around :func:`train` for integer-coded categorical features.

    Parameters
    ----------
    structure : str
        ``"tan"``, ``"nb"`` or ``"kdb:K"``.
    smoother : str
        Smoother spec understood by :meth:`SmootherConfig.parse`.
    cardinalities : sequence of int, optional
        Per-feature value counts; inferred from the training data when omitted.
    random_state : int
        Seeds CV splits and Gibbs chains.
    """

    def __init__(self, structure="tan", smoother="hls-nb:1", cardinalities=None, random_state=0):
        self.structure = structure
        self.smoother = smoother
        self.cardinalities = cardinalities
        self.random_state = random_state

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=np.int64)
        if X.size and X.min() < 0:
            raise ValueError("feature codes must be non-negative integers")
        self._encoder = LabelEncoder().fit(y)
        self.classes_ = self._encoder.classes_
        codes = self._encoder.transform(y)
        cards = self.cardinalities
        if cards is None:
            cards = [int(X[:, j].max()) + 1 for j in range(X.shape[1])]
        self.n_features_in_ = X.shape[1]
        data = Dataset.from_arrays(X, codes, cards, len(self.classes_))
        self.model_ = train(data, self.structure, self.smoother, self.random_state)
        return self

    def predict_proba(self, X):
        check_is_fitted(self, "model_")
        X = check_array(X, dtype=np.int64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} features, got {X.shape[1]}")
        return predict_posterior(self.model_, X)

    def predict(self, X):
        return self.classes_[np.argmax(self.predict_proba(X), axis=1)]
