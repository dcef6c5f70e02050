"""Agreement metrics, bootstrap intervals and the cross-validation harness."""

import json
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .data import kfold_split
from .errors import DegenerateKappaWarning, EmptyInputError, OrdinalError
from .model import predict_class
from .training import TrainConfig, fit, with_seed


@dataclass(frozen=True, eq=False)
class PredictionSet:
    y_true: np.ndarray
    y_pred: np.ndarray
    k_states: int

    def __post_init__(self):
        t = np.asarray(self.y_true, dtype=np.int64).reshape(-1)
        p = np.asarray(self.y_pred, dtype=np.int64).reshape(-1)
        object.__setattr__(self, "y_true", t)
        object.__setattr__(self, "y_pred", p)
        if t.shape != p.shape:
            raise ValueError(f"{t.size} true labels but {p.size} predictions")
        if t.size == 0:
            raise EmptyInputError("prediction set is empty")
        both = np.concatenate([t, p])
        if both.min() < 0 or both.max() >= self.k_states:
            raise ValueError(f"labels must lie in [0, {self.k_states - 1}]")

    def __len__(self):
        return self.y_true.size

    def take(self, idx):
        return PredictionSet(self.y_true[idx], self.y_pred[idx], self.k_states)


def accuracy(preds):
    return float(np.mean(preds.y_true == preds.y_pred))


def mse(preds):
    diff = (preds.y_pred - preds.y_true).astype(np.float64)
    return float(np.mean(diff * diff))


def confusion_matrix(preds):
    O = np.zeros((preds.k_states, preds.k_states))
    np.add.at(O, (preds.y_true, preds.y_pred), 1.0)
    return O


def quadratic_kappa(preds, warn=True):
    """Cohen's kappa with squared-distance disagreement weights.

    When chance disagreement is zero (both raters put everything in one and
    the same state) the value is 1 by convention.
    """
    O = confusion_matrix(preds)
    n = O.sum()
    E = np.outer(O.sum(axis=1), O.sum(axis=0)) / n
    i = np.arange(preds.k_states)
    w = (i[:, None] - i[None, :]) ** 2.0
    denom = np.sum(w * E)
    if denom == 0:
        if warn:
            warnings.warn("kappa undefined (no expected disagreement); reporting 1",
                          DegenerateKappaWarning, stacklevel=2)
        return 1.0
    return float(1.0 - np.sum(w * O) / denom)


METRICS = {
    "accuracy": accuracy,
    "quadratic_kappa": quadratic_kappa,
    "mse": mse,
}


def bootstrap_ci(preds, metric, n_resamples=1000, level=0.95, seed=0):
    """Percentile bootstrap interval of ``metric`` over resampled pairs.

    Returns ``(point, lower, upper)``; the interval is widened if needed so
    that it contains the point estimate.
    """
    if len(preds) == 0:
        raise EmptyInputError("prediction set is empty")
    if n_resamples < 1:
        raise ValueError("n_resamples must be >= 1")
    if not 0 < level < 1:
        raise ValueError("level must lie in (0, 1)")
    fn = METRICS[metric] if isinstance(metric, str) else metric
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DegenerateKappaWarning)
        point = fn(preds)
        rng = np.random.default_rng(seed)
        N = len(preds)
        stats = np.array([fn(preds.take(rng.integers(0, N, N))) for _ in range(n_resamples)])
    alpha = (1.0 - level) / 2.0
    lower, upper = np.quantile(stats, [alpha, 1.0 - alpha])
    return float(point), float(min(lower, point)), float(max(upper, point))


@dataclass
class CvReport:
    metrics: dict
    per_fold: dict
    k_folds: int
    seed: int
    n_samples: int
    k_states: int
    n_resamples: int
    level: float
    config: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "k_folds": self.k_folds,
            "seed": self.seed,
            "n_samples": self.n_samples,
            "k_states": self.k_states,
            "bootstrap": {"n_resamples": self.n_resamples, "level": self.level},
            "config": self.config,
            "metrics": self.metrics,
            "per_fold": self.per_fold,
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def table(self):
        """Aligned text table: metric, point estimate, interval."""
        lines = [f"{'metric':<16} {'point':>10}  {'interval':<24}"]
        for name in METRICS:
            m = self.metrics[name]
            lines.append(f"{name:<16} {m['point']:>10.4f}  "
                         f"[{m['lower']:.4f}, {m['upper']:.4f}]")
        return "\n".join(lines)


REPORT_SCHEMA = {
    "type": "object",
    "required": ["k_folds", "seed", "n_samples", "k_states", "bootstrap", "config",
                 "metrics", "per_fold"],
    "properties": {
        "k_folds": {"type": "integer", "minimum": 2},
        "seed": {"type": "integer"},
        "n_samples": {"type": "integer", "minimum": 1},
        "k_states": {"type": "integer", "minimum": 2},
        "bootstrap": {
            "type": "object",
            "required": ["n_resamples", "level"],
            "properties": {"n_resamples": {"type": "integer", "minimum": 1},
                           "level": {"type": "number", "exclusiveMinimum": 0,
                                     "exclusiveMaximum": 1}},
        },
        "config": {"type": "object"},
        "metrics": {
            "type": "object",
            "required": list(METRICS),
            "additionalProperties": {
                "type": "object",
                "required": ["point", "lower", "upper"],
                "properties": {k: {"type": "number"} for k in ("point", "lower", "upper")},
            },
        },
        "per_fold": {
            "type": "object",
            "required": list(METRICS),
            "additionalProperties": {"type": "array", "items": {"type": "number"}},
        },
    },
}


class FoldError(OrdinalError):
    def __init__(self, fold, cause):
        super().__init__(f"fold {fold}: {cause}")
        self.fold = fold
        self.cause = cause


def fit_fold(dataset, train_idx, test_idx, config):
    """Train on ``train_idx`` (standardization included) and predict ``test_idx``."""
    model, _ = fit(dataset.subset(train_idx), config)
    test = dataset.features[test_idx]
    return model, predict_class(model, model.standardize(test))


def _run_fold(args):
    i, dataset, train_idx, test_idx, config = args
    try:
        return fit_fold(dataset, train_idx, test_idx, config)[1]
    except OrdinalError as exc:
        raise FoldError(i, exc) from exc


def cross_validate(dataset, train_config=None, k_folds=10, seed=0,
                   n_resamples=1000, level=0.95, jobs=1):
    """Pooled out-of-fold evaluation with bootstrap intervals.

    Every fold trains with its own seed derived from ``seed``, so results do
    not depend on ``jobs``.
    """
    config = train_config or TrainConfig()
    plan = kfold_split(dataset.labels, k_folds, seed)
    master = np.random.SeedSequence(seed)
    fold_seeds = [int(s.generate_state(1, np.uint64)[0]) for s in master.spawn(k_folds)]
    boot_seed = int(master.generate_state(1, np.uint64)[0])

    tasks = []
    for i in range(k_folds):
        train_idx, test_idx = plan.train_test(i)
        tasks.append((i, dataset, train_idx, test_idx, with_seed(config, fold_seeds[i])))
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            fold_preds = list(pool.map(_run_fold, tasks))
    else:
        fold_preds = [_run_fold(t) for t in tasks]

    y_pred = np.empty(len(dataset), dtype=np.int64)
    per_fold = {name: [] for name in METRICS}
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DegenerateKappaWarning)
        for (i, _, _, test_idx, _), pred in zip(tasks, fold_preds):
            y_pred[test_idx] = pred
            fold_set = PredictionSet(dataset.labels[test_idx], pred, dataset.k_states)
            for name, fn in METRICS.items():
                per_fold[name].append(fn(fold_set))

    pooled = PredictionSet(dataset.labels, y_pred, dataset.k_states)
    metrics = {}
    for name in METRICS:
        point, lower, upper = bootstrap_ci(pooled, name, n_resamples, level, boot_seed)
        metrics[name] = {"point": point, "lower": lower, "upper": upper}
    return CvReport(metrics=metrics, per_fold=per_fold, k_folds=k_folds, seed=int(seed),
                    n_samples=len(dataset), k_states=dataset.k_states,
                    n_resamples=n_resamples, level=level, config=config.to_dict())
