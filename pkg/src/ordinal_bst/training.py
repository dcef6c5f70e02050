"""Fitting: initialization, standardization, mini-batch descent, grad checks."""

import json
import math
import time
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np

from .encoding import tree_depth
from .errors import (
    ConfigError,
    DataError,
    InsufficientDataError,
    InvalidDatasetError,
    TrainingDivergedError,
)
from .model import (
    PARAM_NAMES,
    TOKEN_DIM,
    OrdinalModel,
    Standardizer,
    batch_loss_and_grad,
)
from .neuralnet import GruParams

OPTIMIZERS = ("sgd", "adam")
PENALTIES = ("none", "l2", "l1", "elastic-net")


@dataclass(frozen=True)
class TrainConfig:
    """Training hyper-parameters.

    ``h_hidden=None`` means one hidden unit per tree level. The penalty is
    applied to the projection weights ``W_e`` only; ``l1_ratio`` mixes the
    L1 and L2 parts of the elastic net.
    """
    h_hidden: int = None
    learning_rate: float = 0.01
    epochs: int = 200
    batch_size: int = 32
    seed: int = 0
    optimizer: str = "adam"
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    penalty: str = "none"
    penalty_strength: float = 0.0
    l1_ratio: float = 0.5

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ConfigError(f"learning_rate must be positive, got {self.learning_rate}")
        if int(self.epochs) != self.epochs or self.epochs < 1:
            raise ConfigError(f"epochs must be an integer >= 1, got {self.epochs}")
        if int(self.batch_size) != self.batch_size or self.batch_size < 1:
            raise ConfigError(f"batch_size must be an integer >= 1, got {self.batch_size}")
        if self.h_hidden is not None and (int(self.h_hidden) != self.h_hidden
                                          or self.h_hidden < 1):
            raise ConfigError(f"h_hidden must be a positive integer, got {self.h_hidden}")
        if self.optimizer not in OPTIMIZERS:
            raise ConfigError(f"optimizer must be one of {OPTIMIZERS}, got {self.optimizer!r}")
        if self.penalty not in PENALTIES:
            raise ConfigError(f"penalty must be one of {PENALTIES}, got {self.penalty!r}")
        if not self.penalty_strength >= 0:
            raise ConfigError(f"penalty_strength must be >= 0, got {self.penalty_strength}")
        if not 0 <= self.l1_ratio <= 1:
            raise ConfigError(f"l1_ratio must lie in [0, 1], got {self.l1_ratio}")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1 and self.epsilon > 0):
            raise ConfigError("invalid adam decay rates or epsilon")

    @classmethod
    def from_dict(cls, doc):
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(doc) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        return cls(**doc)

    @classmethod
    def from_json_file(cls, path):
        with open(path, encoding="utf-8") as fh:
            try:
                doc = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{path}: invalid JSON ({exc})") from None
        if not isinstance(doc, dict):
            raise ConfigError(f"{path}: config must be a JSON object")
        return cls.from_dict(doc)

    def to_dict(self):
        return asdict(self)


@dataclass
class TrainHistory:
    losses: list = field(default_factory=list)
    wall_time: float = 0.0
    epochs: int = 0
    steps: int = 0


def _glorot(rng, fan_out, fan_in):
    a = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-a, a, size=(fan_out, fan_in))


def init_params(d_features, h_hidden, seed):
    """Glorot-uniform weights, zero biases; deterministic in ``seed``.

    Returns a dict keyed by :data:`~ordinal_bst.model.PARAM_NAMES`.
    """
    rng = np.random.default_rng(seed)
    h = h_hidden
    params = {"W_e": _glorot(rng, h, d_features), "b_e": np.zeros(h)}
    for g in "zrh":
        params["W_" + g] = _glorot(rng, h, TOKEN_DIM)
        params["U_" + g] = _glorot(rng, h, h)
        params["b_" + g] = np.zeros(h)
    params["w_o"] = _glorot(rng, 1, h)[0]
    params["b_o"] = np.asarray(0.0)
    return {name: params[name] for name in PARAM_NAMES}


def init_model(d_features, k_states, h_hidden, seed, standardizer=None, **meta):
    params = init_params(d_features, h_hidden, seed)
    return OrdinalModel(
        k_states=k_states,
        W_e=params["W_e"], b_e=params["b_e"],
        gru=GruParams(**{k: params[k] for k in PARAM_NAMES[2:-2]}),
        w_o=params["w_o"], b_o=params["b_o"],
        standardizer=standardizer or Standardizer.identity(d_features),
        **meta)


def fit_standardizer(features):
    """Column means and population standard deviations."""
    X = np.asarray(features, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 2:
        raise InsufficientDataError("standardization needs at least 2 rows")
    return Standardizer(X.mean(axis=0), X.std(axis=0))


def penalty_value_and_grad(W, config):
    lam = config.penalty_strength
    if config.penalty == "none" or lam == 0:
        return 0.0, np.zeros_like(W)
    l1_weight = {"l1": 1.0, "l2": 0.0, "elastic-net": config.l1_ratio}[config.penalty]
    value = lam * (l1_weight * np.abs(W).sum() + (1 - l1_weight) * np.square(W).sum())
    grad = lam * (l1_weight * np.sign(W) + (1 - l1_weight) * 2.0 * W)
    return float(value), grad


class _Adam:
    def __init__(self, size, config):
        self.lr = config.learning_rate
        self.b1, self.b2, self.eps = config.beta1, config.beta2, config.epsilon
        self.m = np.zeros(size)
        self.v = np.zeros(size)
        self.t = 0

    def step(self, theta, grad):
        self.t += 1
        self.m *= self.b1
        self.m += (1 - self.b1) * grad
        self.v *= self.b2
        self.v += (1 - self.b2) * grad * grad
        m_hat = self.m / (1.0 - self.b1 ** self.t)
        v_hat = self.v / (1.0 - self.b2 ** self.t)
        theta -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


class _Sgd:
    def __init__(self, size, config):
        self.lr = config.learning_rate

    def step(self, theta, grad):
        theta -= self.lr * grad


def _flat_buffer(params):
    """Copy ``params`` into one vector; return it with per-name views into it."""
    sizes = [params[k].size for k in PARAM_NAMES]
    theta = np.concatenate([np.ravel(params[k]) for k in PARAM_NAMES]).astype(np.float64)
    views, offset = {}, 0
    for k, n in zip(PARAM_NAMES, sizes):
        views[k] = theta[offset:offset + n].reshape(np.shape(params[k]))
        offset += n
    return theta, views


def _validate_dataset(dataset):
    X = np.asarray(dataset.features, dtype=np.float64)
    y = np.asarray(dataset.labels)
    if dataset.k_states < 2:
        raise InvalidDatasetError(f"need at least 2 ordinal states, got {dataset.k_states}")
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise InvalidDatasetError(f"features {X.shape} do not match {y.shape[0]} labels")
    if not np.all(np.isfinite(X)):
        raise DataError("features contain non-finite values")
    if y.size and (y.min() < 0 or y.max() >= dataset.k_states):
        raise InvalidDatasetError(f"labels must lie in [0, {dataset.k_states - 1}]")
    return X, y


def fit(dataset, config=None, callback=None):
    """Train an :class:`OrdinalModel` by teacher forcing.

    The objective is the mean over samples of the summed per-bit NLL, plus
    the configured penalty on ``W_e``. Samples are reshuffled every epoch by
    a generator seeded from ``config.seed``.
    """
    config = config or TrainConfig()
    X_raw, y = _validate_dataset(dataset)
    standardizer = fit_standardizer(X_raw)
    X = standardizer.transform(X_raw)
    N, d = X.shape
    h = config.h_hidden or tree_depth(dataset.k_states)

    seeds = np.random.SeedSequence(config.seed).spawn(2)
    model = init_model(d, dataset.k_states, h, seeds[0],
                       standardizer=standardizer,
                       feature_names=tuple(getattr(dataset, "feature_names", None) or ()) or None,
                       label_dictionary=tuple(getattr(dataset, "label_dictionary", None) or ()) or None)
    shuffle_rng = np.random.default_rng(seeds[1])
    # the working model's arrays are views into theta, updated in place
    theta, views = _flat_buffer(model.parameters())
    model = model.with_parameters(views)
    optimizer = (_Adam if config.optimizer == "adam" else _Sgd)(theta.size, config)
    W_e_slice = slice(0, views["W_e"].size)

    history = TrainHistory()
    start = time.perf_counter()
    for epoch in range(1, config.epochs + 1):
        order = shuffle_rng.permutation(N)
        total = 0.0
        for lo in range(0, N, config.batch_size):
            idx = order[lo:lo + config.batch_size]
            loss, grads = batch_loss_and_grad(model, X[idx], y[idx])
            grad = np.concatenate([np.ravel(grads[k]) for k in PARAM_NAMES])
            grad /= len(idx)
            _, pen_grad = penalty_value_and_grad(views["W_e"], config)
            grad[W_e_slice] += pen_grad.ravel()
            total += loss
            if not (math.isfinite(loss) and np.isfinite(grad).all()):
                raise TrainingDivergedError(f"training diverged at epoch {epoch}", epoch)
            optimizer.step(theta, grad)
            history.steps += 1
        if not np.isfinite(theta).all():
            raise TrainingDivergedError(f"training diverged at epoch {epoch}", epoch)
        pen, _ = penalty_value_and_grad(views["W_e"], config)
        history.losses.append(total / N + pen)
        history.epochs = epoch
        if callback is not None:
            callback(epoch, history.losses[-1])
    model = model.with_parameters({k: v.copy() for k, v in views.items()})
    history.wall_time = time.perf_counter() - start
    return model, history


@dataclass(frozen=True)
class GradCheckReport:
    max_rel_error: float
    worst_param: str
    worst_index: tuple
    tolerance: float
    n_checked: int

    @property
    def passed(self):
        return self.max_rel_error < self.tolerance


def relative_error(a, b, floor=1e-3):
    """``|a - b| / max(|a|, |b|, floor)``; the floor keeps near-zero entries
    from amplifying finite-difference round-off."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    return np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)


def numerical_gradient(model, x, y, step=1e-6):
    """Central finite differences of the teacher-forcing loss."""
    params = {k: np.array(v, dtype=np.float64) for k, v in model.parameters().items()}
    X = np.atleast_2d(x)
    y = np.atleast_1d(y)
    out = {}
    for name, value in params.items():
        grad = np.zeros_like(value)
        for idx in np.ndindex(value.shape):
            orig = value[idx]
            value[idx] = orig + step
            up = batch_loss_and_grad(model.with_parameters(params), X, y)[0]
            value[idx] = orig - step
            down = batch_loss_and_grad(model.with_parameters(params), X, y)[0]
            value[idx] = orig
            grad[idx] = (up - down) / (2 * step)
        out[name] = grad
    return out


def gradient_check(model, x, y, tolerance=1e-5, step=1e-6, analytic=None):
    """Compare analytic and finite-difference gradients over every parameter.

    ``analytic`` overrides the gradient under test (used to check that a
    corrupted gradient is caught).
    """
    if analytic is None:
        _, analytic = batch_loss_and_grad(model, np.atleast_2d(x), np.atleast_1d(y))
    numeric = numerical_gradient(model, x, y, step)
    worst = (-1.0, None, None)
    count = 0
    for name in PARAM_NAMES:
        err = relative_error(analytic[name], numeric[name])
        count += err.size
        idx = np.unravel_index(np.argmax(err), err.shape) if err.ndim else ()
        if err[idx] > worst[0]:
            worst = (float(err[idx]), name, tuple(int(i) for i in idx))
    return GradCheckReport(worst[0], worst[1], worst[2], tolerance, count)


def with_seed(config, seed):
    return replace(config, seed=int(seed))
