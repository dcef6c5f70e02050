"""Binary-search ordinal regressor built around a GRU.

The explanatory variables are mapped affinely to the GRU's initial state.
The GRU then walks the decision path of the binary search tree, one bit per
step, fed with a START token followed by the previously taken bits. A single
logistic head, shared across steps, turns each output into ``P(bit = 1)``.
The probability of a leaf is the product of the bit probabilities along its
path.
"""

import json
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .encoding import encode_state, encode_states, tree_depth, truncate_renormalize
from .errors import (
    InvalidStateError,
    NonCompressiveProjectionWarning,
    SchemaError,
    ShapeError,
)
from .neuralnet import (
    GRU_PARAM_NAMES,
    GruParams,
    gru_backward,
    gru_forward,
    gru_step,
    log_sigmoid,
    sigmoid,
)

FORMAT_VERSION = 1
PARAM_NAMES = ("W_e", "b_e") + GRU_PARAM_NAMES + ("w_o", "b_o")

START = "START"
TOKEN_DIM = 2


def embed_token(b):
    """One-hot token for a bit: 0 -> (0, 1), 1 -> (1, 0), START -> (0, 0)."""
    if b is START or b == START:
        return np.zeros(TOKEN_DIM)
    if b == 1:
        return np.array([1.0, 0.0])
    if b == 0:
        return np.array([0.0, 1.0])
    raise ValueError(f"token must be 0, 1 or START, got {b!r}")


def _embed_bits(bits):
    bits = np.asarray(bits, dtype=np.float64)
    return np.stack([bits, 1.0 - bits], axis=-1)


@dataclass(frozen=True, eq=False)
class Standardizer:
    """Per-feature location and scale; near-constant columns map to 0."""
    mean: np.ndarray
    std: np.ndarray

    MIN_STD = 1e-12

    def __post_init__(self):
        object.__setattr__(self, "mean", np.asarray(self.mean, dtype=np.float64))
        object.__setattr__(self, "std", np.asarray(self.std, dtype=np.float64))
        if self.mean.shape != self.std.shape or self.mean.ndim != 1:
            raise ShapeError("standardizer mean and std must be vectors of equal length")

    @property
    def constant(self):
        return self.std < self.MIN_STD

    def transform(self, X):
        X = np.asarray(X, dtype=np.float64)
        if X.shape[-1] != self.mean.shape[0]:
            raise ShapeError(f"expected {self.mean.shape[0]} features, found {X.shape[-1]}")
        scale = np.where(self.constant, 1.0, self.std)
        return np.where(self.constant, 0.0, (X - self.mean) / scale)

    @classmethod
    def identity(cls, d):
        return cls(np.zeros(d), np.ones(d))


@dataclass(frozen=True, eq=False)
class OrdinalModel:
    k_states: int
    W_e: np.ndarray
    b_e: np.ndarray
    gru: GruParams
    w_o: np.ndarray
    b_o: np.ndarray
    standardizer: Standardizer
    feature_names: tuple = None
    label_dictionary: tuple = None
    _n_bits: int = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_n_bits", tree_depth(self.k_states))
        object.__setattr__(self, "W_e", np.asarray(self.W_e, dtype=np.float64))
        object.__setattr__(self, "b_e", np.asarray(self.b_e, dtype=np.float64))
        object.__setattr__(self, "w_o", np.asarray(self.w_o, dtype=np.float64))
        object.__setattr__(self, "b_o", np.asarray(self.b_o, dtype=np.float64))
        if self.b_o.shape != ():
            raise ShapeError(f"b_o must be a scalar, got shape {self.b_o.shape}")
        h, d = self.W_e.shape
        if self.b_e.shape != (h,) or self.w_o.shape != (h,):
            raise ShapeError(f"b_e {self.b_e.shape} and w_o {self.w_o.shape} must be ({h},)")
        if self.gru.hidden_size != h or self.gru.input_size != TOKEN_DIM:
            raise ShapeError(
                f"GRU must map {TOKEN_DIM}-d tokens to {h} hidden units, got "
                f"{self.gru.input_size} -> {self.gru.hidden_size}")
        if self.standardizer.mean.shape != (d,):
            raise ShapeError(f"standardizer covers {self.standardizer.mean.shape[0]} features, model {d}")
        for name, value in self.parameters().items():
            if not np.all(np.isfinite(value)):
                raise ValueError(f"non-finite entries in {name}")
        if self.label_dictionary is not None and len(self.label_dictionary) != self.k_states:
            raise SchemaError("label dictionary length differs from k_states")

    @property
    def n_bits(self):
        return self._n_bits

    @property
    def d_features(self):
        return self.W_e.shape[1]

    @property
    def h_hidden(self):
        return self.W_e.shape[0]

    def parameters(self):
        """All trainable arrays keyed by :data:`PARAM_NAMES` (``b_o`` is 0-d).

        The arrays are the model's own; callers must not mutate them.
        """
        out = {"W_e": self.W_e, "b_e": self.b_e}
        out.update(self.gru.as_dict())
        out["w_o"] = self.w_o
        out["b_o"] = self.b_o
        return out

    def with_parameters(self, params):
        gru = GruParams(**{name: params[name] for name in GRU_PARAM_NAMES})
        return replace(self, W_e=params["W_e"], b_e=params["b_e"], gru=gru,
                       w_o=params["w_o"], b_o=params["b_o"])

    def standardize(self, X):
        return self.standardizer.transform(X)

    def label_of(self, rank):
        if self.label_dictionary is None:
            return int(rank)
        return self.label_dictionary[int(rank)]

    # serialization

    def to_dict(self):
        def rows(a):
            return np.asarray(a, dtype=np.float64).tolist()
        doc = {
            "format_version": FORMAT_VERSION,
            "k_states": int(self.k_states),
            "n_bits": int(self.n_bits),
            "d_features": int(self.d_features),
            "h_hidden": int(self.h_hidden),
            "standardization": [{"mean": float(m), "std": float(s)}
                                for m, s in zip(self.standardizer.mean, self.standardizer.std)],
            "W_e": rows(self.W_e),
            "b_e": rows(self.b_e),
            "gru": {name: rows(getattr(self.gru, name)) for name in GRU_PARAM_NAMES},
            "w_o": rows(self.w_o),
            "b_o": float(self.b_o),
        }
        if self.feature_names is not None:
            doc["feature_names"] = list(self.feature_names)
        if self.label_dictionary is not None:
            doc["label_dictionary"] = list(self.label_dictionary)
        return doc

    def to_json(self):
        return json.dumps(self.to_dict(), indent=1)

    @classmethod
    def from_dict(cls, doc):
        if doc.get("format_version") != FORMAT_VERSION:
            raise SchemaError(f"unsupported model format_version {doc.get('format_version')!r}")
        try:
            std = doc["standardization"]
            model = cls(
                k_states=int(doc["k_states"]),
                W_e=np.array(doc["W_e"], dtype=np.float64).reshape(doc["h_hidden"], doc["d_features"]),
                b_e=doc["b_e"],
                gru=GruParams(**{name: doc["gru"][name] for name in GRU_PARAM_NAMES}),
                w_o=doc["w_o"],
                b_o=doc["b_o"],
                standardizer=Standardizer([s["mean"] for s in std], [s["std"] for s in std]),
                feature_names=tuple(doc["feature_names"]) if "feature_names" in doc else None,
                label_dictionary=tuple(doc["label_dictionary"]) if "label_dictionary" in doc else None,
            )
        except KeyError as exc:
            raise SchemaError(f"model document lacks field {exc.args[0]!r}") from None
        if model.n_bits != doc["n_bits"]:
            raise SchemaError(f"n_bits={doc['n_bits']} inconsistent with k_states={model.k_states}")
        return model

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_json())
            fh.write("\n")

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(fh.read())


def _check_features(model, x):
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != model.d_features or x.ndim not in (1, 2):
        raise ShapeError(f"expected {model.d_features} features, found shape {x.shape}")
    return x


def initial_state(model, x):
    """Affine projection ``W_e x + b_e`` of standardized features."""
    x = _check_features(model, x)
    return x @ model.W_e.T + model.b_e


def bit_probability(model, h_t):
    """``P(bit = 1)`` from the shared logistic head."""
    return sigmoid(np.asarray(h_t) @ model.w_o + model.b_o)


def teacher_forcing_inputs(codes):
    """GRU inputs for bit paths ``codes`` of shape ``(B, n)``: ``(n, B, 2)``.

    Step 0 is START; step t feeds the true bit t-1. The last bit is never
    fed since nothing is predicted after it.
    """
    codes = np.asarray(codes)
    B, n = codes.shape
    inputs = np.zeros((n, B, TOKEN_DIM))
    if n > 1:
        inputs[1:] = _embed_bits(codes[:, :-1].T)
    return inputs


def batch_loss_and_grad(model, X, y):
    """Summed teacher-forcing NLL over a batch and its summed gradients.

    ``X`` is ``(B, d)`` standardized, ``y`` holds ``B`` state indices.
    """
    X = _check_features(model, np.atleast_2d(X))
    y = np.asarray(y, dtype=np.int64).reshape(-1)
    if y.shape[0] != X.shape[0]:
        raise ShapeError(f"{X.shape[0]} feature rows but {y.shape[0]} labels")
    if y.size and (y.min() < 0 or y.max() >= model.k_states):
        raise InvalidStateError(f"labels must lie in [0, {model.k_states - 1}]")
    codes = encode_states(y, model.n_bits)

    h0 = X @ model.W_e.T + model.b_e
    outputs, trace = gru_forward(model.gru, teacher_forcing_inputs(codes), h0)
    logits = outputs @ model.w_o + model.b_o
    bits = codes.T.astype(np.float64)
    loss = -np.sum(bits * log_sigmoid(logits) + (1.0 - bits) * log_sigmoid(-logits))

    d_logits = sigmoid(logits) - bits
    grads = {
        "w_o": np.einsum("tb,tbh->h", d_logits, outputs),
        "b_o": np.asarray(d_logits.sum()),
    }
    gru_grads, _, d_h0 = gru_backward(model.gru, trace, d_logits[..., None] * model.w_o)
    grads.update(gru_grads)
    grads["W_e"] = d_h0.T @ X
    grads["b_e"] = d_h0.sum(axis=0)
    return float(loss), {name: grads[name] for name in PARAM_NAMES}


def teacher_forcing_loss(model, x, y):
    """Negative log-likelihood of state ``y`` for one sample, with gradients."""
    x = _check_features(model, x)
    if x.ndim != 1:
        raise ShapeError("teacher_forcing_loss takes a single feature vector")
    if not 0 <= int(y) < model.k_states:
        raise InvalidStateError(f"state {y} outside [0, {model.k_states - 1}]")
    return batch_loss_and_grad(model, x[None, :], [y])


def leaf_log_probabilities(model, x, method="tree"):
    """Log-probabilities of all ``2**n`` leaves before truncation.

    ``method="tree"`` walks the tree depth-first and shares GRU states across
    common prefixes (``2**n - 1`` steps); ``method="enumerate"`` unrolls every
    full path independently and is kept as a reference.
    """
    x = _check_features(model, x)
    single = x.ndim == 1
    X = np.atleast_2d(x)
    n = model.n_bits
    h0 = X @ model.W_e.T + model.b_e
    out = np.empty((X.shape[0], 2 ** n))

    if method == "tree":
        def visit(h_prev, token, depth, prefix, logp):
            h, _ = gru_step(model.gru, np.broadcast_to(token, (X.shape[0], TOKEN_DIM)), h_prev)
            a = h @ model.w_o + model.b_o
            for b, lp_bit in ((0, log_sigmoid(-a)), (1, log_sigmoid(a))):
                lp = logp + lp_bit
                value = 2 * prefix + b
                if depth + 1 == n:
                    out[:, value] = lp
                else:
                    visit(h, embed_token(b), depth + 1, value, lp)

        visit(h0, embed_token(START), 0, 0, np.zeros(X.shape[0]))
    elif method == "enumerate":
        for leaf in range(2 ** n):
            code = np.array(encode_state(leaf, n))
            inputs = np.broadcast_to(teacher_forcing_inputs(code[None, :]),
                                     (n, X.shape[0], TOKEN_DIM))
            outputs, _ = gru_forward(model.gru, inputs, h0)
            a = outputs @ model.w_o + model.b_o
            signs = np.where(code == 1, 1.0, -1.0)[:, None]
            out[:, leaf] = log_sigmoid(signs * a).sum(axis=0)
    else:
        raise ValueError(f"unknown inference method {method!r}")
    return out[0] if single else out


def leaf_distribution(model, x, method="tree"):
    return np.exp(leaf_log_probabilities(model, x, method))


def predict_distribution(model, x, method="tree"):
    """Probability of each of the ``k_states`` states for standardized ``x``."""
    return truncate_renormalize(leaf_distribution(model, x, method), model.k_states)


def predict_class(model, x):
    """Most probable state; ties go to the lowest index."""
    return np.argmax(predict_distribution(model, x), axis=-1)


def project(model, X):
    """Initial-state embedding of each row of standardized ``X``.

    With a hidden size of 2 or 3 this is a plottable linear view of the data
    organized by the ordinal target.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ShapeError(f"project expects a feature matrix, got shape {X.shape}")
    if model.h_hidden >= model.d_features:
        warnings.warn(
            f"hidden size {model.h_hidden} is not below the feature count "
            f"{model.d_features}; the projection does not compress",
            NonCompressiveProjectionWarning, stacklevel=2)
    return initial_state(model, X)
