"""Feed-forward classifier over sentence features, trained from scratch.

A plain multilayer perceptron (ReLU hidden layers, softmax output) fit by
minibatch SGD on cross-entropy. No autograd: the backward pass is written
out, and ``grad_check`` verifies it against central differences.

Evaluation is stratified-free k-fold cross-validation with per-fold
z-scoring computed from the training fold only. Everything is float64 and
deterministic under a seed.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ._accel import thread_cap
from .seeds import derive_seed

# feature layouts understood by build_features / the evaluation CLI
MODES = (
    "style_only",
    "embedding_only",
    "embedding+raw_style",
    "embedding+latent_style",
)


class DivergenceError(ArithmeticError):
    """Training loss became non-finite; lower the learning rate."""


class MissingComponentError(ValueError):
    """A feature mode needs a component (embeddings, SVD, style model) not supplied."""


@dataclass
class MLP:
    """Weights of a ReLU network; ``dims`` includes input and output sizes."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]
    seed: int = 0
    history: list[float] = field(default_factory=list)  # mean loss per epoch

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple([self.weights[0].shape[0]] + [w.shape[1] for w in self.weights])

    def logits(self, X: np.ndarray) -> np.ndarray:
        a = X
        for W, b in zip(self.weights[:-1], self.biases[:-1]):
            a = np.maximum(a @ W + b, 0.0)
        return a @ self.weights[-1] + self.biases[-1]


def _log_softmax(z: np.ndarray) -> np.ndarray:
    zmax = z.max(axis=1, keepdims=True)
    return z - zmax - np.log(np.exp(z - zmax).sum(axis=1, keepdims=True))


def _init(dims: Sequence[int], rng: np.random.Generator) -> MLP:
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        weights.append(rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return MLP(weights=weights, biases=biases)


def _forward(model: MLP, X: np.ndarray):
    """Activations per layer; returns (activations, logits)."""
    acts = [X]
    a = X
    for W, b in zip(model.weights[:-1], model.biases[:-1]):
        a = np.maximum(a @ W + b, 0.0)
        acts.append(a)
    return acts, a @ model.weights[-1] + model.biases[-1]


def loss_and_grads(model: MLP, X: np.ndarray, y: np.ndarray):
    """Mean cross-entropy and its gradients w.r.t. every weight and bias."""
    acts, z = _forward(model, X)
    logp = _log_softmax(z)
    batch = X.shape[0]
    loss = -float(logp[np.arange(batch), y].mean())

    delta = np.exp(logp)
    delta[np.arange(batch), y] -= 1.0
    delta /= batch

    grads_w = [None] * len(model.weights)
    grads_b = [None] * len(model.biases)
    for layer in range(len(model.weights) - 1, -1, -1):
        grads_w[layer] = acts[layer].T @ delta
        grads_b[layer] = delta.sum(axis=0)
        if layer > 0:
            delta = (delta @ model.weights[layer].T) * (acts[layer] > 0)
    return loss, grads_w, grads_b


def train(
    features,
    targets,
    n_classes: int,
    hidden: Sequence[int] = (512,),
    epochs: int = 10,
    batch_size: int = 128,
    lr: float = 0.05,
    seed: int = 0,
) -> MLP:
    """Minibatch SGD on cross-entropy; deterministic for a fixed seed."""
    X = np.asarray(features, dtype=np.float64)
    y = np.asarray(targets, dtype=np.int64)
    if X.ndim != 2:
        raise ValueError(f"features must be 2-D, got shape {X.shape}")
    if y.ndim != 1 or y.shape[0] != X.shape[0]:
        raise ValueError("targets must be 1-D and row-aligned with features")
    if n_classes < 2:
        raise ValueError(f"n_classes must be >= 2, got {n_classes}")
    if y.min() < 0 or y.max() >= n_classes:
        raise ValueError("targets out of range for n_classes")
    if lr <= 0 or epochs < 1 or batch_size < 1:
        raise ValueError("lr must be > 0, epochs and batch_size >= 1")

    dims = [X.shape[1], *[int(h) for h in hidden], n_classes]
    model = _init(dims, np.random.default_rng(derive_seed(seed, "mlp-init")))
    model.seed = seed
    shuffle_rng = np.random.default_rng(derive_seed(seed, "mlp-shuffle"))
    k = X.shape[0]
    for _ in range(epochs):
        order = shuffle_rng.permutation(k)
        epoch_loss = 0.0
        n_batches = 0
        for start in range(0, k, batch_size):
            idx = order[start : start + batch_size]
            with np.errstate(over="ignore", invalid="ignore"):
                loss, gw, gb = loss_and_grads(model, X[idx], y[idx])
            if not np.isfinite(loss):
                raise DivergenceError(
                    f"training loss became non-finite at lr={lr}; reduce the learning rate"
                )
            epoch_loss += loss
            n_batches += 1
            for layer in range(len(model.weights)):
                model.weights[layer] -= lr * gw[layer]
                model.biases[layer] -= lr * gb[layer]
        model.history.append(epoch_loss / n_batches)
    return model


def predict_proba(model: MLP, features) -> np.ndarray:
    """Softmax class probabilities; each row sums to 1."""
    X = np.asarray(features, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.shape[1] != model.dims[0]:
        raise ValueError(f"features have {X.shape[1]} columns, model expects {model.dims[0]}")
    return np.exp(_log_softmax(model.logits(X)))


def predict(model: MLP, features) -> np.ndarray:
    """Class labels; ties resolve to the lowest class index."""
    X = np.asarray(features, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.shape[1] != model.dims[0]:
        raise ValueError(f"features have {X.shape[1]} columns, model expects {model.dims[0]}")
    return np.argmax(model.logits(X), axis=1)


def accuracy(model: MLP, features, targets) -> float:
    y = np.asarray(targets, dtype=np.int64)
    return float(np.mean(predict(model, features) == y))


def grad_check(model: MLP, X, y, step: float = 1e-4) -> float:
    """Max relative error of analytic gradients vs central differences.

    Accepts a single feature row or a batch.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    y = np.atleast_1d(np.asarray(y, dtype=np.int64))
    _, gw, gb = loss_and_grads(model, X, y)

    def loss_only() -> float:
        logp = _log_softmax(model.logits(X))
        return -float(logp[np.arange(X.shape[0]), y].mean())

    worst = 0.0
    for analytic, params in ((gw, model.weights), (gb, model.biases)):
        for g, p in zip(analytic, params):
            flat_p = p.reshape(-1)
            flat_g = g.reshape(-1)
            for i in range(flat_p.size):
                orig = flat_p[i]
                flat_p[i] = orig + step
                hi = loss_only()
                flat_p[i] = orig - step
                lo = loss_only()
                flat_p[i] = orig
                numeric = (hi - lo) / (2.0 * step)
                denom = max(abs(flat_g[i]) + abs(numeric), 1e-8)
                worst = max(worst, abs(flat_g[i] - numeric) / denom)
    return worst


# ---------------------------------------------------------------------------
# cross-validated evaluation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EvalReport:
    """Cross-validation outcome for one feature mode."""

    mode: str
    fold_accuracies: tuple[float, ...]
    folds: int
    seed: int
    n_classes: int
    class_restriction: int | None = None

    @property
    def mean_accuracy(self) -> float:
        return float(np.mean(self.fold_accuracies))

    def to_json(self) -> str:
        body = {
            "mode": self.mode,
            "fold_accuracies": list(self.fold_accuracies),
            "mean_accuracy": self.mean_accuracy,
            "folds": self.folds,
            "seed": self.seed,
            "n_classes": self.n_classes,
            "class_restriction": self.class_restriction,
        }
        return json.dumps(body, sort_keys=True, indent=2) + "\n"

    def csv_row(self) -> str:
        cells = [self.mode, repr(self.mean_accuracy)]
        cells += [repr(a) for a in self.fold_accuracies]
        return ",".join(cells)


def _standardize(train: np.ndarray, test: np.ndarray):
    mu = train.mean(axis=0)
    sd = train.std(axis=0)
    sd = np.where(sd == 0.0, 1.0, sd)
    return (train - mu) / sd, (test - mu) / sd


def evaluate_cv(
    features,
    targets,
    n_classes: int,
    folds: int = 5,
    seed: int = 0,
    standardize: bool = True,
    hidden: Sequence[int] = (512,),
    epochs: int = 10,
    batch_size: int = 128,
    lr: float = 0.05,
    mode: str = "style_only",
    class_restriction: int | None = None,
) -> EvalReport:
    """k-fold CV accuracy; fold split and every fit derive from ``seed``."""
    X = np.asarray(features, dtype=np.float64)
    y = np.asarray(targets, dtype=np.int64)
    if X.shape[0] != y.shape[0]:
        raise ValueError("features and targets disagree on sample count")
    if folds < 2 or folds > X.shape[0]:
        raise ValueError(f"folds must be in [2, {X.shape[0]}], got {folds}")

    perm = np.random.default_rng(derive_seed(seed, "cv-split")).permutation(X.shape[0])
    parts = np.array_split(perm, folds)

    def one(i: int) -> float:
        test_idx = parts[i]
        train_idx = np.concatenate([parts[j] for j in range(folds) if j != i])
        X_tr, X_te = X[train_idx], X[test_idx]
        if standardize:
            X_tr, X_te = _standardize(X_tr, X_te)
        model = train(
            X_tr,
            y[train_idx],
            n_classes,
            hidden=hidden,
            epochs=epochs,
            batch_size=batch_size,
            lr=lr,
            seed=derive_seed(seed, f"cv-fold-{i}"),
        )
        return accuracy(model, X_te, y[test_idx])

    cap = thread_cap()
    if cap > 1 and folds > 1:
        with ThreadPoolExecutor(max_workers=min(cap, folds)) as pool:
            accs = list(pool.map(one, range(folds)))
    else:
        accs = [one(i) for i in range(folds)]
    return EvalReport(
        mode=mode,
        fold_accuracies=tuple(accs),
        folds=folds,
        seed=seed,
        n_classes=n_classes,
        class_restriction=class_restriction,
    )


# ---------------------------------------------------------------------------
# feature assembly for the evaluation modes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FeatureSpec:
    """How to lay out classifier inputs for one evaluation configuration.

    mode             one of MODES (style_only is the lexicon-features baseline)
    embedding_rank   expected embedding width after compression; None = full d
    """

    mode: str
    embedding_rank: int | None = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}; expected one of {MODES}")


def build_features(dataset, svd=None, r4=None, spec: FeatureSpec | None = None) -> np.ndarray:
    """Assemble the feature matrix for one evaluation mode.

    dataset   provides X (style matrix) and optionally E (embeddings)
    svd       TruncatedSVD compressing embeddings before use
    r4        fitted low-rank style model supplying the latent projection X @ U
    spec      the mode and expected embedding width
    """
    if spec is None:
        raise ValueError("spec is required")
    mode = spec.mode

    def need(value, name):
        if value is None:
            raise MissingComponentError(f"mode {mode!r} requires {name}")
        return value

    style = np.asarray(dataset.X, dtype=np.float64)
    if mode == "style_only":
        return style

    E = np.asarray(need(dataset.E, "embeddings"), dtype=np.float64)
    if svd is not None:
        from .slim import transform

        E = transform(svd, E)
    if spec.embedding_rank is not None and E.shape[1] != spec.embedding_rank:
        raise ValueError(
            f"embedding width {E.shape[1]} does not match spec rank {spec.embedding_rank}"
        )
    if mode == "embedding_only":
        return E
    if E.shape[0] != style.shape[0]:
        raise ValueError("embeddings and style features disagree on sample count")
    if mode == "embedding+raw_style":
        return np.hstack([E, style])
    model = need(r4, "a fitted style model")
    from .solver import latent_features

    return np.hstack([E, latent_features(model, style)])


# ---------------------------------------------------------------------------
# persistence: one SLMX matrix per layer plus a JSON sidecar
# ---------------------------------------------------------------------------


def save_mlp(model: MLP, prefix, feature_mode: str | None = None) -> None:
    from pathlib import Path

    from .matrixio import write_matrix

    prefix = str(prefix)
    for i, (W, b) in enumerate(zip(model.weights, model.biases)):
        write_matrix(W.astype(np.float32), f"{prefix}.W{i}.slmx")
        write_matrix(b.astype(np.float32).reshape(1, -1), f"{prefix}.b{i}.slmx")
    meta = {
        "dims": list(model.dims),
        "activation": "relu+softmax",
        "seed": model.seed,
        "history": model.history,
    }
    if feature_mode is not None:
        meta["feature_mode"] = feature_mode
    Path(prefix + ".json").write_text(
        json.dumps(meta, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )


def load_mlp(prefix) -> MLP:
    from pathlib import Path

    from .matrixio import read_matrix

    prefix = str(prefix)
    meta = json.loads(Path(prefix + ".json").read_text(encoding="utf-8"))
    dims = meta["dims"]
    weights, biases = [], []
    for i in range(len(dims) - 1):
        weights.append(read_matrix(f"{prefix}.W{i}.slmx").astype(np.float64))
        biases.append(read_matrix(f"{prefix}.b{i}.slmx").astype(np.float64).ravel())
    return MLP(
        weights=weights,
        biases=biases,
        seed=int(meta.get("seed", 0)),
        history=list(meta.get("history", [])),
    )


def most_frequent_classes(targets, c: int) -> np.ndarray:
    """Indices of the c most frequent classes, most frequent first."""
    y = np.asarray(targets, dtype=np.int64)
    if c < 1:
        raise ValueError(f"c must be >= 1, got {c}")
    classes, counts = np.unique(y, return_counts=True)
    # sort by count descending, class index ascending for ties
    order = np.lexsort((classes, -counts))
    return classes[order[:c]]


def restrict_to_classes(features, targets, classes):
    """Keep samples whose target is listed; relabel to 0..len(classes)-1."""
    X = np.asarray(features, dtype=np.float64)
    y = np.asarray(targets, dtype=np.int64)
    classes = np.asarray(classes, dtype=np.int64)
    if classes.size == 0:
        raise ValueError("classes must be non-empty")
    remap = {int(c): i for i, c in enumerate(classes)}
    keep = np.isin(y, classes)
    if not keep.any():
        raise ValueError("no samples belong to the requested classes")
    y_new = np.array([remap[int(v)] for v in y[keep]], dtype=np.int64)
    return X[keep], y_new
