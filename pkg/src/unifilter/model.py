"""UniFilter classifier: learnable hop weights, a softmax head and Adam.

The representation is ``z = s * sum_k w_k B_k`` where ``B_k`` are the hop
slices of a basis and ``s`` is a fixed input scale chosen at training time.
A linear softmax head (or optionally one ReLU hidden layer) maps ``z`` to
class probabilities. All gradients are derived by hand.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import DimensionError, NumericalError
from .graph import LabeledSplit


@dataclass(frozen=True)
class Hyper:
    lr: float = 0.01
    weight_decay: float = 5e-4
    dropout: float = 0.5
    max_epochs: int = 1000
    patience: int = 200
    hidden: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError(f"dropout must lie in [0, 1), got {self.dropout}")
        if self.lr <= 0 or self.weight_decay < 0:
            raise ValueError("lr must be positive and weight_decay nonnegative")
        if self.max_epochs < 1 or self.patience < 1 or self.hidden < 0:
            raise ValueError("max_epochs and patience must be positive, hidden nonnegative")


@dataclass
class FilterModel:
    """Hop weights ``w`` plus head parameters.

    ``params`` maps names to arrays: always ``w``, ``head_W`` (``C x d`` or
    ``C x hidden``) and ``head_b``; with a hidden layer also ``hid_W`` and
    ``hid_b``.
    """

    params: dict
    hyper: Hyper = field(default_factory=Hyper)
    input_scale: float = 1.0
    seed: int = 0

    @property
    def w(self) -> np.ndarray:
        return self.params["w"]

    @property
    def head_W(self) -> np.ndarray:
        return self.params["head_W"]

    @property
    def head_b(self) -> np.ndarray:
        return self.params["head_b"]

    @property
    def n_classes(self) -> int:
        return self.head_b.size

    @classmethod
    def init(cls, n_hops, d, n_classes, hyper=None, seed=0, input_scale=1.0) -> "FilterModel":
        """Uniform hop weights ``1 / (K + 1)``, Glorot-uniform head, zero biases."""
        hyper = hyper or Hyper()
        rng = np.random.default_rng(seed)

        def glorot(fan_out, fan_in):
            lim = math.sqrt(6.0 / (fan_in + fan_out))
            return rng.uniform(-lim, lim, size=(fan_out, fan_in))

        params = {"w": np.full(n_hops, 1.0 / n_hops)}
        if hyper.hidden:
            params["hid_W"] = glorot(hyper.hidden, d)
            params["hid_b"] = np.zeros(hyper.hidden)
            params["head_W"] = glorot(n_classes, hyper.hidden)
        else:
            params["head_W"] = glorot(n_classes, d)
        params["head_b"] = np.zeros(n_classes)
        return cls(params, hyper, float(input_scale), seed)

    def copy(self) -> "FilterModel":
        return FilterModel({k: v.copy() for k, v in self.params.items()}, self.hyper, self.input_scale, self.seed)

    def to_dict(self) -> dict:
        out = {k: v.tolist() for k, v in self.params.items()}
        out.update(hyper=asdict(self.hyper), input_scale=self.input_scale, seed=self.seed)
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "FilterModel":
        names = ("w", "head_W", "head_b", "hid_W", "hid_b")
        params = {k: np.asarray(data[k], dtype=np.float64) for k in names if k in data}
        return cls(params, Hyper(**data.get("hyper", {})), float(data.get("input_scale", 1.0)), int(data.get("seed", 0)))

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "FilterModel":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def _stack(basis) -> np.ndarray:
    if hasattr(basis, "stacked"):
        return basis.stacked()
    S = np.asarray(basis, dtype=np.float64)
    if S.ndim != 3:
        raise DimensionError(f"expected a (K+1, n, d) stack of hops, got shape {S.shape}")
    return S


def _softmax(logits: np.ndarray) -> np.ndarray:
    e = np.exp(logits - logits.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)


def _check_dims(S, model):
    if S.shape[0] != model.w.size:
        raise DimensionError(f"basis has {S.shape[0]} hops, model has {model.w.size} weights")
    first = model.params.get("hid_W", model.head_W)
    if S.shape[2] != first.shape[1]:
        raise DimensionError(f"basis has {S.shape[2]} columns, model expects {first.shape[1]}")


def _forward(S, model, mask=None):
    """Return logits and the intermediates needed for backprop."""
    p = model.params
    n_hops, N, d = S.shape
    w = p["w"].astype(S.dtype, copy=False)
    z = model.input_scale * (w @ S.reshape(n_hops, N * d)).reshape(N, d)
    zd = z if mask is None else z * mask
    cache = {"zd": zd, "mask": mask}
    if "hid_W" in p:
        pre = zd @ p["hid_W"].T + p["hid_b"]
        hid = np.maximum(pre, 0.0)
        cache["pre"], cache["hid"] = pre, hid
        logits = hid @ p["head_W"].T + p["head_b"]
    else:
        logits = zd @ p["head_W"].T + p["head_b"]
    return logits, cache


def forward(basis, model: FilterModel) -> np.ndarray:
    """Class probabilities ``n x C`` (no dropout)."""
    S = _stack(basis)
    _check_dims(S, model)
    logits, _ = _forward(S, model)
    return _softmax(logits)


def loss_and_grad(S, labels, model: FilterModel, mask=None, weight_decay=None):
    """Mean cross-entropy over the rows of ``S`` plus L2 penalty, and its gradient.

    ``S`` is a ``(K+1) x N x d`` stack restricted to the training rows and
    ``labels`` holds their classes. The penalty ``wd / 2 * ||theta||^2``
    covers every weight matrix and ``w`` but not the biases. ``mask`` is an
    optional ``N x d`` dropout multiplier applied to ``z``.
    """
    p = model.params
    wd = model.hyper.weight_decay if weight_decay is None else weight_decay
    N = labels.size
    logits, cache = _forward(S, model, mask)
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1))
    nll = log_norm - shifted[np.arange(N), labels]
    decayed = [k for k in p if not k.endswith("_b")]
    loss = nll.mean() + 0.5 * wd * sum(float(np.sum(p[k] ** 2)) for k in decayed)

    g_logits = np.exp(shifted - log_norm[:, None])
    g_logits[np.arange(N), labels] -= 1.0
    g_logits /= N
    grads = {"head_b": g_logits.sum(axis=0)}
    if "hid_W" in p:
        grads["head_W"] = g_logits.T @ cache["hid"]
        g_hid = (g_logits @ p["head_W"]) * (cache["pre"] > 0)
        grads["hid_W"] = g_hid.T @ cache["zd"]
        grads["hid_b"] = g_hid.sum(axis=0)
        g_z = g_hid @ p["hid_W"]
    else:
        grads["head_W"] = g_logits.T @ cache["zd"]
        g_z = g_logits @ p["head_W"]
    if mask is not None:
        g_z = g_z * mask
    g_z = g_z.astype(S.dtype, copy=False)
    grads["w"] = model.input_scale * (S.reshape(S.shape[0], -1) @ g_z.ravel()).astype(np.float64)
    for k in decayed:
        grads[k] = grads[k] + wd * p[k]
    return float(loss), grads


def predict(basis, model: FilterModel) -> np.ndarray:
    return forward(basis, model).argmax(axis=1)


def evaluate(model: FilterModel, basis, split: LabeledSplit, subset: str = "test") -> float:
    """Argmax accuracy over one of ``train``, ``val`` or ``test``."""
    idx = split.subset(subset)
    if idx.size == 0:
        raise ValueError(f"{subset} set is empty")
    pred = predict(basis, model)
    return float(np.mean(pred[idx] == split.labels[idx]))


@dataclass
class TrainReport:
    best_val_accuracy: float
    test_accuracy: float
    train_accuracy: float
    epochs_run: int
    best_epoch: int
    loss_curve: list
    seed: int

    def to_dict(self) -> dict:
        return asdict(self)

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def default_input_scale(S: np.ndarray) -> float:
    """Factor giving hop 0 unit root-mean-square entries over its nonzero columns."""
    hop0 = S[0]
    nz = np.any(hop0 != 0, axis=0)
    if not np.any(nz):
        return 1.0
    rms = math.sqrt(float(np.mean(hop0[:, nz] ** 2)))
    return 1.0 / rms if rms > 0 else 1.0


def train(basis, split: LabeledSplit, hyper: Hyper | None = None, seed: int = 0, input_scale=None):
    """Full-batch Adam on training cross-entropy with validation early stopping.

    Training stops once validation accuracy has not improved for
    ``hyper.patience`` epochs; ties in accuracy are broken by lower
    validation loss. Returns the best-validation snapshot and its report.
    The run is fully determined by ``seed``.
    """
    hyper = hyper or Hyper()
    S = _stack(basis)
    if not np.all(np.isfinite(S)):
        raise NumericalError("basis contains NaN or Inf")
    if split.train.size == 0:
        raise ValueError("train set is empty")
    if S.shape[1] != split.labels.size:
        raise DimensionError(f"basis has {S.shape[1]} rows, split has {split.labels.size} labels")
    init_seed, drop_seed = np.random.SeedSequence(seed).spawn(2)
    scale = default_input_scale(S) if input_scale is None else float(input_scale)
    model = FilterModel.init(S.shape[0], S.shape[2], split.n_classes, hyper, init_seed, scale)
    model.seed = seed
    drop_rng = np.random.default_rng(drop_seed)

    # single precision halves the memory traffic of the two hop contractions
    dtype = np.float32 if np.abs(S).max(initial=0.0) * scale < 1e30 else np.float64
    S_train = np.ascontiguousarray(S[:, split.train, :], dtype=dtype)
    y_train = split.labels[split.train]
    val = split.val if split.val.size else split.train
    y_val = split.labels[val]
    S_val = np.ascontiguousarray(S[:, val, :], dtype=dtype)

    m1 = {k: np.zeros_like(v) for k, v in model.params.items()}
    m2 = {k: np.zeros_like(v) for k, v in model.params.items()}
    keep = 1.0 - hyper.dropout
    best = (-1.0, math.inf)
    best_model, best_epoch, stale = model.copy(), 0, 0
    losses = []
    epoch = 0
    for epoch in range(1, hyper.max_epochs + 1):
        mask = None
        if hyper.dropout > 0:
            mask = (drop_rng.random((y_train.size, S.shape[2])) < keep) / keep
        loss, grads = loss_and_grad(S_train, y_train, model, mask)
        if not math.isfinite(loss):
            raise NumericalError(f"training loss became {loss} at epoch {epoch}")
        losses.append(loss)
        for k, g in grads.items():
            m1[k] = hyper.beta1 * m1[k] + (1 - hyper.beta1) * g
            m2[k] = hyper.beta2 * m2[k] + (1 - hyper.beta2) * g * g
            mhat = m1[k] / (1 - hyper.beta1**epoch)
            vhat = m2[k] / (1 - hyper.beta2**epoch)
            model.params[k] = model.params[k] - hyper.lr * mhat / (np.sqrt(vhat) + hyper.eps)
        if not all(np.all(np.isfinite(v)) for v in model.params.values()):
            raise NumericalError(f"parameters became non-finite at epoch {epoch}")

        val_logits, _ = _forward(S_val, model)
        val_acc = float(np.mean(val_logits.argmax(axis=1) == y_val))
        val_loss = float(np.mean(
            np.log(_softmax(val_logits)[np.arange(y_val.size), y_val] + 1e-300) * -1.0
        ))
        if val_acc > best[0] or (val_acc == best[0] and val_loss < best[1]):
            best = (val_acc, val_loss)
            best_model, best_epoch, stale = model.copy(), epoch, 0
        else:
            stale += 1
            if stale >= hyper.patience:
                break

    report = TrainReport(
        best_val_accuracy=best[0],
        test_accuracy=evaluate(best_model, S, split, "test") if split.test.size else float("nan"),
        train_accuracy=evaluate(best_model, S, split, "train"),
        epochs_run=epoch,
        best_epoch=best_epoch,
        loss_curve=losses,
        seed=seed,
    )
    return best_model, report
