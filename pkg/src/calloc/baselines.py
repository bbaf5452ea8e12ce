"""Reference localizers the attention model is compared against.

* :class:`KNNLocalizer` - majority vote over the k nearest training scans.
* :class:`DenseClassifier` - a plain ``n_in -> 128 -> 128 -> C`` relu network,
  trained either on clean data (:func:`train_dnn`) or on a fixed half-clean,
  half-FGSM mix at epsilon 0.1 (:func:`train_fgsm_dnn`).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .attacks import craft_fgsm
from .autodiff import RngStream, Tensor
from .model import Dense
from .optim import Adam


def knn_predict(train_x: np.ndarray, train_y: np.ndarray, x: np.ndarray, k: int) -> np.ndarray:
    """Majority label among the ``k`` nearest rows (Euclidean).

    Ties between labels go to whichever tied label has the closest member.
    """
    train_x = np.asarray(train_x, dtype=np.float64)
    train_y = np.asarray(train_y)
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    n = train_x.shape[0]
    if n == 0:
        raise ValueError("KNN needs a non-empty training set")
    if not 1 <= k <= n:
        raise ValueError(f"k must lie in [1, {n}], got {k}")
    d2 = (x * x).sum(1)[:, None] - 2 * x @ train_x.T + (train_x * train_x).sum(1)[None, :]
    order = np.argsort(d2, axis=1, kind="stable")[:, :k]
    out = np.empty(x.shape[0], dtype=train_y.dtype)
    for i, nbrs in enumerate(order):
        labels = train_y[nbrs]
        values, counts = np.unique(labels, return_counts=True)
        tied = set(values[counts == counts.max()].tolist())
        out[i] = next(lab for lab in labels if lab in tied)
    return out


class KNNLocalizer:
    arch = "knn"

    def __init__(self, train_x: np.ndarray, train_y: np.ndarray, k: int = 3):
        self.train_x = np.asarray(train_x, dtype=np.float64)
        self.train_y = np.asarray(train_y)
        self.k = k

    def predict(self, x) -> np.ndarray:
        return knn_predict(self.train_x, self.train_y, x, self.k)


class DenseClassifier:
    """Relu MLP over normalized fingerprints with a softmax cross-entropy head."""

    def __init__(self, n_in: int, n_classes: int, hidden: tuple[int, int] = (128, 128), seed: int = 0, arch: str = "dnn"):
        self.arch = arch
        self.n_in, self.n_classes, self.hidden = n_in, n_classes, tuple(hidden)
        self.seed = int(seed)
        self.lesson = 0
        self.version = 0
        rng = np.random.default_rng(seed)
        self.l1 = Dense(n_in, hidden[0], rng, "fc1")
        self.l2 = Dense(hidden[0], hidden[1], rng, "fc2")
        self.out = Dense(hidden[1], n_classes, rng, "fc3")

    def parameters(self) -> dict[str, Tensor]:
        return {t.name: t for layer in (self.l1, self.l2, self.out) for t in layer.tensors()}

    def param_count(self) -> dict[str, int]:
        counts = {"fc1": self.l1.n_params, "fc2": self.l2.n_params, "fc3": self.out.n_params}
        counts["total"] = sum(counts.values())
        return counts

    def dims(self) -> tuple[int, int, int, int, int]:
        return (self.n_in, self.hidden[0], self.hidden[1], self.n_classes, 0)

    def state(self) -> dict[str, np.ndarray]:
        return {k: t.value.copy() for k, t in self.parameters().items()}

    def load_state(self, state) -> None:
        for k, t in self.parameters().items():
            t.value = np.array(state[k], dtype=t.value.dtype, copy=True)
        self.version += 1

    def forward(self, x) -> Tensor:
        if not isinstance(x, Tensor):
            x = Tensor(np.asarray(x, dtype=np.float32))
        if x.shape[1] != self.n_in:
            raise ValueError(f"input width {x.shape[1]} != n_in {self.n_in}")
        h = ad.relu(self.l1(x))
        h = ad.relu(self.l2(h))
        return self.out(h)

    def logits(self, x) -> np.ndarray:
        return self.forward(x).value

    def predict(self, x) -> np.ndarray:
        return np.argmax(self.logits(x), axis=1)

    def input_gradient(self, x, labels) -> np.ndarray:
        xt = Tensor(np.asarray(x, dtype=np.float32), requires_grad=True)
        with ad.Tape() as tape:
            loss = ad.cross_entropy(self.forward(xt), labels, reduction="sum")
        tape.backward(loss)
        return tape.grad(xt)


@dataclass(frozen=True)
class DNNTrainConfig:
    learning_rate: float = 1e-3
    epochs: int = 100
    batch_size: int = 32
    seed: int = 0
    adv_epsilon: float = 0.1
    adv_fraction: float = 0.5


def _fit(model: DenseClassifier, x: np.ndarray, y: np.ndarray, config: DNNTrainConfig, adversarial: bool, log: list | None) -> DenseClassifier:
    x = np.asarray(x, dtype=np.float32)
    y = np.asarray(y, dtype=np.int64)
    params = model.parameters()
    opt = Adam(params, lr=config.learning_rate)
    rng = RngStream(config.seed, (0xD1,))
    full_mask = np.ones(x.shape[1], dtype=bool)
    for epoch in range(config.epochs):
        order = rng.permutation(len(x))
        total = 0.0
        for start in range(0, len(x), config.batch_size):
            idx = order[start : start + config.batch_size]
            xb, yb = x[idx], y[idx]
            if adversarial:
                n_adv = int(round(config.adv_fraction * len(idx)))
                if n_adv:
                    xb = xb.copy()
                    xb[:n_adv] = craft_fgsm(model, xb[:n_adv], yb[:n_adv], config.adv_epsilon, full_mask)
            with ad.Tape() as tape:
                loss = ad.cross_entropy(model.forward(xb), yb)
            tape.backward(loss)
            if not np.isfinite(loss.item()):
                raise FloatingPointError("DNN training diverged (non-finite loss)")
            opt.step({k: tape.grad(p) for k, p in params.items()})
            model.version += 1
            total += loss.item() * len(idx)
        if log is not None:
            log.append({"epoch": epoch, "loss": total / len(x), "ce": total / len(x)})
    return model


def train_dnn(x, y, n_classes: int, config: DNNTrainConfig = DNNTrainConfig(), log: list | None = None) -> DenseClassifier:
    model = DenseClassifier(np.asarray(x).shape[1], n_classes, seed=config.seed, arch="dnn")
    return _fit(model, x, y, config, adversarial=False, log=log)


def train_fgsm_dnn(x, y, n_classes: int, config: DNNTrainConfig = DNNTrainConfig(), log: list | None = None) -> DenseClassifier:
    """Adversarially augmented DNN: each batch is half clean, half FGSM against the current weights."""
    model = DenseClassifier(np.asarray(x).shape[1], n_classes, seed=config.seed, arch="advdnn")
    return _fit(model, x, y, config, adversarial=True, log=log)
