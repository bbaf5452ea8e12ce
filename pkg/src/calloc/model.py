"""The attention localizer: two embedding paths, scaled dot-product attention
over a memory of training fingerprints, and a dense classifier over RPs.

Inference wiring: an online fingerprint goes through the curriculum-path
embedding and becomes the query. Keys are the original-path embeddings of
every training fingerprint and values are their one-hot RP labels, both held
in an :class:`AnchorMemory`. The attention output (one weight per RP class)
feeds a ``C -> C`` dense head.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import RngStream, Tensor

EMBED_DIM = 128
KEY_DIM = 64
DROPOUT_RATE = 0.2
NOISE_SIGMA = 0.32
REFERENCE_N_IN = 165
REFERENCE_CLASSES = 61
REFERENCE_TOTAL_PARAMS = 65_239
# large negative score for attention slots that must receive zero weight
_MASKED = -1e9
# initial Q/K projection scale and head diagonal; uniform attention over
# one-hot values otherwise gives the head almost no gradient signal
QK_INIT_GAIN = 1.0
EMBED_INIT_GAIN = 5.0
HEAD_INIT_DIAG = 10.0


class StaleMemoryError(RuntimeError):
    """The anchor memory was built from older parameters than the model now holds."""


@dataclass(frozen=True)
class ModelConfig:
    n_in: int
    n_classes: int
    embed_dim: int = EMBED_DIM
    key_dim: int = KEY_DIM
    dropout: float = DROPOUT_RATE
    noise_sigma: float = NOISE_SIGMA

    def __post_init__(self):
        if self.n_in < 1 or self.n_classes < 1 or self.embed_dim < 1 or self.key_dim < 1:
            raise ValueError("model dimensions must be positive")


def glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    lim = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-lim, lim, (fan_in, fan_out)).astype(np.float32)


class Dense:
    def __init__(self, n_in: int, n_out: int, rng: np.random.Generator, name: str):
        self.W = Tensor(glorot(rng, n_in, n_out), requires_grad=True, name=f"{name}.W")
        self.b = Tensor(np.zeros((1, n_out), np.float32), requires_grad=True, name=f"{name}.b")

    def __call__(self, x) -> Tensor:
        return ad.add_bias(ad.matmul(x, self.W), self.b)

    @property
    def n_params(self) -> int:
        return self.W.value.size + self.b.value.size

    def tensors(self) -> list[Tensor]:
        return [self.W, self.b]


class EmbeddingNetwork:
    """Dense -> relu, optionally followed by dropout and Gaussian noise in training."""

    def __init__(self, n_in: int, width: int, rng, name: str, dropout: float = 0.0, noise_sigma: float = 0.0):
        self.dense = Dense(n_in, width, rng, name)
        self.dropout = dropout
        self.noise_sigma = noise_sigma

    def __call__(self, x, train: bool = False, rng: RngStream | None = None) -> Tensor:
        h = ad.relu(self.dense(x))
        if train and (self.dropout > 0 or self.noise_sigma > 0):
            h = ad.dropout(h, self.dropout, True, rng)
            h = ad.gaussian_noise(h, self.noise_sigma, True, rng)
        return h

    @property
    def n_params(self) -> int:
        return self.dense.n_params


def scaled_dot_product_attention(q, k, v, score_offset=None):
    """``softmax(q k^T / sqrt(d_k)) v``; returns ``(output, weights)``.

    ``score_offset`` is a constant added to the scores before the softmax,
    used to blank out individual query/key pairs.
    """
    q, k = ad._as_tensor(q), ad._as_tensor(k)
    if q.shape[1] != k.shape[1]:
        raise ValueError(f"query width {q.shape[1]} != key width {k.shape[1]}")
    if k.shape[0] == 0:
        raise ValueError("attention over an empty key set")
    scores = ad.scale(ad.matmul(q, ad.transpose(k)), 1.0 / math.sqrt(k.shape[1]))
    if score_offset is not None:
        scores = ad.add_const(scores, score_offset)
    weights = ad.row_softmax(scores)
    return ad.matmul(weights, v), weights


class AttentionBlock:
    """Linear query/key projections to ``key_dim``; values pass through unprojected."""

    def __init__(self, width: int, key_dim: int, rng):
        self.q_proj = Dense(width, key_dim, rng, "attn_q")
        self.k_proj = Dense(width, key_dim, rng, "attn_k")
        self.key_dim = key_dim

    def __call__(self, hq, hk, v, score_offset=None):
        return scaled_dot_product_attention(self.q_proj(hq), self.k_proj(hk), v, score_offset)

    @property
    def n_params(self) -> int:
        return self.q_proj.n_params + self.k_proj.n_params


@dataclass(frozen=True, eq=False)
class AnchorMemory:
    keys: np.ndarray  # (N, embed_dim) eval-mode original-path embeddings
    values: np.ndarray  # (N, C) one-hot RP labels
    labels: np.ndarray  # (N,) class indices
    version: int
    digest: str

    def __len__(self) -> int:
        return self.keys.shape[0]


def anchor_digest(x: np.ndarray, labels: np.ndarray) -> str:
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(x, dtype=np.float32).tobytes())
    h.update(np.ascontiguousarray(labels, dtype=np.int64).tobytes())
    return h.hexdigest()


def one_hot(labels: np.ndarray, n_classes: int, dtype=np.float32) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.intp)
    out = np.zeros((labels.shape[0], n_classes), dtype=dtype)
    out[np.arange(labels.shape[0]), labels] = 1
    return out


class CallocModel:
    arch = "calloc"

    def __init__(self, config: ModelConfig, seed: int = 0):
        self.config = config
        self.seed = int(seed)
        self.lesson = 0
        self.version = 0
        self.memory: AnchorMemory | None = None
        rng = np.random.default_rng(seed)
        c = config
        self.emb_curriculum = EmbeddingNetwork(c.n_in, c.embed_dim, rng, "emb_curriculum")
        self.emb_original = EmbeddingNetwork(c.n_in, c.embed_dim, rng, "emb_original", c.dropout, c.noise_sigma)
        self.attention = AttentionBlock(c.embed_dim, c.key_dim, rng)
        self.head = Dense(c.n_classes, c.n_classes, rng, "head")
        # both paths start from the same weights, so the initial attention
        # scores already compare like with like
        self.emb_curriculum.dense.W.value *= EMBED_INIT_GAIN
        self.emb_original.dense.W.value = self.emb_curriculum.dense.W.value.copy()
        self.attention.q_proj.W.value *= QK_INIT_GAIN
        self.attention.k_proj.W.value = self.attention.q_proj.W.value.copy()
        self.head.W.value += np.float32(HEAD_INIT_DIAG) * np.eye(c.n_classes, dtype=np.float32)

    # -- parameters ------------------------------------------------------------

    def parameters(self) -> dict[str, Tensor]:
        layers = [
            self.emb_curriculum.dense,
            self.emb_original.dense,
            self.attention.q_proj,
            self.attention.k_proj,
            self.head,
        ]
        return {t.name: t for layer in layers for t in layer.tensors()}

    def param_count(self) -> dict[str, int]:
        counts = {
            "emb_curriculum": self.emb_curriculum.n_params,
            "emb_original": self.emb_original.n_params,
            "attention": self.attention.n_params,
            "head": self.head.n_params,
        }
        counts["total"] = sum(counts.values())
        return counts

    def dims(self) -> tuple[int, int, int, int, int]:
        n = len(self.memory) if self.memory is not None else 0
        c = self.config
        return (c.n_in, c.embed_dim, c.key_dim, c.n_classes, n)

    def state(self) -> dict[str, np.ndarray]:
        return {k: t.value.copy() for k, t in self.parameters().items()}

    def load_state(self, state: dict[str, np.ndarray]) -> None:
        params = self.parameters()
        if set(state) != set(params):
            raise ValueError("state does not match the model's parameter names")
        for k, t in params.items():
            if state[k].shape != t.value.shape:
                raise ValueError(f"{k}: shape {state[k].shape} != {t.value.shape}")
            t.value = np.array(state[k], dtype=t.value.dtype, copy=True)
        self.version += 1

    def touch(self) -> None:
        """Mark parameters as changed (invalidates the anchor memory)."""
        self.version += 1

    def astype(self, dtype) -> "CallocModel":
        other = CallocModel(self.config, self.seed)
        other.lesson = self.lesson
        for k, t in other.parameters().items():
            t.value = self.parameters()[k].value.astype(dtype)
        return other

    # -- forward ---------------------------------------------------------------

    def _check_width(self, x) -> None:
        if x.shape[1] != self.config.n_in:
            raise ValueError(f"input width {x.shape[1]} != model n_in {self.config.n_in}")

    def _cast(self, x):
        if isinstance(x, Tensor):
            return x
        return Tensor(np.asarray(x, dtype=self.head.W.dtype))

    def embed_curriculum(self, x, train: bool = False) -> Tensor:
        x = self._cast(x)
        self._check_width(x)
        return self.emb_curriculum(x)

    def embed_original(self, x, train: bool = False, rng: RngStream | None = None) -> Tensor:
        x = self._cast(x)
        self._check_width(x)
        return self.emb_original(x, train, rng)

    def attend(self, hq, hk, values, score_offset=None):
        """Attention + head; returns ``(logits, attention_output, weights)``."""
        out, weights = self.attention(hq, hk, values, score_offset)
        return self.head(out), out, weights

    def forward(self, x, memory: AnchorMemory | None = None) -> Tensor:
        memory = memory if memory is not None else self.memory
        if memory is None or len(memory) == 0:
            raise ValueError("anchor memory is empty; call rebuild_anchor_memory first")
        if memory.version != self.version:
            raise StaleMemoryError("anchor memory is older than the model parameters")
        hq = self.embed_curriculum(x)
        keys = Tensor(memory.keys.astype(hq.dtype, copy=False))
        values = Tensor(memory.values.astype(hq.dtype, copy=False))
        logits, _, _ = self.attend(hq, keys, values)
        return logits

    def attention_weights(self, x, memory: AnchorMemory | None = None) -> np.ndarray:
        memory = memory if memory is not None else self.memory
        if memory is None or len(memory) == 0:
            raise ValueError("anchor memory is empty; call rebuild_anchor_memory first")
        hq = self.embed_curriculum(x)
        _, _, w = self.attend(hq, Tensor(memory.keys), Tensor(memory.values))
        return w.value

    def logits(self, x) -> np.ndarray:
        return self.forward(x).value

    def predict(self, x) -> np.ndarray:
        return np.argmax(self.logits(x), axis=1)

    def input_gradient(self, x, labels) -> np.ndarray:
        """Gradient of the summed cross-entropy w.r.t. each input row."""
        xt = Tensor(np.asarray(x, dtype=self.head.W.dtype), requires_grad=True)
        with ad.Tape() as tape:
            loss = ad.cross_entropy(self.forward(xt), labels, reduction="sum")
        tape.backward(loss)
        return tape.grad(xt)

    def training_loss(
        self,
        x_query,
        query_src: np.ndarray,
        x_anchor,
        anchor_labels: np.ndarray,
        query_labels: np.ndarray,
        rng: RngStream,
        align_weight: float,
        exclude_self: bool = True,
    ):
        """Loss used for training: CE on the head plus a hyperspace-alignment MSE.

        ``x_anchor`` holds the clean training fingerprints (the keys, embedded
        in training mode) and ``query_src[i]`` is the anchor row that query
        ``i`` was derived from. The alignment term pulls the curriculum-path
        embedding of each query towards the original-path embedding of its
        clean source. With ``exclude_self`` a query never attends to its own
        source row. Returns ``(total, ce, mse)`` tensors.
        """
        x_query = self._cast(x_query)
        hq = self.embed_curriculum(x_query, train=True)
        ho = self.embed_original(x_anchor, train=True, rng=rng)
        values = one_hot(anchor_labels, self.config.n_classes, hq.dtype)
        offset = None
        if exclude_self:
            offset = np.zeros((hq.shape[0], ho.shape[0]), dtype=hq.dtype)
            offset[np.arange(hq.shape[0]), query_src] = _MASKED
        logits, _, _ = self.attend(hq, ho, values, offset)
        ce = ad.cross_entropy(logits, query_labels)
        if align_weight:
            align = ad.mse(hq, ad.take_rows(ho, query_src))
            total = ad.add(ce, ad.scale(align, align_weight))
        else:
            align = Tensor(np.zeros((1, 1), hq.dtype))
            total = ce
        return total, ce, align


def rebuild_anchor_memory(model: CallocModel, x_train: np.ndarray, labels: np.ndarray) -> AnchorMemory:
    """Embed every training fingerprint (eval mode) and attach the memory to ``model``."""
    x_train = np.asarray(x_train)
    labels = np.asarray(labels, dtype=np.int64)
    if x_train.shape[0] == 0:
        raise ValueError("cannot build an anchor memory from an empty training set")
    if labels.shape[0] != x_train.shape[0]:
        raise ValueError("one label per training row required")
    keys = model.embed_original(x_train, train=False).value.copy()
    memory = AnchorMemory(
        keys=keys,
        values=one_hot(labels, model.config.n_classes),
        labels=labels.copy(),
        version=model.version,
        digest=anchor_digest(x_train, labels),
    )
    model.memory = memory
    return memory


def reference_model(seed: int = 0) -> CallocModel:
    return CallocModel(ModelConfig(REFERENCE_N_IN, REFERENCE_CLASSES), seed)


def model_grad_check(
    model: CallocModel,
    n_samples: int = 100,
    batch: int = 4,
    n_anchor: int = 12,
    align_weight: float = 0.5,
    seed: int = 0,
    tolerance: float = 1e-3,
):
    """Finite-difference check of the full training loss on a float64 copy.

    Samples coordinates from every parameter tensor and from the query input.
    Dropout and noise are active, with the same seeded draws on every
    evaluation.
    """
    m = model.astype(np.float64)
    rng = np.random.default_rng(seed)
    c = m.config
    x_anchor = rng.uniform(0, 1, (n_anchor, c.n_in))
    anchor_labels = rng.integers(0, c.n_classes, n_anchor)
    src = rng.choice(n_anchor, batch, replace=False)
    x_query = Tensor(np.clip(x_anchor[src] + rng.uniform(-0.1, 0.1, (batch, c.n_in)), 0, 1), requires_grad=True, name="input")

    def loss_fn():
        total, _, _ = m.training_loss(
            x_query, src, x_anchor, anchor_labels, anchor_labels[src], RngStream(seed, (7,)), align_weight
        )
        return total

    tensors = [*m.parameters().values(), x_query]
    return ad.grad_check(loss_fn, tensors, tolerance=tolerance, n_samples=n_samples, seed=seed)

