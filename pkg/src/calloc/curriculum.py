"""Curriculum adversarial training of :class:`~calloc.model.CallocModel`.

Ten lessons raise the share of attacked APs from 0% to 100% while the share
of untouched rows in each lesson falls from 100% to 20%. Lesson rows are FGSM
copies of the training scans, crafted against the current weights at the
start of the lesson. An adaptive controller watches the classifier's loss:
a sustained rise restores the best weights and halves the lesson epsilon, a
converged loss ends the lesson early.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .attacks import craft_fgsm, select_target_aps_per_row
from .autodiff import RngStream
from .data import FloorplanDataset
from .model import CallocModel, ModelConfig, rebuild_anchor_memory
from .optim import Adam

CONTINUE = "continue"
REVERT = "revert_and_decay"
ADVANCE = "advance"

PHI_SCHEDULES = {
    "default": (0, 10, 20, 30, 40, 50, 60, 70, 80, 100),
    "decile": (0, 10, 20, 30, 40, 50, 60, 70, 80, 90, 100),
}


@dataclass(frozen=True)
class Lesson:
    index: int
    phi_percent: float
    epsilon: float
    original_fraction: float


@dataclass
class Curriculum:
    lessons: list[Lesson]
    current: int = 0

    def __len__(self) -> int:
        return len(self.lessons)

    def __iter__(self):
        return iter(self.lessons)

    def __getitem__(self, i: int) -> Lesson:
        return self.lessons[i]


def build_default_curriculum(epsilon: float = 0.1, schedule: str = "default", final_original_fraction: float = 0.2) -> Curriculum:
    phis = PHI_SCHEDULES[schedule]
    n = len(phis)
    lessons = [
        Lesson(i + 1, float(phi), epsilon, 1.0 - (1.0 - final_original_fraction) * i / (n - 1))
        for i, phi in enumerate(phis)
    ]
    return Curriculum(lessons)


@dataclass(frozen=True)
class TrainerConfig:
    learning_rate: float = 1e-3
    epochs_per_lesson: int = 50
    batch_size: int = 32
    patience: int = 5
    align_weight: float = 0.5
    epsilon: float = 0.1
    seed: int = 0
    curriculum: bool = True
    schedule: str = "default"
    convergence_tol: float = 1e-4
    # a sustained rise means every epoch in the patience window exceeds the best loss by this much
    rise_tol: float = 0.05
    exclude_self: bool = True

    def __post_init__(self):
        for name in ("learning_rate", "epsilon", "convergence_tol", "rise_tol", "align_weight"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.epochs_per_lesson < 1 or self.batch_size < 1:
            raise ValueError("epochs_per_lesson and batch_size must be positive")
        if self.patience < 1:
            raise ValueError("patience must be >= 1")
        if self.schedule not in PHI_SCHEDULES:
            raise ValueError(f"unknown schedule {self.schedule!r}")

    @classmethod
    def from_mapping(cls, values: dict) -> "TrainerConfig":
        known = {f.name: f for f in fields(cls)}
        kwargs = {}
        for k, v in values.items():
            if k in known:
                kwargs[k] = type(getattr(cls, k))(v) if not isinstance(getattr(cls, k), bool) else _as_bool(v)
        return cls(**kwargs)


def _as_bool(v) -> bool:
    if isinstance(v, str):
        return v.strip().lower() in ("1", "true", "yes", "on")
    return bool(v)


@dataclass
class TrainingLog:
    records: list[dict] = field(default_factory=list)

    def append(self, **record) -> None:
        for k in ("loss", "ce", "mse"):
            if k in record and not math.isfinite(record[k]):
                raise FloatingPointError(f"non-finite {k} in lesson {record.get('lesson')} epoch {record.get('epoch')}")
        self.records.append(record)

    def lessons(self) -> list[int]:
        seen = []
        for r in self.records:
            if r["lesson"] not in seen:
                seen.append(r["lesson"])
        return seen

    def to_jsonl(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for r in self.records:
                fh.write(json.dumps(r, sort_keys=True) + "\n")


class AdaptiveController:
    """Loss monitor with best-weight snapshots and epsilon halving.

    The best loss and its snapshot span the whole run. A lesson whose loss
    stays above the best of an earlier lesson therefore triggers reverts,
    and each revert makes the lesson easier by halving epsilon.
    """

    def __init__(self, epsilon: float, patience: int, convergence_tol: float = 1e-4, rise_tol: float = 0.05):
        self.epsilon = float(epsilon)
        self.patience = patience
        self.convergence_tol = convergence_tol
        self.rise_tol = rise_tol
        self.revert_count = 0
        self.best_loss = math.inf
        self.best_state: dict | None = None
        self.history: list[float] = []
        self.stale = 0

    def start_lesson(self, model) -> None:
        if self.best_state is None:
            self.best_state = model.state()
        self.history = []
        self.stale = 0

    def restore_best(self, model) -> None:
        if self.best_state is not None:
            model.load_state(self.best_state)


def adaptive_step(controller: AdaptiveController, epoch_loss: float, model) -> str:
    """Record one epoch's loss and decide what the trainer does next."""
    c = controller
    c.history.append(float(epoch_loss))
    if epoch_loss < c.best_loss:
        c.best_loss = float(epoch_loss)
        c.best_state = model.state()
        c.stale = 0
    else:
        c.stale += 1
    if c.stale >= c.patience:
        window = c.history[-c.patience :]
        c.stale = 0
        if min(window) > c.best_loss * (1 + c.rise_tol):
            c.restore_best(model)
            c.epsilon /= 2.0
            c.revert_count += 1
            return REVERT
    if len(c.history) > c.patience:
        # the whole window must be flat; comparing two endpoints fires on noise
        window = c.history[-1 - c.patience :]
        scale = abs(window[0])
        if scale and (max(window) - min(window)) / scale < c.convergence_tol:
            return ADVANCE
    return CONTINUE


def make_lesson_data(lesson: Lesson, x: np.ndarray, y: np.ndarray, model: CallocModel, epsilon: float, rng: RngStream) -> np.ndarray:
    """Query-path inputs for one lesson, row-aligned with the clean training rows.

    A ``1 - original_fraction`` share of rows is replaced by FGSM copies
    crafted against ``model`` (whose anchor memory must be current), each row
    attacking its own random ``phi_percent`` subset of APs.
    """
    x = np.asarray(x, dtype=np.float32)
    if lesson.phi_percent == 0 or epsilon == 0 or lesson.original_fraction >= 1.0:
        return x.copy()
    n = len(x)
    n_adv = int(round((1.0 - lesson.original_fraction) * n))
    rows = np.sort(rng.permutation(n)[:n_adv])
    masks = select_target_aps_per_row(n_adv, x.shape[1], lesson.phi_percent, seed=int(rng.integers(0, 2**31)))
    out = x.copy()
    out[rows] = craft_fgsm(model, x[rows], y[rows], epsilon, masks)
    return out


def train_lesson_epoch(model: CallocModel, opt: Adam, xq: np.ndarray, x: np.ndarray, y: np.ndarray, config: TrainerConfig, rng: RngStream) -> dict:
    """One pass over the lesson in shuffled mini-batches; returns mean loss terms."""
    params = model.parameters()
    order = rng.permutation(len(x))
    totals = np.zeros(3)
    for start in range(0, len(x), config.batch_size):
        idx = order[start : start + config.batch_size]
        with ad.Tape() as tape:
            total, ce, align = model.training_loss(
                xq[idx], idx, x, y, y[idx], rng, config.align_weight, config.exclude_self
            )
        tape.backward(total)
        if not np.isfinite(total.item()):
            raise FloatingPointError("training diverged: non-finite loss")
        opt.step({k: tape.grad(p) for k, p in params.items()})
        model.touch()
        totals += np.array([total.item(), ce.item(), align.item()]) * len(idx)
    return dict(zip(("loss", "ce", "mse"), (totals / len(x)).tolist()))


def train_full(dataset: FloorplanDataset, config: TrainerConfig = TrainerConfig()) -> tuple[CallocModel, TrainingLog]:
    """Train on the designated device's scans through every lesson.

    With ``config.curriculum`` off, the model sees only the clean first
    lesson, for the same total epoch budget.
    """
    x = dataset.train.normalized().astype(np.float32)
    y = dataset.labels(dataset.train.rp_ids)
    model = CallocModel(ModelConfig(dataset.n_aps, dataset.n_rps), seed=config.seed)
    curriculum = build_default_curriculum(config.epsilon, config.schedule)
    lessons = list(curriculum) if config.curriculum else [curriculum[0]]
    budget = config.epochs_per_lesson if config.curriculum else config.epochs_per_lesson * len(curriculum)

    opt = Adam(model.parameters(), lr=config.learning_rate)
    ctrl = AdaptiveController(config.epsilon, config.patience, config.convergence_tol, config.rise_tol)
    log = TrainingLog()
    root = RngStream(config.seed, (0xC0,))
    for lesson in lessons:
        curriculum.current = lesson.index - 1
        crafts = 0
        rebuild_anchor_memory(model, x, y)
        xq = make_lesson_data(lesson, x, y, model, ctrl.epsilon, root.spawn(lesson.index, crafts))
        ctrl.start_lesson(model)
        for epoch in range(budget):
            stats = train_lesson_epoch(model, opt, xq, x, y, config, root.spawn(lesson.index, 1000 + epoch))
            action = adaptive_step(ctrl, stats["ce"], model)
            log.append(
                lesson=lesson.index,
                phi=lesson.phi_percent,
                epoch=epoch,
                epsilon=ctrl.epsilon,
                reverts=ctrl.revert_count,
                action=action,
                **stats,
            )
            if action == REVERT:
                opt.reset()
                crafts += 1
                rebuild_anchor_memory(model, x, y)
                xq = make_lesson_data(lesson, x, y, model, ctrl.epsilon, root.spawn(lesson.index, crafts))
            elif action == ADVANCE:
                break
        ctrl.restore_best(model)
        model.lesson = lesson.index
        rebuild_anchor_memory(model, x, y)
    return model, log


def config_to_dict(config: TrainerConfig) -> dict:
    return asdict(config)


def load_config_file(path) -> dict:
    """Flat key-value JSON document; unknown keys are ignored by each consumer.

    Values are scalars or lists of scalars (grid axes). Keys may carry a
    ``train.``, ``dnn.``, ``attack.`` or ``grid.`` prefix where a bare name
    would be ambiguous, e.g. ``train.epsilon`` vs ``attack.epsilon``.
    """
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}: not valid JSON ({exc})") from None
    if not isinstance(data, dict):
        raise ValueError(f"{path}: config must be a flat JSON object")
    for k, v in data.items():
        items = v if isinstance(v, list) else [v]
        if any(isinstance(i, (dict, list)) for i in items):
            raise ValueError(f"{path}: config must be flat, {k!r} is nested")
    return data
