"""White-box RSS attacks: FGSM, PGD and MIM, restricted to a subset of APs.

All attacks work on normalized fingerprints in ``[0, 1]`` and need a victim
exposing ``input_gradient(x, labels)``, the gradient of the victim's own
training loss with respect to every input row. The perturbation budget
``epsilon`` is an l-infinity bound in normalized units (0.1 is 10 dBm).

Two channel-side adversaries are modelled. *Manipulation* perturbs the
genuine readings of the targeted APs. *Spoofing* first replaces those
readings with a counterfeit baseline (the training mean of each AP) and then
perturbs around that baseline.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Protocol

import numpy as np

from .autodiff import RngStream

KINDS = ("fgsm", "pgd", "mim")
MODES = ("manipulation", "spoofing")
TARGETING = ("random", "strongest")


class Victim(Protocol):
    def input_gradient(self, x: np.ndarray, labels: np.ndarray) -> np.ndarray: ...


@dataclass(frozen=True)
class AttackConfig:
    kind: str = "fgsm"
    epsilon: float = 0.1
    phi_percent: float = 100.0
    alpha: float | None = None  # defaults to epsilon / 4 for iterative kinds
    steps: int = 10
    mu: float = 1.0
    mode: str = "manipulation"
    targeting: str = "random"
    seed: int = 0
    per_sample_mask: bool = False

    def __post_init__(self):
        kind = self.kind.lower()
        mode = {"manip": "manipulation", "spoof": "spoofing"}.get(self.mode, self.mode)
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "mode", mode)
        if kind not in KINDS:
            raise ValueError(f"unknown attack kind {self.kind!r}")
        if mode not in MODES:
            raise ValueError(f"unknown attack mode {self.mode!r}")
        if self.targeting not in TARGETING:
            raise ValueError(f"unknown targeting {self.targeting!r}")
        if self.epsilon < 0:
            raise ValueError("epsilon must be >= 0")
        if not 0 <= self.phi_percent <= 100:
            raise ValueError("phi_percent must lie in [0, 100]")
        if kind == "fgsm":
            object.__setattr__(self, "steps", 1)
        elif self.steps < 1:
            raise ValueError("iterative attacks need steps >= 1")
        if self.alpha is not None and self.alpha <= 0 and kind != "fgsm":
            raise ValueError("alpha must be > 0")
        if self.mu < 0:
            raise ValueError("mu must be >= 0")

    @property
    def step_size(self) -> float:
        if self.alpha is not None:
            return self.alpha
        return self.epsilon / 4.0

    def to_dict(self) -> dict:
        d = asdict(self)
        d["alpha"] = self.step_size
        return d


# -- AP targeting ------------------------------------------------------------------


def target_count(n_aps: int, phi_percent: float) -> int:
    """``floor(phi/100 * n_aps)``, guarded against binary rounding just below an integer."""
    return min(n_aps, int(math.floor(phi_percent * n_aps / 100.0 + 1e-9)))


def _roster_stats(dataset) -> tuple[int, np.ndarray | None]:
    if isinstance(dataset, (int, np.integer)):
        return int(dataset), None
    train = getattr(dataset, "train", None)
    rss = np.asarray(train.rss if train is not None else dataset, dtype=np.float64)
    return rss.shape[1], rss.mean(axis=0)


def select_target_aps(dataset, phi_percent: float, targeting: str = "random", seed: int = 0) -> np.ndarray:
    """Boolean mask over the AP roster with ``floor(phi% * n_aps)`` entries set.

    ``dataset`` may be a :class:`~calloc.data.FloorplanDataset`, a training
    RSS matrix, or (for random targeting) just the AP count. Random masks for
    one seed are nested: raising ``phi_percent`` only adds APs.
    """
    if not 0 <= phi_percent <= 100:
        raise ValueError("phi_percent must lie in [0, 100]")
    n_aps, mean_rss = _roster_stats(dataset)
    k = target_count(n_aps, phi_percent)
    if targeting == "random":
        order = RngStream(seed, (0xA9,)).permutation(n_aps)
    elif targeting == "strongest":
        if mean_rss is None:
            raise ValueError("strongest targeting needs training RSS")
        order = np.argsort(-mean_rss, kind="stable")
    else:
        raise ValueError(f"unknown targeting {targeting!r}")
    mask = np.zeros(n_aps, dtype=bool)
    mask[order[:k]] = True
    return mask


def select_target_aps_per_row(n_rows: int, n_aps: int, phi_percent: float, seed: int = 0) -> np.ndarray:
    """An independent random mask for every row, each with the same AP count."""
    k = target_count(n_aps, phi_percent)
    rng = RngStream(seed, (0xA9, 1))
    mask = np.zeros((n_rows, n_aps), dtype=bool)
    for i in range(n_rows):
        mask[i, rng.permutation(n_aps)[:k]] = True
    return mask


# -- crafting ------------------------------------------------------------------------


def _prepare(x, mask, epsilon):
    if epsilon < 0:
        raise ValueError("epsilon must be >= 0")
    x = np.array(x, dtype=np.float32, copy=True)
    if x.ndim == 1:
        x = x[None, :]
    mask = np.asarray(mask, dtype=bool)
    if mask.shape[-1] != x.shape[1]:
        raise ValueError(f"mask width {mask.shape[-1]} != input width {x.shape[1]}")
    mask = np.broadcast_to(mask, x.shape)
    return x, mask


def _gradient(victim: Victim, x: np.ndarray, y) -> np.ndarray:
    g = np.asarray(victim.input_gradient(x, y))
    if g.shape != x.shape:
        raise ValueError(f"victim returned a gradient of shape {g.shape} for input {x.shape}")
    return g


def craft_fgsm(victim: Victim, x, y, epsilon: float, mask) -> np.ndarray:
    """One signed-gradient step of size ``epsilon`` on the masked APs."""
    x, mask = _prepare(x, mask, epsilon)
    eps = np.float32(epsilon)
    s = np.sign(_gradient(victim, x, y)).astype(np.float32)
    return np.where(mask, np.clip(x + eps * s, 0, 1), x)


def craft_pgd(victim: Victim, x, y, epsilon: float, alpha: float, steps: int, mask) -> np.ndarray:
    """Iterated signed-gradient steps, projected onto the epsilon-box around ``x`` and [0, 1]."""
    if steps < 1:
        raise ValueError("steps must be >= 1")
    x, mask = _prepare(x, mask, epsilon)
    eps, a = np.float32(epsilon), np.float32(alpha)
    lo = np.maximum(x - eps, 0)
    hi = np.minimum(x + eps, 1)
    xt = x.copy()
    for _ in range(steps):
        s = np.sign(_gradient(victim, xt, y)).astype(np.float32)
        xt = np.where(mask, np.clip(xt + a * s, lo, hi), x)
    return xt


def craft_mim(victim: Victim, x, y, epsilon: float, alpha: float, steps: int, mu: float, mask) -> np.ndarray:
    """PGD driven by the sign of an accumulated, l1-normalized gradient."""
    if steps < 1:
        raise ValueError("steps must be >= 1")
    if mu < 0:
        raise ValueError("mu must be >= 0")
    x, mask = _prepare(x, mask, epsilon)
    eps, a = np.float32(epsilon), np.float32(alpha)
    lo = np.maximum(x - eps, 0)
    hi = np.minimum(x + eps, 1)
    xt = x.copy()
    velocity = np.zeros(x.shape, dtype=np.float64)
    for _ in range(steps):
        g = np.where(mask, _gradient(victim, xt, y), 0).astype(np.float64)
        norm = np.abs(g).sum(axis=1, keepdims=True)
        velocity = mu * velocity + g / np.where(norm > 0, norm, 1.0)
        s = np.sign(velocity).astype(np.float32)
        xt = np.where(mask, np.clip(xt + a * s, lo, hi), x)
    return xt


def counterfeit_baseline(x, mask, ap_means) -> np.ndarray:
    """Masked readings replaced by the per-AP training means (normalized)."""
    x, mask = _prepare(x, mask, 0.0)
    means = np.broadcast_to(np.asarray(ap_means, dtype=np.float32), x.shape)
    return np.where(mask, means, x)


def _run_kind(victim, x, y, config: AttackConfig, mask) -> np.ndarray:
    if config.kind == "fgsm":
        return craft_fgsm(victim, x, y, config.epsilon, mask)
    if config.kind == "pgd":
        return craft_pgd(victim, x, y, config.epsilon, config.step_size, config.steps, mask)
    return craft_mim(victim, x, y, config.epsilon, config.step_size, config.steps, config.mu, mask)


def spoof(victim: Victim, x, y, config: AttackConfig, mask, ap_means) -> np.ndarray:
    """Counterfeit the masked APs, then perturb the counterfeit within ``epsilon``."""
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        raise ValueError("spoofing needs at least one targeted AP")
    base = counterfeit_baseline(x, mask, ap_means)
    if config.epsilon == 0:
        return base
    return _run_kind(victim, base, y, config, mask)


def craft(victim: Victim, x, y, config: AttackConfig, mask, ap_means=None) -> np.ndarray:
    """Dispatch on ``config.kind`` and ``config.mode``."""
    mask = np.asarray(mask, dtype=bool)
    if config.mode == "spoofing":
        if not mask.any():
            return _prepare(x, mask, 0.0)[0]
        if ap_means is None:
            raise ValueError("spoofing needs per-AP training means")
        return spoof(victim, x, y, config, mask, ap_means)
    return _run_kind(victim, x, y, config, mask)


def attack_mask(config: AttackConfig, n_rows: int, train_rss: np.ndarray) -> np.ndarray:
    """Mask for one evaluation run: shared across rows unless ``per_sample_mask``."""
    n_aps = train_rss.shape[1]
    if config.per_sample_mask and config.targeting == "random":
        return select_target_aps_per_row(n_rows, n_aps, config.phi_percent, config.seed)
    return select_target_aps(train_rss, config.phi_percent, config.targeting, config.seed)
