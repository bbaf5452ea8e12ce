"""Evaluation grid over attack strength, targeted-AP share, device and building.

Every cell crafts a white-box attack on the test split against the localizer
being evaluated (or against a surrogate when the localizer has no gradient,
as for KNN) and summarizes the resulting localization errors in meters.
"""

from __future__ import annotations

import csv
import itertools
import json
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .attacks import MODES, AttackConfig, attack_mask, craft
from .data import FloorplanDataset

ALL_DEVICES = "all"
CSV_COLUMNS = (
    "attack",
    "building",
    "device",
    "eps",
    "phi",
    "mode",
    "n",
    "clean_mean_m",
    "mean_m",
    "median_m",
    "p95_m",
    "max_m",
    "seed",
)


def localization_error(predicted_rp, true_rp, rps) -> np.ndarray:
    """Euclidean distance (m) between predicted and true RP coordinates.

    ``rps`` is a :class:`FloorplanDataset` or a mapping ``rp_id -> (x, y)``.
    """
    if isinstance(rps, FloorplanDataset):
        ids, pos = rps.rp_ids, rps.rp_positions
    else:
        ids = np.array(sorted(rps), dtype=np.int64)
        pos = np.array([rps[int(r)] for r in ids], dtype=np.float64).reshape(-1, 2)
    predicted_rp = np.atleast_1d(np.asarray(predicted_rp, dtype=np.int64))
    true_rp = np.atleast_1d(np.asarray(true_rp, dtype=np.int64))

    def lookup(r):
        i = np.clip(np.searchsorted(ids, r), 0, len(ids) - 1)
        if len(ids) == 0 or not np.all(ids[i] == r):
            bad = r[ids[i] != r] if len(ids) else r
            raise KeyError(f"unknown rp_id {int(bad[0])}")
        return pos[i]

    return np.linalg.norm(lookup(predicted_rp) - lookup(true_rp), axis=1)


def parse_range(text: str) -> list[float]:
    """``"0.1:0.5:0.1"`` -> [0.1, 0.2, 0.3, 0.4, 0.5]; also accepts ``"a,b,c"`` and a single number."""
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError(f"range {text!r} must be start:stop:step")
        start, stop, step = (float(p) for p in parts)
        if step <= 0 or stop < start:
            raise ValueError(f"range {text!r} needs step > 0 and stop >= start")
        n = int(math.floor((stop - start) / step + 1e-9)) + 1
        return [round(start + i * step, 10) for i in range(n)]
    return [float(p) for p in text.split(",") if p.strip()]


@dataclass(frozen=True)
class EvalGrid:
    epsilons: tuple[float, ...] = (0.1, 0.2, 0.3, 0.4, 0.5)
    phis: tuple[float, ...] = (10, 20, 30, 40, 50, 60, 70, 80, 90, 100)
    devices: tuple[str, ...] = (ALL_DEVICES,)
    buildings: tuple[str, ...] = ()
    attacks: tuple[str, ...] = ("fgsm",)
    seeds: tuple[int, ...] = (0,)
    mode: str = "manipulation"
    targeting: str = "random"
    steps: int = 10
    alpha: float | None = None
    mu: float = 1.0
    per_sample_mask: bool = False

    def __post_init__(self):
        for f in ("epsilons", "phis", "devices", "buildings", "attacks", "seeds"):
            object.__setattr__(self, f, tuple(getattr(self, f)))
        for f in ("epsilons", "phis", "devices", "attacks", "seeds"):
            if not getattr(self, f):
                raise ValueError(f"grid axis {f!r} is empty")
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")

    def n_cells(self, n_buildings: int | None = None) -> int:
        nb = n_buildings if n_buildings is not None else max(len(self.buildings), 1)
        return len(self.epsilons) * len(self.phis) * len(self.devices) * nb * len(self.attacks) * len(self.seeds)

    def attack_config(self, kind: str, eps: float, phi: float, seed: int) -> AttackConfig:
        return AttackConfig(
            kind=kind,
            epsilon=eps,
            phi_percent=phi,
            alpha=self.alpha,
            steps=self.steps,
            mu=self.mu,
            mode=self.mode,
            targeting=self.targeting,
            seed=seed,
            per_sample_mask=self.per_sample_mask,
        )

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class MetricsReport:
    attack: str
    building: str
    device: str
    eps: float
    phi: float
    mode: str
    n: int
    clean_mean_m: float
    mean_m: float
    median_m: float
    p95_m: float
    max_m: float
    seed: int
    errors: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.n and not 0 <= self.mean_m <= self.max_m:
            raise ValueError("metrics violate 0 <= mean <= max")

    @classmethod
    def from_errors(cls, errors, clean_mean: float, keep: bool = False, **cell) -> "MetricsReport":
        e = np.asarray(errors, dtype=np.float64)
        if e.size == 0:
            raise ValueError("cell has no test samples")
        return cls(
            n=int(e.size),
            clean_mean_m=float(clean_mean),
            mean_m=float(e.mean()),
            median_m=float(np.median(e)),
            p95_m=float(np.percentile(e, 95)),
            max_m=float(e.max()),
            errors=e if keep else None,
            **cell,
        )

    def row(self) -> dict:
        return {c: getattr(self, c) for c in CSV_COLUMNS}

    def __eq__(self, other):
        if not isinstance(other, MetricsReport):
            return NotImplemented
        return self.row() == other.row()


def _victim_for(localizer, surrogate):
    if hasattr(localizer, "input_gradient"):
        return localizer
    if surrogate is None:
        raise ValueError(
            f"{type(localizer).__name__} has no input gradient; gradient attacks need a surrogate victim"
        )
    return surrogate


def _per_building(obj, name: str):
    if isinstance(obj, Mapping):
        if name not in obj:
            raise KeyError(f"no localizer for building {name!r}")
        return obj[name]
    return obj


def run_grid(
    localizer,
    datasets,
    grid: EvalGrid,
    surrogate=None,
    per_sample: bool = False,
    prepare=None,
) -> list[MetricsReport]:
    """Evaluate ``localizer`` on every grid cell.

    ``datasets`` is one dataset or a sequence of them; ``localizer`` and
    ``surrogate`` may be mappings from building name to model. ``prepare``
    maps a dataset's normalized rows to the model's input width (identity by
    default). With ``per_sample`` each report keeps its error vector.
    """
    if isinstance(datasets, FloorplanDataset):
        datasets = [datasets]
    datasets = list(datasets)
    if grid.buildings:
        wanted = set(grid.buildings)
        datasets = [d for d in datasets if d.name in wanted]
    if not datasets:
        raise ValueError("no datasets to evaluate")
    prepare = prepare or (lambda ds, x: x)
    reports = []
    for ds in datasets:
        model = _per_building(localizer, ds.name)
        sur = _per_building(surrogate, ds.name) if surrogate is not None else None
        victim = None
        ap_means = prepare(ds, ds.train.normalized()).mean(axis=0)
        for device in grid.devices:
            test = ds.test if device == ALL_DEVICES else ds.test.for_device(device)
            if len(test) == 0:
                raise ValueError(f"building {ds.name!r} has no test rows for device {device!r}")
            x = prepare(ds, test.normalized()).astype(np.float32)
            y = ds.labels(test.rp_ids)
            clean_pred = model.predict(x)
            clean = localization_error(ds.rp_ids[clean_pred], test.rp_ids, ds)
            for kind, eps, phi, seed in itertools.product(grid.attacks, grid.epsilons, grid.phis, grid.seeds):
                cfg = grid.attack_config(kind, eps, phi, seed)
                mask = attack_mask(cfg, len(x), ds.train.rss)
                untouched = not mask.any() or (eps == 0 and cfg.mode == "manipulation")
                if untouched:
                    pred = clean_pred
                else:
                    victim = victim or _victim_for(model, sur)
                    pred = model.predict(craft(victim, x, y, cfg, mask, ap_means))
                err = clean if untouched else localization_error(ds.rp_ids[pred], test.rp_ids, ds)
                reports.append(
                    MetricsReport.from_errors(
                        err,
                        clean.mean(),
                        keep=per_sample,
                        attack=kind,
                        building=ds.name,
                        device=device,
                        eps=float(eps),
                        phi=float(phi),
                        mode=cfg.mode,
                        seed=int(seed),
                    )
                )
    return reports


# -- report files --------------------------------------------------------------------


def _nest(reports: Iterable[MetricsReport]) -> dict:
    tree: dict = {}
    for r in reports:
        tree.setdefault(r.attack, {}).setdefault(r.building, {}).setdefault(r.device, []).append(
            {k: v for k, v in r.row().items() if k not in ("attack", "building", "device")}
        )
    return tree


def emit_report(reports: list[MetricsReport], out, formats=("csv", "json"), config: dict | None = None) -> list[Path]:
    """Write ``report.csv`` / ``report.json`` (and ``per_sample.csv`` when errors were kept) into ``out``."""
    reports = list(reports)
    if not reports:
        raise ValueError("refusing to write an empty report")
    out = Path(out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create report directory {out}: {exc}") from exc
    written = []
    if "csv" in formats:
        path = out / "report.csv"
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.DictWriter(fh, fieldnames=CSV_COLUMNS, lineterminator="\n")
            w.writeheader()
            for r in reports:
                w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in r.row().items()})
        written.append(path)
    if "json" in formats:
        path = out / "report.json"
        doc = {"config": config or {}, "columns": list(CSV_COLUMNS), "results": _nest(reports)}
        path.write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n", encoding="utf-8")
        written.append(path)
    if any(r.errors is not None for r in reports):
        path = out / "per_sample.csv"
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["attack", "building", "device", "eps", "phi", "mode", "seed", "row", "error_m"])
            for r in reports:
                for i, e in enumerate(r.errors if r.errors is not None else ()):
                    w.writerow([r.attack, r.building, r.device, repr(r.eps), repr(r.phi), r.mode, r.seed, i, repr(float(e))])
        written.append(path)
    return written


def load_report_json(path) -> tuple[list[MetricsReport], dict]:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    reports = []
    for attack, buildings in doc["results"].items():
        for building, devices in buildings.items():
            for device, cells in devices.items():
                for cell in cells:
                    reports.append(MetricsReport(attack=attack, building=building, device=device, **cell))
    return reports, doc.get("config", {})


def load_report_csv(path) -> list[MetricsReport]:
    types = {f.name: f.type for f in fields(MetricsReport)}
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            kw = {}
            for k, v in row.items():
                t = types[k]
                kw[k] = int(v) if t in ("int", int) else float(v) if t in ("float", float) else v
            out.append(MetricsReport(**kw))
    return out


def cell_means_from_per_sample(path) -> dict[tuple, float]:
    """Recompute each cell's mean error from a ``per_sample.csv``."""
    sums: dict[tuple, list[float]] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            key = (row["attack"], row["building"], row["device"], float(row["eps"]), float(row["phi"]), row["mode"], int(row["seed"]))
            sums.setdefault(key, []).append(float(row["error_m"]))
    return {k: float(np.mean(v)) for k, v in sums.items()}
