"""RSS fingerprint data: containers, synthetic buildings, device profiles, CSV I/O.

RSS values are dBm in ``[-100, 0]``; an AP that was not heard is stored as
exactly ``-100``. Models consume the linear rescaling ``(rss + 100) / 100``.

A dataset on disk is a directory holding ``train.csv``, ``test.csv`` and an
optional ``manifest.json``. Each CSV has the header
``rp_id,device,x_m,y_m,<ap ids...>`` with one row per fingerprint sample.
"""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

RSS_MIN = -100.0
RSS_MAX = 0.0
MISSING_DBM = -100.0

DEVICE_NAMES = ("BLU", "HTC", "S7", "LG", "MOTO", "OP3")
DESIGNATED_DEVICE = "OP3"
TRAIN_SAMPLES_PER_RP = 5

BASE_COLUMNS = ("rp_id", "device", "x_m", "y_m")
# optional bookkeeping columns, never treated as APs
RESERVED_COLUMNS = ("sample", "attacked")


class DatasetError(ValueError):
    """Raised for malformed fingerprint data or files."""


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, copy=True)
    arr.setflags(write=False)
    return arr


def _check_rss(rss: np.ndarray) -> None:
    if not np.all(np.isfinite(rss)):
        raise DatasetError("rss contains non-finite values")
    if rss.size and (rss.min() < RSS_MIN or rss.max() > RSS_MAX):
        raise DatasetError(f"rss outside [{RSS_MIN:g}, {RSS_MAX:g}] dBm")


# -- domain types --------------------------------------------------------------


@dataclass(frozen=True)
class ReferencePoint:
    rp_id: int
    position: tuple[float, float]


@dataclass(frozen=True, eq=False)
class Fingerprint:
    """A single RSS scan taken at a reference point by one device."""

    rss: np.ndarray
    rp_id: int
    device: str

    def __post_init__(self):
        rss = np.asarray(self.rss, dtype=np.float64).reshape(-1)
        _check_rss(rss)
        object.__setattr__(self, "rss", _frozen(rss))

    def __eq__(self, other):
        if not isinstance(other, Fingerprint):
            return NotImplemented
        return (
            self.rp_id == other.rp_id
            and self.device == other.device
            and np.array_equal(self.rss, other.rss)
        )


@dataclass(frozen=True)
class DeviceProfile:
    """Affine dBm distortion plus Gaussian jitter that stands in for one phone's radio."""

    name: str
    gain: float = 1.0
    offset: float = 0.0
    noise_sigma: float = 0.0

    @property
    def is_identity(self) -> bool:
        return self.gain == 1.0 and self.offset == 0.0 and self.noise_sigma == 0.0


def default_device_profiles(seed: int = 2024) -> list[DeviceProfile]:
    """The six handsets, with OP3 as the undistorted reference.

    The other five draw gain from U[0.9, 1.1], offset from U[-4, 4] dBm and
    jitter sigma from U[0, 2] dB, once, from ``seed``.
    """
    rng = np.random.default_rng(seed)
    profiles = []
    for name in DEVICE_NAMES:
        gain, offset, sigma = rng.uniform(0.9, 1.1), rng.uniform(-4, 4), rng.uniform(0, 2)
        if name == DESIGNATED_DEVICE:
            profiles.append(DeviceProfile(name))
        else:
            profiles.append(DeviceProfile(name, round(float(gain), 4), round(float(offset), 3), round(float(sigma), 3)))
    return profiles


def apply_device_profile_array(rss: np.ndarray, profile: DeviceProfile, rng: np.random.Generator | None = None) -> np.ndarray:
    """Vectorised :func:`apply_device_profile` over an array of dBm values."""
    rss = np.asarray(rss, dtype=np.float64)
    if profile.is_identity:
        return rss.copy()
    out = RSS_MIN + profile.gain * (rss - RSS_MIN) + profile.offset
    if profile.noise_sigma > 0:
        if rng is None:
            raise ValueError("a noisy device profile needs a random generator")
        out = out + rng.normal(0.0, profile.noise_sigma, rss.shape)
    out = np.clip(out, RSS_MIN, RSS_MAX)
    return np.where(rss == MISSING_DBM, MISSING_DBM, out)


def apply_device_profile(fp: Fingerprint, profile: DeviceProfile, seed: int = 0) -> Fingerprint:
    rng = np.random.default_rng(seed)
    return Fingerprint(apply_device_profile_array(fp.rss, profile, rng), fp.rp_id, profile.name)


def normalize(rss) -> np.ndarray:
    """Map dBm in [-100, 0] linearly onto [0, 1]."""
    if isinstance(rss, Fingerprint):
        rss = rss.rss
    rss = np.asarray(rss, dtype=np.float64)
    _check_rss(rss)
    return (rss - RSS_MIN) / (RSS_MAX - RSS_MIN)


def denormalize(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    return x * (RSS_MAX - RSS_MIN) + RSS_MIN


@dataclass(frozen=True, eq=False)
class FingerprintSet:
    """Column-oriented collection of fingerprints that share one AP roster."""

    rss: np.ndarray
    rp_ids: np.ndarray
    devices: np.ndarray
    samples: np.ndarray | None = None

    def __post_init__(self):
        rss = np.asarray(self.rss, dtype=np.float64)
        if rss.ndim != 2:
            raise DatasetError(f"rss must be 2-D, got shape {rss.shape}")
        n = rss.shape[0]
        rp_ids = np.asarray(self.rp_ids, dtype=np.int64).reshape(-1)
        devices = np.asarray(self.devices, dtype=str).reshape(-1)
        if rp_ids.shape[0] != n or devices.shape[0] != n:
            raise DatasetError("rss, rp_ids and devices disagree in length")
        _check_rss(rss)
        samples = self.samples
        if samples is None:
            samples = _running_index(rp_ids, devices)
        samples = np.asarray(samples, dtype=np.int64).reshape(-1)
        if samples.shape[0] != n:
            raise DatasetError("samples length mismatch")
        object.__setattr__(self, "rss", _frozen(rss))
        object.__setattr__(self, "rp_ids", _frozen(rp_ids))
        object.__setattr__(self, "devices", _frozen(devices))
        object.__setattr__(self, "samples", _frozen(samples))

    def __len__(self) -> int:
        return self.rss.shape[0]

    def __eq__(self, other):
        if not isinstance(other, FingerprintSet):
            return NotImplemented
        return (
            np.array_equal(self.rss, other.rss)
            and np.array_equal(self.rp_ids, other.rp_ids)
            and np.array_equal(self.devices, other.devices)
            and np.array_equal(self.samples, other.samples)
        )

    @property
    def n_aps(self) -> int:
        return self.rss.shape[1]

    def normalized(self) -> np.ndarray:
        return normalize(self.rss)

    def select(self, mask) -> "FingerprintSet":
        mask = np.asarray(mask)
        return FingerprintSet(self.rss[mask], self.rp_ids[mask], self.devices[mask], self.samples[mask])

    def for_device(self, device: str) -> "FingerprintSet":
        return self.select(self.devices == device)

    def fingerprint(self, i: int) -> Fingerprint:
        return Fingerprint(self.rss[i], int(self.rp_ids[i]), str(self.devices[i]))

    def __iter__(self):
        return (self.fingerprint(i) for i in range(len(self)))


def _running_index(rp_ids: np.ndarray, devices: np.ndarray) -> np.ndarray:
    seen: dict[tuple[int, str], int] = {}
    out = np.empty(len(rp_ids), dtype=np.int64)
    for i, key in enumerate(zip(rp_ids.tolist(), devices.tolist())):
        out[i] = seen.get(key, 0)
        seen[key] = out[i] + 1
    return out


@dataclass(frozen=True, eq=False)
class FloorplanDataset:
    """One building: AP roster, reference points, and the train/test fingerprints."""

    name: str
    ap_ids: tuple[str, ...]
    rp_ids: np.ndarray
    rp_positions: np.ndarray
    train: FingerprintSet
    test: FingerprintSet
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        ap_ids = tuple(str(a) for a in self.ap_ids)
        if len(set(ap_ids)) != len(ap_ids):
            raise DatasetError("duplicate AP ids in roster")
        rp_ids = np.asarray(self.rp_ids, dtype=np.int64).reshape(-1)
        pos = np.asarray(self.rp_positions, dtype=np.float64).reshape(-1, 2)
        if len(np.unique(rp_ids)) != len(rp_ids):
            raise DatasetError("duplicate rp_id")
        if pos.shape[0] != rp_ids.shape[0]:
            raise DatasetError("one position per reference point required")
        order = np.argsort(rp_ids, kind="stable")
        rp_ids, pos = rp_ids[order], pos[order]
        for part in (self.train, self.test):
            if part.n_aps != len(ap_ids):
                raise DatasetError(f"fingerprint width {part.n_aps} != roster size {len(ap_ids)}")
            if len(part) and not np.all(np.isin(part.rp_ids, rp_ids)):
                raise DatasetError("fingerprint refers to an unknown rp_id")
        object.__setattr__(self, "ap_ids", ap_ids)
        object.__setattr__(self, "rp_ids", _frozen(rp_ids))
        object.__setattr__(self, "rp_positions", _frozen(pos))
        object.__setattr__(self, "meta", dict(self.meta))

    def __eq__(self, other):
        if not isinstance(other, FloorplanDataset):
            return NotImplemented
        return (
            self.name == other.name
            and self.ap_ids == other.ap_ids
            and np.array_equal(self.rp_ids, other.rp_ids)
            and np.array_equal(self.rp_positions, other.rp_positions)
            and self.train == other.train
            and self.test == other.test
            and self.meta == other.meta
        )

    @property
    def n_aps(self) -> int:
        return len(self.ap_ids)

    @property
    def n_rps(self) -> int:
        return len(self.rp_ids)

    @property
    def devices(self) -> list[str]:
        return sorted(set(self.test.devices.tolist()) | set(self.train.devices.tolist()))

    @property
    def reference_points(self) -> list[ReferencePoint]:
        return [ReferencePoint(int(r), (float(p[0]), float(p[1]))) for r, p in zip(self.rp_ids, self.rp_positions)]

    def labels(self, rp_ids) -> np.ndarray:
        """Class indices (0..n_rps-1) for RP ids."""
        rp_ids = np.asarray(rp_ids, dtype=np.int64)
        idx = np.searchsorted(self.rp_ids, rp_ids)
        idx = np.clip(idx, 0, self.n_rps - 1)
        if not np.all(self.rp_ids[idx] == rp_ids):
            raise KeyError("unknown rp_id")
        return idx

    def positions(self, rp_ids) -> np.ndarray:
        return self.rp_positions[self.labels(rp_ids)]


# -- synthetic buildings ---------------------------------------------------------


@dataclass(frozen=True)
class SyntheticBuildingConfig:
    """Log-distance path-loss building along a straight corridor.

    Reference points sit 1 m apart on the x axis, ``floor(path_length_m) + 1``
    of them. Shadowing is a static per-(AP, RP) offset, correlated along the
    path over ``shadowing_corr_m``; each scan adds independent
    ``measurement_sigma_db`` jitter. Readings below ``sensitivity_dbm`` are
    reported as missing.
    """

    n_aps: int
    path_length_m: float
    rng_seed: int = 0
    name: str = "building"
    path_loss_exponent: float = 3.0
    reference_power_dbm: float = -30.0
    reference_distance_m: float = 1.0
    shadowing_sigma_db: float = 4.0
    shadowing_corr_m: float = 5.0
    measurement_sigma_db: float = 6.0
    sensitivity_dbm: float = -95.0
    ap_lateral_spread_m: float = 30.0
    integer_dbm: bool = True

    def __post_init__(self):
        if int(self.n_aps) < 1:
            raise ValueError("n_aps must be >= 1")
        if not self.path_length_m >= 1:
            raise ValueError("path_length_m must be >= 1")
        if self.shadowing_sigma_db < 0 or self.measurement_sigma_db < 0:
            raise ValueError("noise sigmas must be >= 0")

    @property
    def n_rps(self) -> int:
        return int(math.floor(self.path_length_m)) + 1


def path_loss_rss(distance_m, config: SyntheticBuildingConfig) -> np.ndarray:
    """Noise-free received power, clamped to the dBm range."""
    d = np.maximum(np.asarray(distance_m, dtype=np.float64), config.reference_distance_m)
    rss = config.reference_power_dbm - 10.0 * config.path_loss_exponent * np.log10(d / config.reference_distance_m)
    return np.clip(rss, RSS_MIN, RSS_MAX)


def _finish_readings(rss: np.ndarray, config: SyntheticBuildingConfig) -> np.ndarray:
    if config.integer_dbm:
        rss = np.round(rss)
    rss = np.clip(rss, RSS_MIN, RSS_MAX)
    return np.where(rss < config.sensitivity_dbm, MISSING_DBM, rss)


def generate_synthetic_building(
    config: SyntheticBuildingConfig,
    devices: Sequence[DeviceProfile] | None = None,
) -> FloorplanDataset:
    """Simulate the collection protocol: 5 designated-device scans per RP for
    training and one scan per RP per device for testing."""
    if devices is None:
        devices = default_device_profiles()
    devices = list(devices)
    if not devices:
        raise ValueError("at least one device profile is required")
    names = [d.name for d in devices]
    designated = DESIGNATED_DEVICE if DESIGNATED_DEVICE in names else names[0]
    profile_of = {d.name: d for d in devices}

    root = np.random.SeedSequence(config.rng_seed)
    s_aps, s_shadow, s_train, s_test, s_dev = (np.random.default_rng(s) for s in root.spawn(5))

    n_rps, n_aps = config.n_rps, int(config.n_aps)
    rp_ids = np.arange(n_rps)
    rp_pos = np.column_stack([np.arange(n_rps, dtype=np.float64), np.zeros(n_rps)])

    spread = config.ap_lateral_spread_m
    ap_x = s_aps.uniform(-spread, (n_rps - 1) + spread, n_aps)
    ap_y = s_aps.uniform(-spread, spread, n_aps)
    dist = np.hypot(rp_pos[:, 0:1] - ap_x[None, :], rp_pos[:, 1:2] - ap_y[None, :])
    mean_rss = path_loss_rss(dist, config)  # (n_rps, n_aps)

    # AR(1) along the path gives exponentially correlated shadowing
    shadow = np.zeros((n_rps, n_aps))
    if config.shadowing_sigma_db > 0:
        rho = math.exp(-1.0 / config.shadowing_corr_m) if config.shadowing_corr_m > 0 else 0.0
        innov = s_shadow.normal(0.0, config.shadowing_sigma_db, (n_rps, n_aps))
        shadow[0] = innov[0]
        for i in range(1, n_rps):
            shadow[i] = rho * shadow[i - 1] + math.sqrt(1 - rho * rho) * innov[i]
    site = mean_rss + shadow

    def scan(rng, n_per_rp):
        base = np.repeat(site, n_per_rp, axis=0)
        if config.measurement_sigma_db > 0:
            base = base + rng.normal(0.0, config.measurement_sigma_db, base.shape)
        return np.clip(base, RSS_MIN, RSS_MAX)

    train_rss = scan(s_train, TRAIN_SAMPLES_PER_RP)
    train_rss = _finish_readings(apply_device_profile_array(train_rss, profile_of[designated], s_dev), config)
    train = FingerprintSet(
        train_rss,
        np.repeat(rp_ids, TRAIN_SAMPLES_PER_RP),
        np.full(n_rps * TRAIN_SAMPLES_PER_RP, designated),
    )

    parts = []
    for name in names:
        raw = scan(s_test, 1)
        parts.append(_finish_readings(apply_device_profile_array(raw, profile_of[name], s_dev), config))
    test = FingerprintSet(
        np.concatenate(parts, axis=0),
        np.tile(rp_ids, len(names)),
        np.repeat(np.array(names), n_rps),
    )

    meta = {
        "generator": "log-distance",
        "seed": int(config.rng_seed),
        "config": asdict(config),
        "designated_device": designated,
        "devices": [asdict(d) for d in devices],
        "ap_positions": np.column_stack([ap_x, ap_y]).round(6).tolist(),
    }
    return FloorplanDataset(
        name=config.name,
        ap_ids=tuple(f"ap_{k}" for k in range(n_aps)),
        rp_ids=rp_ids,
        rp_positions=rp_pos,
        train=train,
        test=test,
        meta=meta,
    )


# -- reference-width alignment ---------------------------------------------------


def select_reference_aps(train_rss: np.ndarray, n_in: int) -> np.ndarray:
    """Indices of the ``n_in`` APs with the strongest mean training RSS (all, if fewer)."""
    mean = np.asarray(train_rss, dtype=np.float64).mean(axis=0)
    order = np.argsort(-mean, kind="stable")
    return np.sort(order[:n_in])


def fit_width(x: np.ndarray, keep: np.ndarray, n_in: int) -> np.ndarray:
    """Keep the selected columns of normalized inputs and zero-pad to ``n_in``."""
    x = np.asarray(x)
    out = np.zeros((x.shape[0], n_in), dtype=x.dtype)
    out[:, : len(keep)] = x[:, keep]
    return out


# -- CSV I/O ---------------------------------------------------------------------


def _fmt(v: float) -> str:
    v = float(v)
    if v.is_integer():
        return str(int(v))
    return repr(v)


def write_fingerprints(
    path,
    fps: FingerprintSet,
    ap_ids: Sequence[str],
    positions: dict[int, tuple[float, float]],
    extra: dict[str, Sequence] | None = None,
) -> None:
    """Write one CSV of fingerprints; ``extra`` columns are appended after the APs."""
    extra = extra or {}
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([*BASE_COLUMNS, *ap_ids, *extra.keys()])
        for i in range(len(fps)):
            rp = int(fps.rp_ids[i])
            x, y = positions[rp]
            w.writerow(
                [rp, fps.devices[i], _fmt(x), _fmt(y), *(_fmt(v) for v in fps.rss[i]), *(col[i] for col in extra.values())]
            )


def read_fingerprints(path, ap_ids: Sequence[str] | None = None):
    """Parse one fingerprint CSV.

    Returns ``(fingerprints, ap_ids, positions, extra_columns)``. When ``ap_ids``
    is given the file's AP columns are aligned to it: unknown APs are dropped
    with a warning and roster APs absent from the file are filled with -100.
    """
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DatasetError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    if tuple(header[:4]) != BASE_COLUMNS:
        raise DatasetError(f"{path}: header must start with {','.join(BASE_COLUMNS)}")
    if len(set(header)) != len(header):
        raise DatasetError(f"{path}: duplicate column names in header")
    file_aps = [h for h in header[4:] if h not in RESERVED_COLUMNS]
    reserved = {h: header.index(h) for h in header[4:] if h in RESERVED_COLUMNS}
    if not file_aps:
        raise DatasetError(f"{path}: no AP columns")
    ap_cols = [header.index(a) for a in file_aps]

    if ap_ids is None:
        ap_ids = tuple(file_aps)
        src, dst = ap_cols, list(range(len(file_aps)))
    else:
        ap_ids = tuple(ap_ids)
        pos_of = {a: i for i, a in enumerate(ap_ids)}
        unknown = [a for a in file_aps if a not in pos_of]
        if unknown:
            warnings.warn(f"{path}: dropping {len(unknown)} AP column(s) not in the roster: {unknown[:5]}", stacklevel=2)
        pairs = [(c, pos_of[a]) for a, c in zip(file_aps, ap_cols) if a in pos_of]
        src = [p[0] for p in pairs]
        dst = [p[1] for p in pairs]

    body = [r for r in rows[1:] if r]
    n = len(body)
    rss = np.full((n, len(ap_ids)), MISSING_DBM)
    rp_ids = np.empty(n, dtype=np.int64)
    devices = []
    positions: dict[int, tuple[float, float]] = {}
    extra = {h: [] for h in reserved}
    for i, row in enumerate(body):
        lineno = i + 2
        if len(row) != len(header):
            raise DatasetError(f"{path}:{lineno}: header mismatch, expected {len(header)} fields, got {len(row)}")
        try:
            rp = int(row[0])
            xy = (float(row[2]), float(row[3]))
            vals = np.array([float(row[c]) for c in src], dtype=np.float64)
        except ValueError as exc:
            raise DatasetError(f"{path}:{lineno}: non-numeric value ({exc})") from None
        if not np.all(np.isfinite(vals)) or (vals.size and (vals.min() < RSS_MIN or vals.max() > RSS_MAX)):
            raise DatasetError(f"{path}:{lineno}: rss outside [-100, 0]")
        if rp in positions and positions[rp] != xy:
            raise DatasetError(f"{path}:{lineno}: rp_id {rp} has conflicting coordinates")
        positions[rp] = xy
        rp_ids[i] = rp
        devices.append(row[1].strip())
        rss[i, dst] = vals
        for h, c in reserved.items():
            extra[h].append(row[c])

    devices_arr = np.array(devices, dtype=str)
    samples = None
    if "sample" in extra:
        try:
            samples = np.array([int(s) for s in extra["sample"]], dtype=np.int64)
        except ValueError:
            raise DatasetError(f"{path}: non-integer sample index") from None
    if samples is not None:
        keys = list(zip(rp_ids.tolist(), devices, samples.tolist()))
        if len(set(keys)) != len(keys):
            raise DatasetError(f"{path}: duplicate (rp_id, device, sample) rows")
    fps = FingerprintSet(rss, rp_ids, devices_arr, samples)
    return fps, ap_ids, positions, extra


def save_csv(dataset: FloorplanDataset, path) -> Path:
    """Write ``train.csv``, ``test.csv`` and ``manifest.json`` into directory ``path``."""
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    positions = {int(r): (float(p[0]), float(p[1])) for r, p in zip(dataset.rp_ids, dataset.rp_positions)}
    write_fingerprints(out / "train.csv", dataset.train, dataset.ap_ids, positions)
    write_fingerprints(out / "test.csv", dataset.test, dataset.ap_ids, positions)
    manifest = {
        "name": dataset.name,
        "ap_ids": list(dataset.ap_ids),
        "rp_ids": [int(r) for r in dataset.rp_ids],
        "meta": dataset.meta,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    return out


def load_csv(path) -> FloorplanDataset:
    """Load a dataset directory (or the path of its manifest).

    The roster comes from the manifest when present, else from the training
    file's header. Reference points without any fingerprint are kept only if
    the manifest lists them.
    """
    path = Path(path)
    root = path.parent if path.is_file() else path
    manifest_path = root / "manifest.json"
    manifest = json.loads(manifest_path.read_text(encoding="utf-8")) if manifest_path.exists() else {}
    roster = manifest.get("ap_ids")
    train, ap_ids, pos_train, _ = read_fingerprints(root / "train.csv", roster)
    test_path = root / "test.csv"
    if test_path.exists():
        test, _, pos_test, _ = read_fingerprints(test_path, ap_ids)
    else:
        test, pos_test = FingerprintSet(np.empty((0, len(ap_ids))), [], []), {}
    positions = dict(pos_train)
    for rp, xy in pos_test.items():
        if rp in positions and positions[rp] != xy:
            raise DatasetError(f"rp_id {rp} has different coordinates in train and test files")
        positions[rp] = xy
    rp_ids = sorted(positions)
    listed = manifest.get("rp_ids")
    if listed is not None and set(listed) != set(rp_ids):
        raise DatasetError("manifest rp_ids disagree with the fingerprint files")
    return FloorplanDataset(
        name=manifest.get("name", root.name),
        ap_ids=ap_ids,
        rp_ids=np.array(rp_ids, dtype=np.int64),
        rp_positions=np.array([positions[r] for r in rp_ids], dtype=np.float64).reshape(-1, 2),
        train=train,
        test=test,
        meta=manifest.get("meta", {}),
    )


def building_config(number: int, seed: int = 7) -> SyntheticBuildingConfig:
    """Synthetic stand-ins sized like the five surveyed buildings."""
    dims = {1: (156, 64), 2: (125, 62), 3: (78, 88), 4: (112, 68), 5: (218, 60)}
    if number not in dims:
        raise ValueError(f"unknown building {number}; choose 1-5")
    n_aps, length = dims[number]
    return SyntheticBuildingConfig(n_aps=n_aps, path_length_m=length, rng_seed=seed, name=f"building{number}")


def iter_devices(dataset: FloorplanDataset) -> Iterable[str]:
    seen = []
    for d in dataset.test.devices.tolist():
        if d not in seen:
            seen.append(d)
    return seen
