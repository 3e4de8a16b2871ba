"""I/Q frame datasets: loading, validation, normalization, splitting, synthesis.

A frame is a real (2, W) float32 array: row 0 carries the in-phase samples,
row 1 the quadrature samples. Datasets are immutable array-backed collections
of frames keyed by (modulation, snr_db).
"""

from __future__ import annotations

import json
import math
import pickle
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

# Modulation classes of the public RadioML 2016.10a release, in its canonical
# sorted order. Synthetic datasets may use their own class names.
KNOWN_MODULATIONS = (
    "8PSK", "AM-DSB", "AM-SSB", "BPSK", "CPFSK", "GFSK",
    "PAM4", "QAM16", "QAM64", "QPSK", "WBFM",
)

PUBLIC_SNR_MIN = -20
PUBLIC_SNR_MAX = 18

SYNTH_CLASSES = ("tone", "bpsk", "qpsk", "fsk", "wideband-noise")

NORMALIZE_POLICIES = ("none", "max-abs", "unit-power")

CONTAINER_MAGIC = b"RFDS1\n"


class DatasetFormatError(ValueError):
    """Raised when a dataset file cannot be parsed in the declared format."""


def validate_frame(frame: np.ndarray) -> np.ndarray:
    """Check one frame: shape (2, W), W >= 8, all entries finite."""
    arr = np.asarray(frame, dtype=np.float32)
    if arr.ndim != 2 or arr.shape[0] != 2:
        raise ValueError(f"frame shape not (2, W): got {arr.shape}")
    if arr.shape[1] < 8:
        raise ValueError(f"frame width {arr.shape[1]} < 8")
    if not np.isfinite(arr).all():
        raise ValueError("frame contains non-finite entries")
    return arr


def normalize_frame(frame: np.ndarray, policy: str = "none") -> np.ndarray:
    """Rescale a frame under the given policy.

    none       -> identity
    max-abs    -> divide by the maximum absolute entry
    unit-power -> scale so the mean of squared entries is 1
    """
    arr = validate_frame(frame)
    if policy == "none":
        return arr.copy()
    if policy == "max-abs":
        peak = float(np.abs(arr).max())
        if peak == 0.0:
            raise ValueError("degenerate frame: all-zero under max-abs")
        return arr / peak
    if policy == "unit-power":
        power = float(np.mean(arr.astype(np.float64) ** 2))
        if power == 0.0:
            raise ValueError("degenerate frame: all-zero under unit-power")
        return (arr / np.float32(math.sqrt(power))).astype(np.float32)
    raise ValueError(f"unknown normalization policy: {policy!r}")


@dataclass(frozen=True)
class SampleRecord:
    """One labelled frame: (2, W) samples, modulation name, SNR in dB."""

    frame: np.ndarray
    modulation: str
    snr_db: int


@dataclass
class RFDataset:
    """Array-backed collection of labelled I/Q frames.

    frames       -- (n, 2, W) float32
    modulations  -- (n,) array of modulation names
    snrs_db      -- (n,) int array of per-record SNR in dB
    provenance   -- source path or synthesis description
    """

    frames: np.ndarray
    modulations: np.ndarray
    snrs_db: np.ndarray
    provenance: str = ""

    def __post_init__(self):
        self.frames = np.asarray(self.frames, dtype=np.float32)
        self.modulations = np.asarray(self.modulations, dtype=object)
        self.snrs_db = np.asarray(self.snrs_db, dtype=np.int64)
        if self.frames.ndim != 3 or self.frames.shape[1] != 2:
            raise ValueError(f"frames must be (n, 2, W), got {self.frames.shape}")
        n = len(self.frames)
        if len(self.modulations) != n or len(self.snrs_db) != n:
            raise ValueError("frames, modulations and snrs_db lengths differ")
        if n and self.frames.shape[2] < 8:
            raise ValueError(f"frame width {self.frames.shape[2]} < 8")
        if n and not np.isfinite(self.frames).all():
            raise ValueError("dataset contains non-finite samples")

    def __len__(self) -> int:
        return len(self.frames)

    @property
    def frame_width(self) -> int:
        return int(self.frames.shape[2]) if len(self.frames) else 0

    @property
    def modulation_names(self) -> tuple:
        """Distinct modulation names, sorted."""
        return tuple(sorted(set(self.modulations.tolist())))

    @property
    def snr_values(self) -> tuple:
        return tuple(sorted(set(self.snrs_db.tolist())))

    def group_keys(self) -> list:
        """Distinct (modulation, snr_db) pairs present, sorted."""
        return sorted({(m, int(s)) for m, s in zip(self.modulations, self.snrs_db)})

    def records(self):
        """Iterate SampleRecord views in record order."""
        for i in range(len(self)):
            yield SampleRecord(self.frames[i], str(self.modulations[i]), int(self.snrs_db[i]))

    def subset(self, mask: np.ndarray) -> "RFDataset":
        return RFDataset(self.frames[mask], self.modulations[mask],
                         self.snrs_db[mask], self.provenance)

    def normalized(self, policy: str) -> "RFDataset":
        """Apply one normalization policy to every frame."""
        if policy == "none":
            return self
        out = np.stack([normalize_frame(f, policy) for f in self.frames]) \
            if len(self) else self.frames
        return RFDataset(out, self.modulations, self.snrs_db, self.provenance)


@dataclass
class AnomalySplit:
    """Inlier-only training set plus a labelled mixed test set.

    Labels are 1 for outliers (modulation differs from the inlier class),
    0 for inliers.
    """

    inlier_modulation: str
    train: np.ndarray
    test_frames: np.ndarray
    test_labels: np.ndarray
    test_modulations: np.ndarray
    test_snrs_db: np.ndarray
    seed: int
    snr_min: int = PUBLIC_SNR_MIN
    train_frac: float = 0.8


def make_anomaly_split(ds: RFDataset, inlier: str, train_frac: float = 0.8,
                       snr_min: int = PUBLIC_SNR_MIN, seed: int = 0) -> AnomalySplit:
    """Split a dataset for one-class training on `inlier` frames.

    Deterministic given `seed`: the inlier frames (after SNR filtering) are
    shuffled once and round(train_frac * n) of them form the training set;
    the remaining inliers plus every other-modulation frame form the test set.
    """
    if not 0.0 < train_frac < 1.0:
        raise ValueError(f"train_frac must be in (0, 1), got {train_frac}")
    if inlier not in set(ds.modulations.tolist()):
        raise ValueError(f"unknown modulation: {inlier!r}")

    keep = ds.snrs_db >= snr_min
    inlier_mask = keep & (ds.modulations == inlier)
    outlier_mask = keep & (ds.modulations != inlier)

    inlier_idx = np.flatnonzero(inlier_mask)
    if len(inlier_idx) < 2:
        raise ValueError(f"too few inliers: {len(inlier_idx)} frames of "
                         f"{inlier!r} at snr >= {snr_min}")

    rng = np.random.default_rng(seed)
    perm = rng.permutation(len(inlier_idx))
    n_train = int(round(train_frac * len(inlier_idx)))
    train_idx = inlier_idx[perm[:n_train]]
    test_inlier_idx = inlier_idx[perm[n_train:]]
    test_idx = np.concatenate([test_inlier_idx, np.flatnonzero(outlier_mask)])

    labels = (ds.modulations[test_idx] != inlier).astype(np.int8)
    return AnomalySplit(
        inlier_modulation=inlier,
        train=ds.frames[train_idx],
        test_frames=ds.frames[test_idx],
        test_labels=labels,
        test_modulations=ds.modulations[test_idx],
        test_snrs_db=ds.snrs_db[test_idx],
        seed=seed,
        snr_min=snr_min,
        train_frac=train_frac,
    )


# ---------------------------------------------------------------------------
# Neutral container: magic "RFDS1\n", one-line JSON header
# {frame_width, n_records, modulations[], snrs[]}, then n_records x (2 x W)
# float32 little-endian in record order, then n_records x (mod_index uint8,
# snr_index uint8).
# ---------------------------------------------------------------------------

def save_container(ds: RFDataset, path) -> Path:
    path = Path(path)
    mods = list(ds.modulation_names)
    snrs = [int(s) for s in ds.snr_values]
    if len(mods) > 256 or len(snrs) > 256:
        raise ValueError("container index tables are limited to 256 entries")
    mod_index = {m: i for i, m in enumerate(mods)}
    snr_index = {s: i for i, s in enumerate(snrs)}
    header = {
        "frame_width": ds.frame_width,
        "n_records": len(ds),
        "modulations": mods,
        "snrs": snrs,
    }
    with open(path, "wb") as f:
        f.write(CONTAINER_MAGIC)
        f.write((json.dumps(header) + "\n").encode("utf-8"))
        f.write(np.ascontiguousarray(ds.frames, dtype="<f4").tobytes())
        idx = np.empty((len(ds), 2), dtype=np.uint8)
        for i in range(len(ds)):
            idx[i, 0] = mod_index[str(ds.modulations[i])]
            idx[i, 1] = snr_index[int(ds.snrs_db[i])]
        f.write(idx.tobytes())
    return path


def load_container(path) -> RFDataset:
    path = Path(path)
    with open(path, "rb") as f:
        magic = f.read(len(CONTAINER_MAGIC))
        if magic != CONTAINER_MAGIC:
            raise DatasetFormatError(f"malformed container: bad magic in {path}")
        header_line = f.readline()
        try:
            header = json.loads(header_line.decode("utf-8"))
            width = int(header["frame_width"])
            n = int(header["n_records"])
            mods = [str(m) for m in header["modulations"]]
            snrs = [int(s) for s in header["snrs"]]
        except (ValueError, KeyError, TypeError) as exc:
            raise DatasetFormatError(f"malformed container: bad header in {path}") from exc
        payload = f.read(n * 2 * width * 4)
        if len(payload) != n * 2 * width * 4:
            raise DatasetFormatError(f"malformed container: truncated payload in {path}")
        frames = np.frombuffer(payload, dtype="<f4").reshape(n, 2, width).copy()
        idx_bytes = f.read(n * 2)
        if len(idx_bytes) != n * 2:
            raise DatasetFormatError(f"malformed container: truncated index in {path}")
        idx = np.frombuffer(idx_bytes, dtype=np.uint8).reshape(n, 2)
        if n and (idx[:, 0].max() >= len(mods) or idx[:, 1].max() >= len(snrs)):
            raise DatasetFormatError(f"malformed container: index out of range in {path}")
    modulations = np.array(mods, dtype=object)[idx[:, 0]] if n else np.empty(0, dtype=object)
    snrs_db = np.array(snrs, dtype=np.int64)[idx[:, 1]] if n else np.empty(0, dtype=np.int64)
    return RFDataset(frames, modulations, snrs_db, provenance=str(path))


def load_public_pickle(path) -> RFDataset:
    """Load the publicly distributed serialized map of (modulation, snr) -> frames.

    The public release is a Python 2 pickle of a dict keyed by
    (modulation_name, snr_db) holding float32 arrays shaped (n, 2, W).
    """
    path = Path(path)
    try:
        with open(path, "rb") as f:
            table = pickle.load(f, encoding="latin1")
    except (pickle.UnpicklingError, EOFError, UnicodeDecodeError) as exc:
        raise DatasetFormatError(f"malformed container: cannot unpickle {path}") from exc
    if not isinstance(table, dict) or not table:
        raise DatasetFormatError(f"malformed container: no (modulation, snr) map in {path}")

    frames_parts, mods_parts, snr_parts = [], [], []
    width = None
    for key in sorted(table.keys(), key=lambda k: (str(k[0]), int(k[1]))):
        try:
            mod, snr = str(key[0]), int(key[1])
        except (TypeError, ValueError, IndexError) as exc:
            raise DatasetFormatError(f"malformed container: bad key {key!r}") from exc
        if mod not in KNOWN_MODULATIONS:
            raise ValueError(f"unknown modulation name: {mod!r}")
        block = np.asarray(table[key], dtype=np.float32)
        if block.ndim != 3 or block.shape[1] != 2:
            raise ValueError(f"frame shape not (2, W) for key {key}: {block.shape[1:]}")
        if width is None:
            width = block.shape[2]
        elif block.shape[2] != width:
            raise ValueError(f"inconsistent frame width: {block.shape[2]} vs {width}")
        frames_parts.append(block)
        mods_parts.extend([mod] * len(block))
        snr_parts.extend([snr] * len(block))
    frames = np.concatenate(frames_parts, axis=0)
    return RFDataset(frames, np.array(mods_parts, dtype=object),
                     np.array(snr_parts, dtype=np.int64), provenance=str(path))


def load_dataset(path, fmt: str = "auto") -> RFDataset:
    """Load a dataset file.

    fmt: "rfds" for the neutral container, "pickle" for the public serialized
    map, "auto" to sniff the magic bytes.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"dataset file not found: {path}")
    if path.stat().st_size == 0:
        raise DatasetFormatError(f"malformed container: empty file {path}")
    if fmt == "auto":
        with open(path, "rb") as f:
            fmt = "rfds" if f.read(len(CONTAINER_MAGIC)) == CONTAINER_MAGIC else "pickle"
    if fmt == "rfds":
        return load_container(path)
    if fmt == "pickle":
        return load_public_pickle(path)
    raise ValueError(f"unknown dataset format: {fmt!r}")


# ---------------------------------------------------------------------------
# Synthetic datasets. Each frame is a unit-power complex baseband waveform
# plus white Gaussian noise at the requested SNR; snr_db=inf means no noise.
# ---------------------------------------------------------------------------

def _synth_baseband(cls: str, width: int, rng: np.random.Generator) -> np.ndarray:
    n = np.arange(width)
    if cls == "tone":
        freq = rng.uniform(0.05, 0.45) * rng.choice([-1.0, 1.0])
        phase = rng.uniform(0.0, 2.0 * np.pi)
        return np.exp(1j * (2.0 * np.pi * freq * n + phase))
    if cls == "bpsk":
        sps = 8
        symbols = rng.choice([-1.0, 1.0], size=width // sps + 1)
        phase = rng.uniform(0.0, 2.0 * np.pi)
        return symbols[n // sps] * np.exp(1j * phase)
    if cls == "qpsk":
        sps = 8
        points = np.array([1 + 1j, 1 - 1j, -1 + 1j, -1 - 1j]) / np.sqrt(2.0)
        symbols = points[rng.integers(0, 4, size=width // sps + 1)]
        phase = rng.uniform(0.0, 2.0 * np.pi)
        return symbols[n // sps] * np.exp(1j * phase)
    if cls == "fsk":
        sps = 8
        dev = 0.1
        bits = rng.choice([-1.0, 1.0], size=width // sps + 1)
        inst_freq = dev * bits[n // sps]
        theta = rng.uniform(0.0, 2.0 * np.pi) + 2.0 * np.pi * np.cumsum(inst_freq)
        return np.exp(1j * theta)
    if cls == "wideband-noise":
        return (rng.standard_normal(width) + 1j * rng.standard_normal(width)) / np.sqrt(2.0)
    raise ValueError(f"unknown synthetic class: {cls!r}")


def synth_dataset(classes, frames_per_class: int, snr_db: float = 10.0,
                  width: int = 128, seed: int = 0) -> RFDataset:
    """Generate a labelled synthetic dataset, deterministic given `seed`."""
    if frames_per_class < 0:
        raise ValueError("frames_per_class must be >= 0")
    if width < 8:
        raise ValueError(f"width {width} < 8")
    classes = list(classes)
    for cls in classes:
        if cls not in SYNTH_CLASSES:
            raise ValueError(f"unknown synthetic class: {cls!r}")

    rng = np.random.default_rng(seed)
    noise_power = 0.0 if math.isinf(snr_db) else 10.0 ** (-snr_db / 10.0)
    frames, mods, snrs = [], [], []
    snr_int = PUBLIC_SNR_MAX if math.isinf(snr_db) else int(round(snr_db))
    for cls in classes:
        for _ in range(frames_per_class):
            sig = _synth_baseband(cls, width, rng)
            if noise_power > 0.0:
                sig = sig + math.sqrt(noise_power / 2.0) * (
                    rng.standard_normal(width) + 1j * rng.standard_normal(width))
            frames.append(np.stack([sig.real, sig.imag]).astype(np.float32))
            mods.append(cls)
            snrs.append(snr_int)
    if not frames:
        return RFDataset(np.empty((0, 2, width), dtype=np.float32),
                         np.empty(0, dtype=object), np.empty(0, dtype=np.int64),
                         provenance=f"synth(classes={classes}, n=0, seed={seed})")
    return RFDataset(
        np.stack(frames), np.array(mods, dtype=object), np.array(snrs, dtype=np.int64),
        provenance=f"synth(classes={classes}, frames_per_class={frames_per_class}, "
                   f"snr_db={snr_db}, width={width}, seed={seed})")
