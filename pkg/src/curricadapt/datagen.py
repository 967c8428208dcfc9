"""Deterministic two-domain synthetic datasets with controllable shift.

The generator is a 64-bit linear congruential generator (Knuth's MMIX
constants) so that any implementation, in any language, reproduces the
exact same datasets from (preset, spec, seed):

    state <- (6364136223846793005 * state + 1442695040888963407) mod 2^64
    uniform = (state >> 11) / 2^53                     # in [0, 1)
    normals via Box-Muller on pairs of uniforms

The target domain is a fresh draw from the source distribution pushed
through a rotation plus translation, which gives a tunable covariate
shift with known ground-truth labels. Target labels are written only to
the evaluation file, never to the training input.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

_LCG_MULT = 6364136223846793005
_LCG_INC = 1442695040888963407
_MASK64 = (1 << 64) - 1


class PortableRng:
    """Minimal LCG + Box-Muller, identical across platforms and languages."""

    def __init__(self, seed: int):
        self.state = (int(seed) ^ 0x9E3779B97F4A7C15) & _MASK64
        self._spare: float | None = None
        self._step()  # decorrelate small seeds

    def _step(self) -> int:
        self.state = (_LCG_MULT * self.state + _LCG_INC) & _MASK64
        return self.state

    def uniform(self) -> float:
        return (self._step() >> 11) / float(1 << 53)

    def normal(self) -> float:
        if self._spare is not None:
            z, self._spare = self._spare, None
            return z
        u1 = 1.0 - self.uniform()  # (0, 1], keeps log finite
        u2 = self.uniform()
        r = math.sqrt(-2.0 * math.log(u1))
        self._spare = r * math.sin(2.0 * math.pi * u2)
        return r * math.cos(2.0 * math.pi * u2)

    def normals(self, n: int) -> np.ndarray:
        return np.array([self.normal() for _ in range(n)])

    def shuffle(self, items: list) -> None:
        # Fisher-Yates on the LCG stream
        for i in range(len(items) - 1, 0, -1):
            j = self._step() % (i + 1)
            items[i], items[j] = items[j], items[i]


@dataclass
class DatasetSpec:
    preset: str = "blobs"
    class_count: int = 4
    n_source: int = 800
    n_target: int = 800
    dim: int = 2
    rotation_deg: float = 0.0
    translation: list = field(default_factory=list)
    noise_sigma: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.preset not in ("blobs", "moons"):
            raise ValueError(f"unknown preset {self.preset!r}")
        if self.preset == "moons":
            if self.class_count != 2:
                raise ValueError("moons preset requires exactly 2 classes")
            if self.dim != 2:
                raise ValueError("moons preset requires dim = 2")
        else:
            if self.class_count < 2:
                raise ValueError("blobs preset requires at least 2 classes")
            if self.dim < 2:
                raise ValueError("blobs preset requires dim >= 2")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        for n, what in ((self.n_source, "n_source"), (self.n_target, "n_target")):
            if n < self.class_count:
                raise ValueError(f"{what} must be >= class count")
            if n % self.class_count != 0:
                raise ValueError(f"{what} must be divisible by the class count")
        if self.translation and len(self.translation) != self.dim:
            raise ValueError("translation length must equal dim")

    def to_dict(self) -> dict:
        return {
            "preset": self.preset,
            "class_count": self.class_count,
            "n_source": self.n_source,
            "n_target": self.n_target,
            "dim": self.dim,
            "rotation_deg": self.rotation_deg,
            "translation": list(self.translation),
            "noise_sigma": self.noise_sigma,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "DatasetSpec":
        return cls(**obj)


@dataclass
class DatasetPair:
    """Source (labeled) and target (labels held out for evaluation only)."""

    source_x: np.ndarray
    source_y: np.ndarray
    target_x: np.ndarray
    target_y: np.ndarray  # hidden truth; must never feed a loss
    class_count: int
    spec: DatasetSpec


def _rotation_matrix(deg: float) -> np.ndarray:
    a = math.radians(deg)
    return np.array([[math.cos(a), -math.sin(a)], [math.sin(a), math.cos(a)]])


def _apply_shift(x: np.ndarray, spec: DatasetSpec, center: np.ndarray | None = None) -> np.ndarray:
    """Rotate in the first-two-dims plane (about ``center``), then translate."""
    out = x.copy()
    rot = _rotation_matrix(spec.rotation_deg)
    c = np.zeros(2) if center is None else center
    out[:, :2] = (out[:, :2] - c) @ rot.T + c
    if spec.translation:
        out += np.asarray(spec.translation, dtype=np.float64)
    return out


def _blob_draw(spec: DatasetSpec, n: int, rng: PortableRng) -> tuple[np.ndarray, np.ndarray]:
    per = n // spec.class_count
    means = np.zeros((spec.class_count, spec.dim))
    for c in range(spec.class_count):
        ang = 2.0 * math.pi * c / spec.class_count
        means[c, 0] = 4.0 * math.cos(ang)
        means[c, 1] = 4.0 * math.sin(ang)
    xs, ys = [], []
    for c in range(spec.class_count):
        for _ in range(per):
            xs.append(means[c] + spec.noise_sigma * rng.normals(spec.dim))
            ys.append(c)
    return np.array(xs), np.array(ys, dtype=int)


def gen_blobs(spec: DatasetSpec) -> DatasetPair:
    """Isotropic Gaussian classes with means on a circle of radius 4.

    The target set is a fresh draw from the source distribution pushed
    through the spec's rotation (about the origin) and translation.
    """
    if spec.preset != "blobs":
        raise ValueError("spec preset is not 'blobs'")
    rng = PortableRng(spec.seed)
    src_x, src_y = _blob_draw(spec, spec.n_source, rng)
    tgt_x, tgt_y = _blob_draw(spec, spec.n_target, rng)
    tgt_x = _apply_shift(tgt_x, spec)
    order = list(range(spec.n_target))
    rng.shuffle(order)
    return DatasetPair(src_x, src_y, tgt_x[order], tgt_y[order], spec.class_count, spec)


def _moon_draw(spec: DatasetSpec, n: int, rng: PortableRng) -> tuple[np.ndarray, np.ndarray]:
    per = n // 2
    t = np.linspace(0.0, math.pi, per)
    outer = np.stack([np.cos(t), np.sin(t)], axis=1)
    inner = np.stack([1.0 - np.cos(t), 1.0 - np.sin(t) - 0.5], axis=1)
    x = np.vstack([outer, inner])
    if spec.noise_sigma > 0:
        x = x + spec.noise_sigma * rng.normals(2 * per * 2).reshape(-1, 2)
    y = np.concatenate([np.zeros(per, dtype=int), np.ones(per, dtype=int)])
    return x, y


def gen_moons(spec: DatasetSpec) -> DatasetPair:
    """Two interleaved half-circles; the target copy is rotated about the
    empirical centroid of its own pre-rotation draw."""
    if spec.preset != "moons":
        raise ValueError("spec preset is not 'moons'")
    rng = PortableRng(spec.seed)
    src_x, src_y = _moon_draw(spec, spec.n_source, rng)
    tgt_x, tgt_y = _moon_draw(spec, spec.n_target, rng)
    tgt_x = _apply_shift(tgt_x, spec, center=tgt_x[:, :2].mean(axis=0))
    order = list(range(spec.n_target))
    rng.shuffle(order)
    return DatasetPair(src_x, src_y, tgt_x[order], tgt_y[order], spec.class_count, spec)


def generate(spec: DatasetSpec) -> DatasetPair:
    return gen_blobs(spec) if spec.preset == "blobs" else gen_moons(spec)


# ---------------------------------------------------------------------------
# CSV / JSON files
# ---------------------------------------------------------------------------

def write_features_csv(path, ids, features, labels=None) -> None:
    features = np.asarray(features)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        cols = ["id"] + (["label"] if labels is not None else [])
        w.writerow(cols + [f"f{i}" for i in range(features.shape[1])])
        for i, sid in enumerate(ids):
            row = [sid] + ([int(labels[i])] if labels is not None else [])
            w.writerow(row + [repr(float(v)) for v in features[i]])


def read_features_csv(path, require_label: bool):
    """Parse an `id[,label],f0..` CSV; malformed rows report their line number."""
    ids, labels, rows = [], [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ValueError(f"{path}: empty file")
        has_label = len(header) > 1 and header[1] == "label"
        if require_label and not has_label:
            raise ValueError(f"{path}: expected a 'label' column")
        width = len(header) - 1 - (1 if has_label else 0)
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ValueError(f"{path}: line {lineno}: expected {len(header)} fields, got {len(row)}")
            try:
                ids.append(row[0])
                if has_label:
                    labels.append(int(row[1]))
                rows.append([float(v) for v in row[1 + (1 if has_label else 0):]])
            except ValueError as exc:
                raise ValueError(f"{path}: line {lineno}: {exc}") from None
    feats = np.array(rows, dtype=np.float64).reshape(len(rows), width)
    return ids, (np.array(labels, dtype=int) if has_label else None), feats


def write_dataset(pair: DatasetPair, out_dir) -> None:
    """source.csv, target.csv (no labels), target_eval.csv (labels), spec.json."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    src_ids = [f"s{i}" for i in range(pair.source_x.shape[0])]
    tgt_ids = [f"t{i}" for i in range(pair.target_x.shape[0])]
    write_features_csv(out / "source.csv", src_ids, pair.source_x, pair.source_y)
    write_features_csv(out / "target.csv", tgt_ids, pair.target_x)
    write_features_csv(out / "target_eval.csv", tgt_ids, pair.target_x, pair.target_y)
    with open(out / "spec.json", "w") as fh:
        json.dump(pair.spec.to_dict(), fh, indent=2)
        fh.write("\n")
