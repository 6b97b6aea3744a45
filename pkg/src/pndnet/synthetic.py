"""Generated blob corpora: separable-by-construction classification data.

Each image is gray noise with one filled disk whose color identifies the
class; the disk center is confined to a recorded quadrant, which makes the
corpus usable both for end-to-end training checks and for heatmap
localization checks.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .data import Dataset, SplitPlan, load_dataset
from .errors import ArgumentError
from .imageio import write_ppm
from .tensor import Rng

CLASS_COLORS = np.array([
    (210, 70, 70),
    (70, 210, 70),
    (70, 70, 210),
    (210, 210, 70),
    (210, 70, 210),
    (70, 210, 210),
], dtype=np.float64)

QUADRANTS = ("tl", "tr", "bl", "br")


def make_blob_image(class_index: int, image_size: int, rng: Rng,
                    quadrant: str | None = None) -> tuple[np.ndarray, str]:
    """One uint8 [S, S, 3] image; returns it with the quadrant actually used."""
    if class_index >= len(CLASS_COLORS):
        raise ArgumentError(f"at most {len(CLASS_COLORS)} blob classes supported")
    if quadrant is None:
        quadrant = QUADRANTS[int(rng.integers(0, len(QUADRANTS)))]
    if quadrant not in QUADRANTS:
        raise ArgumentError(f"quadrant must be one of {QUADRANTS}, got {quadrant!r}")
    s = image_size
    img = 128.0 + rng.normal(0.0, 8.0, (s, s, 3))
    radius = s * float(rng.uniform(0.14, 0.20))
    # keep the disk well inside its quadrant so localization is unambiguous
    margin = radius + 1
    half = s / 2.0
    lo, hi = margin, half - margin
    if hi <= lo:
        raise ArgumentError(f"image size {s} too small for quadrant blobs")
    cy = float(rng.uniform(lo, hi))
    cx = float(rng.uniform(lo, hi))
    if quadrant in ("bl", "br"):
        cy += half
    if quadrant in ("tr", "br"):
        cx += half
    ys, xs = np.meshgrid(np.arange(s), np.arange(s), indexing="ij")
    mask = (ys - cy) ** 2 + (xs - cx) ** 2 <= radius ** 2
    img[mask] = CLASS_COLORS[class_index] + rng.normal(0.0, 4.0, (int(mask.sum()), 3))
    return np.clip(img, 0, 255).astype(np.uint8), quadrant


def make_blob_corpus(root, n_train: int = 64, n_test: int = 32, n_classes: int = 4,
                     image_size: int = 64, seed: int = 0) -> dict[str, str]:
    """Write a directory-per-class PPM corpus under ``root``.

    Train/test membership is encoded in the filename prefix so a SplitPlan
    can be rebuilt deterministically (see ``blob_split_plan``). Returns the
    per-image quadrant map, also written to ``root/quadrants.json``.
    """
    if n_train % n_classes or n_test % n_classes:
        raise ArgumentError("n_train and n_test must be divisible by n_classes")
    root = Path(root)
    rng = Rng(seed)
    quadrants: dict[str, str] = {}
    per_class_train = n_train // n_classes
    per_class_test = n_test // n_classes
    for c in range(n_classes):
        class_dir = root / f"class{c}"
        class_dir.mkdir(parents=True, exist_ok=True)
        for prefix, count in (("train", per_class_train), ("test", per_class_test)):
            for i in range(count):
                img, quadrant = make_blob_image(c, image_size, rng)
                name = f"{prefix}_{i:03d}.ppm"
                write_ppm(class_dir / name, img)
                quadrants[f"class{c}/{name}"] = quadrant
    (root / "quadrants.json").write_text(json.dumps(quadrants, sort_keys=True), encoding="utf-8")
    return quadrants


def blob_split_plan(dataset: Dataset, seed: int = 0) -> SplitPlan:
    """SplitPlan from the train_/test_ filename prefixes of a blob corpus."""
    train = [i for i, (path, _) in enumerate(dataset.samples) if path.name.startswith("train_")]
    test = [i for i, (path, _) in enumerate(dataset.samples) if path.name.startswith("test_")]
    if not train or not test:
        raise ArgumentError("dataset does not look like a generated blob corpus")
    return SplitPlan(train=train, test=test, seed=seed)


def load_blob_corpus(root) -> tuple[Dataset, SplitPlan, dict[str, str]]:
    dataset = load_dataset(root)
    quadrants = json.loads((Path(root) / "quadrants.json").read_text(encoding="utf-8"))
    return dataset, blob_split_plan(dataset), quadrants
