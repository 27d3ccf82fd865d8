"""Frozen-CNN feature extraction for photo directories.

Images go through the network's canonical eval pipeline: decode to RGB,
resize the shorter side to 299 with bilinear interpolation, center-crop
to 299x299, scale pixels to [-1, 1], then take the 1536-wide global
average pool of the convolutional base.
"""

from __future__ import annotations

import os
import sys
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

INPUT_SIZE = 299
FEATURE_DIM = 1536


@dataclass(frozen=True)
class FeaturizeJob:
    image_dir: str
    id_map: tuple          # (filename, photo_id) rows in input order
    out_path: str
    batch_size: int = 16
    out_format: str = "elvf"
    expected_photo_ids: Optional[frozenset] = None   # from a reviews file


@dataclass
class JobReport:
    extracted: int = 0
    errors: list = field(default_factory=list)       # (filename or id, reason)


def load_id_map(path) -> tuple:
    """Read the filename<TAB>photo_id mapping, preserving order."""
    rows = []
    seen = set()
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            parts = line.rstrip("\n").split("\t")
            if len(parts) != 2:
                raise ValueError(f"{path} line {lineno}: expected filename<TAB>photo_id")
            filename, photo_id = parts
            if photo_id in seen:
                raise ValueError(f"{path} line {lineno}: duplicate photo_id {photo_id!r}")
            seen.add(photo_id)
            rows.append((filename, photo_id))
    return tuple(rows)


def photo_ids_from_reviews(path) -> frozenset:
    """Photo ids referenced by a reviews export (sixth tab field)."""
    ids = set()
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            parts = line.rstrip("\n").split("\t")
            if len(parts) != 6:
                continue
            ids.update(p for p in parts[5].split(",") if p)
    return frozenset(ids)


def _load_image(path) -> np.ndarray:
    from PIL import Image

    with Image.open(path) as img:
        img = img.convert("RGB")
        w, h = img.size
        scale = INPUT_SIZE / min(w, h)
        img = img.resize((max(INPUT_SIZE, round(w * scale)),
                          max(INPUT_SIZE, round(h * scale))), Image.BILINEAR)
        w, h = img.size
        left = (w - INPUT_SIZE) // 2
        top = (h - INPUT_SIZE) // 2
        img = img.crop((left, top, left + INPUT_SIZE, top + INPUT_SIZE))
        return np.asarray(img, dtype=np.float32)


class FeatureExtractor:
    """The convolutional base with global average pooling, kept frozen."""

    def __init__(self, model):
        self.model = model

    @classmethod
    def build(cls, weights: str = "imagenet", seed: int = 0):
        """weights: 'imagenet', 'random', or a path to a weights file."""
        os.environ.setdefault("TF_CPP_MIN_LOG_LEVEL", "3")
        import keras

        if weights == "random":
            keras.utils.set_random_seed(seed)
            weights_arg = None
        else:
            weights_arg = weights
        model = keras.applications.InceptionResNetV2(
            include_top=False, weights=weights_arg, pooling="avg",
        )
        model.trainable = False
        return cls(model)

    def extract_batch(self, pixel_batch: np.ndarray) -> np.ndarray:
        """(n, 299, 299, 3) float32 pixels in [0, 255] -> (n, 1536) features."""
        scaled = pixel_batch / 127.5 - 1.0
        out = self.model(scaled, training=False)
        return np.asarray(out, dtype=np.float32)


def run_job(extractor: FeatureExtractor, job: FeaturizeJob) -> JobReport:
    """Extract every mapped image and write the feature file.

    Undecodable or missing images are skipped with a warning and land in
    the report's error list; ids expected by the reviews file but absent
    from the output are reported the same way so the downstream loader
    can fail fast.
    """
    from .writer import write_feature_file

    report = JobReport()
    records = []
    batch_pixels: list = []
    batch_ids: list = []

    def flush():
        if not batch_ids:
            return
        features = extractor.extract_batch(np.stack(batch_pixels))
        records.extend(zip(batch_ids, features))
        batch_pixels.clear()
        batch_ids.clear()

    for filename, photo_id in job.id_map:
        path = os.path.join(job.image_dir, filename)
        try:
            pixels = _load_image(path)
        except (OSError, ValueError) as exc:
            print(f"warning: skipping {filename}: {exc}", file=sys.stderr)
            report.errors.append((filename, f"undecodable: {exc}"))
            continue
        batch_pixels.append(pixels)
        batch_ids.append(photo_id)
        if len(batch_ids) >= job.batch_size:
            flush()
    flush()

    report.extracted = write_feature_file(records, FEATURE_DIM, job.out_path,
                                          fmt=job.out_format)
    if job.expected_photo_ids is not None:
        produced = {photo_id for photo_id, _ in records}
        for missing in sorted(job.expected_photo_ids - produced):
            print(f"warning: no feature vector for photo {missing!r}", file=sys.stderr)
            report.errors.append((missing, "referenced by reviews but not extracted"))
    return report


def write_errors_file(report: JobReport, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for name, reason in report.errors:
            fh.write(f"{name}\t{reason}\n")
