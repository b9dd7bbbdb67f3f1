"""Hybrid augmentation: per-class quotas and deterministic transform oversampling.

A class reaches its target total ``N`` from ``r`` real images, ``t``
geometric transforms of real images and ``s = N - r - t`` synthetic images.

Transform outputs are PNGs at the source image's resolution. Output ``i``
(0-based) uses source ``sources[i % n]`` (sources sorted by id) at cycle
``i // n``, and its parameters come from a SplitMix64 stream keyed by
``(seed, source_id, cycle)`` drawn in the order: rotation, x shift, y shift,
zoom, horizontal flip, vertical flip. Pixels exposed by the transform are
filled by edge replication.
"""

from __future__ import annotations

import csv
import io
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
from PIL import Image

from simfilter.dataset_io import (DatasetManifest, ImageRef, Origin, decode_image,
                                  sample_bilinear, to_uint8)
from simfilter.errors import DataError, PlanMismatchError
from simfilter.rng import SplitMix64, stream_key

COMPOSITION_HEADER = ["class", "real", "transformed", "synthetic", "total"]


@dataclass(frozen=True)
class AugmentationPlan:
    class_name: str
    total: int
    real: int
    transformed: int
    synthetic: int

    def __post_init__(self):
        if min(self.total, self.real, self.transformed, self.synthetic) < 0:
            raise ValueError(f"negative count in plan for {self.class_name!r}")
        if self.real + self.transformed + self.synthetic != self.total:
            raise ValueError(f"plan for {self.class_name!r} does not sum to its total")


def plan_class(total: int, real: int, transformed: int, class_name: str = "") -> AugmentationPlan:
    """Synthetic images still needed: ``total - (real + transformed)``."""
    if total < real + transformed:
        raise DataError(
            f"class {class_name!r} is over-full: {real} real + {transformed} transformed "
            f"exceeds the target total {total}")
    return AugmentationPlan(class_name, total, real, transformed, total - real - transformed)


@dataclass(frozen=True)
class TransformSpec:
    rotation_degrees: tuple[float, float] = (-25.0, 25.0)
    shift_fraction: tuple[float, float] = (-0.10, 0.10)
    zoom_fraction: tuple[float, float] = (0.9, 1.1)
    allow_hflip: bool = True
    allow_vflip: bool = True
    seed: int = 0

    def __post_init__(self):
        for name in ("rotation_degrees", "shift_fraction", "zoom_fraction"):
            lo, hi = (float(v) for v in getattr(self, name))
            if lo > hi:
                raise ValueError(f"{name}: lower bound {lo} exceeds upper bound {hi}")
            object.__setattr__(self, name, (lo, hi))
        if self.zoom_fraction[0] <= 0:
            raise ValueError("zoom must be positive")

    @classmethod
    def from_mapping(cls, doc: Mapping, seed: int | None = None) -> TransformSpec:
        kwargs = {k: doc[k] for k in ("rotation_degrees", "shift_fraction", "zoom_fraction",
                                      "allow_hflip", "allow_vflip", "seed") if k in doc}
        for k in ("rotation_degrees", "shift_fraction", "zoom_fraction"):
            if k in kwargs:
                kwargs[k] = tuple(kwargs[k])
        if seed is not None:
            kwargs["seed"] = seed
        return cls(**kwargs)


@dataclass(frozen=True)
class TransformParams:
    rotation: float
    shift_x: float
    shift_y: float
    zoom: float
    hflip: bool
    vflip: bool


def draw_params(spec: TransformSpec, source_id: str, cycle: int) -> TransformParams:
    rng = SplitMix64(stream_key(spec.seed, source_id, cycle))
    rotation = rng.uniform(*spec.rotation_degrees)
    shift_x = rng.uniform(*spec.shift_fraction)
    shift_y = rng.uniform(*spec.shift_fraction)
    zoom = rng.uniform(*spec.zoom_fraction)
    hflip = rng.coin()
    vflip = rng.coin()
    return TransformParams(rotation, shift_x, shift_y, zoom,
                           hflip and spec.allow_hflip, vflip and spec.allow_vflip)


def apply_transform(image: np.ndarray, params: TransformParams) -> np.ndarray:
    """Flip, zoom about the centre, rotate, then shift; same output size as input."""
    h, w = image.shape[:2]
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    yy, xx = np.meshgrid(np.arange(h, dtype=np.float64), np.arange(w, dtype=np.float64),
                         indexing="ij")
    # invert the forward map output = R(z * F(p - c)) + c + shift
    dx = xx - cx - params.shift_x * w
    dy = yy - cy - params.shift_y * h
    theta = math.radians(params.rotation)
    cos_t, sin_t = math.cos(theta), math.sin(theta)
    sx = (cos_t * dx + sin_t * dy) / params.zoom
    sy = (-sin_t * dx + cos_t * dy) / params.zoom
    if params.hflip:
        sx = -sx
    if params.vflip:
        sy = -sy
    return to_uint8(sample_bilinear(image, sy + cy, sx + cx))


def _png_bytes(arr: np.ndarray) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(np.ascontiguousarray(arr)).save(buf, format="PNG")
    return buf.getvalue()


def transformed_id(source_id: str, cycle: int) -> str:
    return f"{source_id}_aug{cycle:03d}"


def oversample_transform(
    images: Sequence[ImageRef],
    count: int,
    spec: TransformSpec,
    out_dir: str | os.PathLike,
    *,
    threads: int = 1,
) -> list[ImageRef]:
    """Write ``count`` transformed PNGs under ``out_dir/<class>/`` and return their refs.

    Outputs share the source's group key (or its id) so a group-aware split
    keeps them next to their source.
    """
    if count < 0:
        raise ValueError("count must be >= 0")
    if count == 0:
        return []
    if not images:
        raise DataError("no source images to oversample")
    sources = sorted(images, key=lambda r: r.id)
    out_dir = Path(out_dir)

    jobs = []
    for i in range(count):
        src = sources[i % len(sources)]
        cycle = i // len(sources)
        new_id = transformed_id(src.id, cycle)
        path = out_dir / src.class_name / f"{new_id}.png"
        jobs.append((src, cycle, new_id, path))

    def work(job) -> ImageRef:
        src, cycle, new_id, path = job
        arr = apply_transform(decode_image(src.path), draw_params(spec, src.id, cycle))
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(_png_bytes(arr))
        return ImageRef(new_id, src.class_name, str(path.resolve()), Origin.TRANSFORMED,
                        src.group_key or src.id)

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        return list(pool.map(work, jobs))


def _origin_counts(refs: Sequence[ImageRef]) -> dict[Origin, int]:
    counts = {o: 0 for o in Origin}
    for r in refs:
        counts[r.origin] += 1
    return counts


def compose_final(
    real: DatasetManifest,
    transformed: DatasetManifest | None,
    synthetic_kept: DatasetManifest | None,
    plans: Mapping[str, AugmentationPlan] | None = None,
    *,
    dataset_name: str = "final",
) -> DatasetManifest:
    """Merge real, transformed and kept synthetic images into one manifest.

    Every planned class must end up with exactly its planned (r, t, s) counts.
    """
    classes: dict[str, list[ImageRef]] = {}
    seen: dict[str, Origin] = {}
    for part, origin in ((real, Origin.REAL), (transformed, Origin.TRANSFORMED),
                         (synthetic_kept, Origin.SYNTHETIC)):
        if part is None:
            continue
        for ref in part.refs():
            if ref.origin is not origin:
                raise DataError(f"image {ref.id!r} has origin {ref.origin.value}, "
                                f"expected {origin.value}")
            if ref.id in seen:
                raise DataError(f"id collision: {ref.id!r} appears as {seen[ref.id].value} "
                                f"and {origin.value}")
            seen[ref.id] = origin
            classes.setdefault(ref.class_name, []).append(ref)

    for name, plan in (plans or {}).items():
        counts = _origin_counts(classes.get(name, []))
        got = (counts[Origin.REAL], counts[Origin.TRANSFORMED], counts[Origin.SYNTHETIC])
        want = (plan.real, plan.transformed, plan.synthetic)
        if got != want:
            raise PlanMismatchError(
                f"class {name!r}: composed (real, transformed, synthetic) = {got}, "
                f"plan requires {want} for total {plan.total}")
    return DatasetManifest(dataset_name, classes, real.side, created_from="compose")


@dataclass
class CompositionRow:
    class_name: str
    real: int
    transformed: int
    synthetic: int
    total: int = field(init=False)

    def __post_init__(self):
        self.total = self.real + self.transformed + self.synthetic

    def percentages(self) -> tuple[float, float, float]:
        t = self.total or 1
        return (100 * self.real / t, 100 * self.transformed / t, 100 * self.synthetic / t)


def composition(manifest: DatasetManifest) -> list[CompositionRow]:
    rows = []
    for name, refs in manifest.classes.items():
        c = _origin_counts(refs)
        rows.append(CompositionRow(name, c[Origin.REAL], c[Origin.TRANSFORMED], c[Origin.SYNTHETIC]))
    return rows


def composition_csv(rows: Sequence[CompositionRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(COMPOSITION_HEADER)
    for r in rows:
        writer.writerow([r.class_name, r.real, r.transformed, r.synthetic, r.total])
    return buf.getvalue()
