"""Small deterministic corpus for demos and pipeline tests.

Three real classes of textured colour blobs, where a few minority images are
near-copies of majority images (what before-training filtering should drop),
plus synthetic pools for the minority classes that mix close variants of
real images with unrelated noise (what after-training filtering should drop).
"""

from __future__ import annotations

import os
from pathlib import Path

import numpy as np
from PIL import Image

SIZE = 48
REAL_COUNTS = {"major": 30, "minor_a": 12, "minor_b": 10}
SYNTHETIC_COUNTS = {"minor_a": 20, "minor_b": 18}
BASE_COLOURS = {
    "major": (200, 120, 90),
    "minor_a": (90, 160, 200),
    "minor_b": (120, 200, 110),
}
LOOKALIKES = {"minor_a": 2, "minor_b": 2}


def _blob(rng: np.random.Generator, colour) -> np.ndarray:
    yy, xx = np.mgrid[0:SIZE, 0:SIZE].astype(np.float64)
    cy, cx = rng.uniform(SIZE * 0.3, SIZE * 0.7, size=2)
    r = rng.uniform(SIZE * 0.15, SIZE * 0.35)
    mask = np.clip(1.2 - np.hypot(yy - cy, xx - cx) / r, 0, 1)[..., None]
    skin = np.array([225.0, 190.0, 170.0])
    img = skin * (1 - mask) + np.asarray(colour, dtype=np.float64) * mask
    img += rng.normal(0, 6, size=img.shape)
    return np.clip(img, 0, 255).astype(np.uint8)


def _jitter(rng: np.random.Generator, img: np.ndarray, sigma: float) -> np.ndarray:
    out = img.astype(np.float64) + rng.normal(0, sigma, size=img.shape)
    return np.clip(out, 0, 255).astype(np.uint8)


def _save(arr: np.ndarray, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(arr).save(path, format="PNG")


def make_toy_corpus(root: str | os.PathLike, seed: int = 7) -> Path:
    """Write ``root/real/<class>/*.png`` and ``root/synthetic/<class>/*.png``."""
    root = Path(root)
    rng = np.random.default_rng(seed)
    real: dict[str, list[np.ndarray]] = {}
    for name, n in REAL_COUNTS.items():
        real[name] = [_blob(rng, BASE_COLOURS[name]) for _ in range(n)]
    for name, k in LOOKALIKES.items():
        for i in range(k):
            real[name][i] = _jitter(rng, real["major"][i], 2.0)
    for name, imgs in real.items():
        for i, arr in enumerate(imgs):
            _save(arr, root / "real" / name / f"{name}_{i:03d}.png")

    for name, n in SYNTHETIC_COUNTS.items():
        for i in range(n):
            if i % 2 == 0:
                arr = _jitter(rng, real[name][i % len(real[name])], 8.0)
            else:
                arr = rng.integers(0, 256, size=(SIZE, SIZE, 3), dtype=np.uint8)
            _save(arr, root / "synthetic" / name / f"gen_{name}_{i:03d}.png")
    return root


CONFIG_TOML = """\
seed = 42
task = "multiclass"
side = 32

[dataset]
real_root = "real"
synthetic_root = "synthetic"

[records]
k_limit = 1
targets = ["minor_a", "minor_b"]

[filter]
method = "fagt"
alphas = [0.80]
rounding = "ceiling"

[plan]
total = 30
transformed = { minor_a = 6, minor_b = 8 }

[transform]
rotation_degrees = [-25.0, 25.0]
shift_fraction = [-0.1, 0.1]
zoom_fraction = [0.9, 1.1]

[split]
test_fraction = 0.2
group_field = "group_key"
"""


def write_toy_config(root: str | os.PathLike) -> Path:
    path = Path(root) / "pipeline.toml"
    path.write_text(CONFIG_TOML, encoding="utf-8")
    return path
