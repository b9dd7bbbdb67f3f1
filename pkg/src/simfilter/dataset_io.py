"""Image discovery, decoding, resampling and vectorisation, plus manifest I/O.

Resampling is bilinear with half-pixel centres: output pixel ``x`` samples
source coordinate ``(x + 0.5) * in_size / out_size - 0.5``, clamped to
``[0, in_size - 1]`` (edge replication), separably along rows then columns in
float64, and the result is rounded half-up to 8 bits.

Vectors are the R plane, then G, then B, each flattened row-major, divided
by 255 and stored as float32.
"""

from __future__ import annotations

import csv
import enum
import json
import logging
import os
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, NamedTuple, Sequence

import numpy as np
from PIL import Image

from simfilter.errors import DataError, ManifestError

log = logging.getLogger(__name__)

DEFAULT_SIDE = 64
IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg")

VECTOR_MAGIC = b"CSIF"
VECTOR_VERSION = 1
_VECTOR_HEADER = struct.Struct("<4sIII")


class Origin(str, enum.Enum):
    REAL = "real"
    TRANSFORMED = "transformed"
    SYNTHETIC = "synthetic"


class Layout(str, enum.Enum):
    CLASS_SUBDIRS = "class-subdirs"
    CSV_INDEX = "csv-index"


@dataclass(frozen=True)
class ImageRef:
    id: str
    class_name: str
    path: str
    origin: Origin = Origin.REAL
    group_key: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "origin", Origin(self.origin))

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "class_name": self.class_name,
            "path": self.path,
            "origin": self.origin.value,
            "group_key": self.group_key,
        }


@dataclass
class DatasetManifest:
    dataset_name: str
    classes: dict[str, list[ImageRef]]
    side: int = DEFAULT_SIDE
    created_from: str = ""

    def __post_init__(self):
        self.classes = {
            name: sorted(refs, key=lambda r: r.id)
            for name, refs in sorted(self.classes.items())
        }
        seen: set[str] = set()
        for name, refs in self.classes.items():
            for ref in refs:
                if ref.class_name != name:
                    raise ManifestError(
                        f"image {ref.id!r} listed under {name!r} but labelled {ref.class_name!r}")
                if ref.id in seen:
                    raise ManifestError(f"duplicate image id {ref.id!r}")
                seen.add(ref.id)

    @property
    def class_names(self) -> list[str]:
        return list(self.classes)

    def refs(self) -> list[ImageRef]:
        """All images sorted by id; this is also the row order of vector files."""
        return sorted((r for refs in self.classes.values() for r in refs), key=lambda r: r.id)

    def ids(self) -> list[str]:
        return [r.id for r in self.refs()]

    def __len__(self) -> int:
        return sum(len(v) for v in self.classes.values())

    def counts(self) -> dict[str, int]:
        return {name: len(refs) for name, refs in self.classes.items()}

    def get(self, image_id: str) -> ImageRef:
        for refs in self.classes.values():
            for ref in refs:
                if ref.id == image_id:
                    return ref
        raise KeyError(image_id)

    def subset(self, ids: Iterable[str], dataset_name: str | None = None) -> DatasetManifest:
        keep = set(ids)
        classes = {name: [r for r in refs if r.id in keep] for name, refs in self.classes.items()}
        return DatasetManifest(
            dataset_name=dataset_name or self.dataset_name,
            classes={k: v for k, v in classes.items() if v},
            side=self.side,
            created_from=self.created_from,
        )


class LoadFailure(NamedTuple):
    path: str
    reason: str


class LoadResult(NamedTuple):
    manifest: DatasetManifest
    failures: list[LoadFailure]


@dataclass(frozen=True)
class PixelVector:
    image_id: str
    side: int
    values: np.ndarray = field(repr=False)

    @property
    def dim(self) -> int:
        return 3 * self.side * self.side

    @property
    def is_zero(self) -> bool:
        """All-black image: unusable for cosine similarity."""
        return not np.any(self.values)


# ---------------------------------------------------------------------------
# decoding and resampling


def decode_image(path: str | os.PathLike) -> np.ndarray:
    """Decode to an ``H x W x 3`` uint8 array; grey is replicated, alpha dropped."""
    with Image.open(path) as img:
        img.load()
        if img.mode != "RGB":
            img = img.convert("RGB")
        return np.asarray(img, dtype=np.uint8).copy()


def _to_rgb_array(image: np.ndarray) -> np.ndarray:
    arr = np.asarray(image)
    if arr.ndim == 2:
        arr = np.repeat(arr[:, :, None], 3, axis=2)
    elif arr.ndim == 3 and arr.shape[2] == 1:
        arr = np.repeat(arr, 3, axis=2)
    elif arr.ndim == 3 and arr.shape[2] == 4:
        arr = arr[:, :, :3]
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise DataError(f"expected an RGB raster, got shape {arr.shape}")
    return arr


def _axis_taps(n_in: int, n_out: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    # ((o + 0.5) * n_in) / n_out - 0.5; the product is exact, so one rounding before the shift
    src = (np.arange(n_out, dtype=np.float64) + 0.5) * n_in / n_out - 0.5
    src = np.clip(src, 0.0, n_in - 1)
    i0 = np.floor(src).astype(np.intp)
    i1 = np.minimum(i0 + 1, n_in - 1)
    return i0, i1, src - i0


def sample_bilinear(image: np.ndarray, ys: np.ndarray, xs: np.ndarray) -> np.ndarray:
    """Sample ``image`` (H x W x C) at float coordinates with edge clamping."""
    h, w = image.shape[:2]
    ys = np.clip(ys, 0.0, h - 1)
    xs = np.clip(xs, 0.0, w - 1)
    y0 = np.floor(ys).astype(np.intp)
    x0 = np.floor(xs).astype(np.intp)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    wy = (ys - y0)[..., None]
    wx = (xs - x0)[..., None]
    img = image.astype(np.float64, copy=False)
    top = img[y0, x0] * (1.0 - wx) + img[y0, x1] * wx
    bottom = img[y1, x0] * (1.0 - wx) + img[y1, x1] * wx
    return top * (1.0 - wy) + bottom * wy


def to_uint8(values: np.ndarray) -> np.ndarray:
    """Round half-up and clip to [0, 255]."""
    return np.clip(np.floor(values + 0.5), 0, 255).astype(np.uint8)


def rescale(image: np.ndarray, side: int = DEFAULT_SIDE) -> np.ndarray:
    """Bilinearly resample an image to ``side x side x 3`` uint8."""
    if side < 1:
        raise ValueError(f"side must be >= 1, got {side}")
    arr = _to_rgb_array(image)
    h, w = arr.shape[:2]
    if h < 1 or w < 1:
        raise DataError("image has no pixels")
    if (h, w) == (side, side):
        return np.ascontiguousarray(arr, dtype=np.uint8)
    y0, y1, wy = _axis_taps(h, side)
    x0, x1, wx = _axis_taps(w, side)
    img = arr.astype(np.float64)
    # horizontal then vertical, the same order as sample_bilinear
    cols = img[:, x0] * (1.0 - wx)[None, :, None] + img[:, x1] * wx[None, :, None]
    out = cols[y0] * (1.0 - wy)[:, None, None] + cols[y1] * wy[:, None, None]
    return to_uint8(out)


def vectorize(image: np.ndarray, image_id: str = "") -> PixelVector:
    """Flatten a square 8-bit RGB raster into a normalised R|G|B vector."""
    arr = np.asarray(image)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise DataError(f"expected 3 channels, got shape {arr.shape}")
    h, w = arr.shape[:2]
    if h != w:
        raise DataError(f"expected a square raster, got {h}x{w}")
    planes = np.transpose(arr, (2, 0, 1)).reshape(-1)
    values = (planes.astype(np.float64) / 255.0).astype(np.float32)
    return PixelVector(image_id=image_id, side=h, values=values)


def load_vector(path: str | os.PathLike, side: int = DEFAULT_SIDE, image_id: str = "") -> PixelVector:
    return vectorize(rescale(decode_image(path), side), image_id)


# ---------------------------------------------------------------------------
# dataset discovery


def _check_decodable(path: str) -> str | None:
    try:
        with Image.open(path) as img:
            img.load()
    except Exception as exc:  # noqa: BLE001 - PIL raises a zoo of types
        return f"{type(exc).__name__}: {exc}"
    return None


def _scan_class_subdirs(root: Path, origin: Origin) -> tuple[list[ImageRef], list[LoadFailure], list[str]]:
    refs: list[ImageRef] = []
    failures: list[LoadFailure] = []
    class_dirs = sorted(p for p in root.iterdir() if p.is_dir() and not p.name.startswith("."))
    if not class_dirs:
        raise DataError(f"{root} contains no class subdirectories")
    for class_dir in class_dirs:
        for f in sorted(class_dir.iterdir()):
            if f.name.startswith(".") or not f.is_file():
                continue
            if f.suffix.lower() not in IMAGE_SUFFIXES:
                failures.append(LoadFailure(str(f), "unsupported file type"))
                continue
            # without metadata every image is its own group
            refs.append(ImageRef(f.stem, class_dir.name, str(f.resolve()), origin, f.stem))
    return refs, failures, [d.name for d in class_dirs]


def _scan_csv_index(root: Path, index_file: str, origin: Origin) -> tuple[list[ImageRef], list[LoadFailure], list[str]]:
    index = root / index_file
    if not index.is_file():
        raise DataError(f"csv index {index} not found")
    refs: list[ImageRef] = []
    with open(index, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = {"image_id", "class", "path"} - set(reader.fieldnames or ())
        if missing:
            raise DataError(f"{index}: missing columns {sorted(missing)}")
        for row in reader:
            path = Path(row["path"])
            if not path.is_absolute():
                path = root / path
            group = (row.get("group_key") or "").strip() or None
            refs.append(ImageRef(row["image_id"], row["class"], str(path.resolve()), origin, group))
    return refs, [], sorted({r.class_name for r in refs})


def load_dataset(
    root: str | os.PathLike,
    layout: Layout | str = Layout.CLASS_SUBDIRS,
    *,
    origin: Origin | str = Origin.REAL,
    dataset_name: str | None = None,
    side: int = DEFAULT_SIDE,
    index_file: str = "index.csv",
    threads: int = 1,
) -> LoadResult:
    """Enumerate the decodable images under ``root``.

    Undecodable or unsupported files are returned in ``failures`` rather than
    dropped silently. Raises :class:`DataError` for a missing root, a class
    left without images, or a duplicate image id.
    """
    root = Path(root)
    if not root.is_dir():
        raise DataError(f"dataset root {root} does not exist")
    layout = Layout(layout)
    origin = Origin(origin)
    if layout is Layout.CLASS_SUBDIRS:
        candidates, failures, class_names = _scan_class_subdirs(root, origin)
    else:
        candidates, failures, class_names = _scan_csv_index(root, index_file, origin)

    seen: dict[str, str] = {}
    for ref in candidates:
        if ref.id in seen:
            raise DataError(f"duplicate image id {ref.id!r} ({seen[ref.id]} and {ref.path})")
        seen[ref.id] = ref.path

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        problems = list(pool.map(lambda r: _check_decodable(r.path), candidates))

    classes: dict[str, list[ImageRef]] = {name: [] for name in class_names}
    for ref, problem in zip(candidates, problems):
        if problem is None:
            classes[ref.class_name].append(ref)
        else:
            failures.append(LoadFailure(ref.path, problem))
    for name, refs in classes.items():
        if not refs:
            raise DataError(f"class {name!r} has no decodable images")
    for failure in failures:
        log.warning("skipping %s: %s", failure.path, failure.reason)

    manifest = DatasetManifest(
        dataset_name=dataset_name or root.name,
        classes=classes,
        side=side,
        created_from=f"{layout.value}:{root.name}",
    )
    return LoadResult(manifest, sorted(failures))


# ---------------------------------------------------------------------------
# manifest files


def _portable_path(path: str, base: Path, root: Path) -> str:
    p = Path(path).resolve()
    if not p.is_relative_to(root):
        return str(path)
    return Path(os.path.relpath(p, base)).as_posix()


def manifest_to_json(manifest: DatasetManifest, base: Path | None = None,
                     root: Path | None = None) -> str:
    def encode(ref: ImageRef) -> dict:
        d = ref.to_dict()
        if base is not None:
            d["path"] = _portable_path(ref.path, base, root or base)
        return d

    doc = {
        "dataset_name": manifest.dataset_name,
        "side": manifest.side,
        "created_from": manifest.created_from,
        "classes": {name: [encode(r) for r in refs] for name, refs in manifest.classes.items()},
    }
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def write_manifest(manifest: DatasetManifest, path: str | os.PathLike, *, check_paths: bool = True,
                   root: str | os.PathLike | None = None) -> None:
    """Write ``manifest`` as sorted-key JSON.

    Paths under ``root`` (default: the manifest's own directory) are stored
    relative to the manifest file so output trees can be compared or moved
    as a unit.
    """
    path = Path(path)
    if check_paths:
        missing = [r.path for r in manifest.refs() if not os.path.exists(r.path)]
        if missing:
            raise ManifestError(f"{len(missing)} image path(s) do not exist, e.g. {missing[0]}")
    path.parent.mkdir(parents=True, exist_ok=True)
    base = path.parent.resolve()
    text = manifest_to_json(manifest, base, Path(root).resolve() if root is not None else base)
    path.write_text(text, encoding="utf-8")


def read_manifest(path: str | os.PathLike) -> DatasetManifest:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
        base = path.parent.resolve()
        classes: dict[str, list[ImageRef]] = {}
        seen: set[str] = set()
        for name, entries in doc["classes"].items():
            refs = []
            for e in entries:
                if e["id"] in seen:
                    raise ManifestError(f"{path}: duplicate image id {e['id']!r}")
                seen.add(e["id"])
                p = e["path"]
                if not os.path.isabs(p):
                    p = os.path.normpath(base / p)
                refs.append(ImageRef(e["id"], e["class_name"], p, Origin(e["origin"]), e.get("group_key")))
            classes[name] = refs
        return DatasetManifest(
            dataset_name=doc["dataset_name"],
            classes=classes,
            side=int(doc["side"]),
            created_from=doc.get("created_from", ""),
        )
    except ManifestError:
        raise
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise ManifestError(f"malformed manifest {path}: {exc}") from exc


# ---------------------------------------------------------------------------
# vector store


@dataclass
class VectorStore:
    """Vectors for a set of images, one float32 row per id."""

    ids: list[str]
    side: int
    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.matrix = np.ascontiguousarray(self.matrix, dtype=np.float32)
        if self.matrix.shape != (len(self.ids), 3 * self.side * self.side):
            raise DataError(
                f"vector matrix shape {self.matrix.shape} does not match "
                f"{len(self.ids)} ids at side {self.side}")
        self._index = {image_id: i for i, image_id in enumerate(self.ids)}
        if len(self._index) != len(self.ids):
            raise DataError("duplicate ids in vector store")

    def __contains__(self, image_id: str) -> bool:
        return image_id in self._index

    def __len__(self) -> int:
        return len(self.ids)

    def rows(self, ids: Sequence[str]) -> np.ndarray:
        try:
            idx = [self._index[i] for i in ids]
        except KeyError as exc:
            raise DataError(f"no vector for image {exc.args[0]!r}") from None
        return self.matrix[idx]

    def vector(self, image_id: str) -> PixelVector:
        return PixelVector(image_id, self.side, self.rows([image_id])[0])

    @classmethod
    def merge(cls, *stores: VectorStore) -> VectorStore:
        if len({s.side for s in stores}) > 1:
            raise DataError("cannot merge vector stores of different sides")
        ids = [i for s in stores for i in s.ids]
        return cls(ids, stores[0].side, np.concatenate([s.matrix for s in stores]))


def vectorize_manifest(manifest: DatasetManifest, side: int | None = None, threads: int = 1) -> VectorStore:
    """Vectorise every image; rows follow sorted-id order regardless of ``threads``."""
    side = manifest.side if side is None else side
    refs = manifest.refs()

    def work(ref: ImageRef) -> np.ndarray:
        return load_vector(ref.path, side, ref.id).values

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        rows = list(pool.map(work, refs))
    matrix = np.stack(rows) if rows else np.zeros((0, 3 * side * side), np.float32)
    return VectorStore([r.id for r in refs], side, matrix)


def write_vectors(store: VectorStore, path: str | os.PathLike) -> None:
    """Write the flat vector file: 16-byte header then little-endian float32 rows."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(_VECTOR_HEADER.pack(VECTOR_MAGIC, VECTOR_VERSION, store.side, len(store)))
        fh.write(store.matrix.astype("<f4", copy=False).tobytes())


def read_vectors(path: str | os.PathLike, ids: Sequence[str] | None = None) -> VectorStore:
    """Read a vector file; ``ids`` label its rows (manifest sorted-id order)."""
    data = Path(path).read_bytes()
    if len(data) < _VECTOR_HEADER.size:
        raise DataError(f"{path}: truncated vector file")
    magic, version, side, count = _VECTOR_HEADER.unpack_from(data)
    if magic != VECTOR_MAGIC:
        raise DataError(f"{path}: bad magic {magic!r}")
    if version != VECTOR_VERSION:
        raise DataError(f"{path}: unsupported vector file version {version}")
    dim = 3 * side * side
    expected = _VECTOR_HEADER.size + 4 * count * dim
    if len(data) != expected:
        raise DataError(f"{path}: expected {expected} bytes, found {len(data)}")
    matrix = np.frombuffer(data, dtype="<f4", offset=_VECTOR_HEADER.size).reshape(count, dim)
    if ids is None:
        ids = [str(i) for i in range(count)]
    if len(ids) != count:
        raise DataError(f"{path}: holds {count} vectors but {len(ids)} ids were given")
    return VectorStore(list(ids), side, matrix.astype(np.float32))
