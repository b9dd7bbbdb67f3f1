"""Cosine similarity scoring and sorted similarity records.

For every target image the full row of scores against all secondary images
is computed; only the ``k_limit`` best are kept in its record. Records are
ordered by ascending best score (``i_max``), so the most similar targets sit
at the end.

Tie-breaking is fixed for byte-stable output: entries by (score desc,
secondary class asc, secondary id asc), records by (i_max asc, target id asc).
"""

from __future__ import annotations

import csv
import io
import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from simfilter import kernels
from simfilter.dataset_io import DatasetManifest, Origin, PixelVector, VectorStore
from simfilter.errors import DataError, ZeroNormError

RECORD_CSV_HEADER = ["target_id", "target_class", "rank", "secondary_id", "secondary_class", "score"]


def _as_matrix(vectors) -> np.ndarray:
    if isinstance(vectors, PixelVector):
        return vectors.values[None, :]
    if isinstance(vectors, np.ndarray):
        return vectors[None, :] if vectors.ndim == 1 else vectors
    vectors = list(vectors)
    if vectors and isinstance(vectors[0], PixelVector):
        return np.stack([v.values for v in vectors])
    return np.asarray(vectors)


def _scores_from_dots(dots: np.ndarray, sq_t: np.ndarray, sq_s: np.ndarray) -> np.ndarray:
    # sqrt(n*n) == n exactly, so a vector scored against itself gives 1.0
    scores = dots / np.sqrt(np.multiply.outer(sq_t, sq_s))
    return np.clip(scores, -1.0, 1.0, out=scores)


def pairwise_scores(targets, secondaries, threads: int | None = None) -> np.ndarray:
    """Cosine similarity of every target row against every secondary row.

    Dot products are accumulated in float64 by the blocked kernel in
    :mod:`simfilter.kernels`; each result is then scaled by the inverse norms.
    """
    a = _as_matrix(targets)
    b = _as_matrix(secondaries)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[1]:
        raise DataError(f"dimension mismatch: {a.shape} vs {b.shape}")
    sq_a = kernels.squared_norms(a)
    sq_b = kernels.squared_norms(b)
    if not (np.all(sq_a > 0) and np.all(sq_b > 0)):
        raise DataError("zero-norm vector: cosine similarity is undefined")
    threads = kernels.get_threads() if threads is None else threads
    return _scores_from_dots(kernels.dot_matrix(a, b, threads), sq_a, sq_b)


def cosine_similarity(u, v) -> float:
    """``(u . v) / (|u| |v|)`` clamped to [-1, 1]."""
    a = _as_matrix(u)
    b = _as_matrix(v)
    if a.shape != b.shape or a.shape[0] != 1:
        raise DataError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return float(pairwise_scores(a, b)[0, 0])


def cosine_distance(u, v) -> float:
    return 1.0 - cosine_similarity(u, v)


def similarity_score(u, v) -> float:
    """Similarity used for filtering: larger means more alike (1.0 for identical)."""
    return cosine_similarity(u, v)


# ---------------------------------------------------------------------------
# class sets and records


@dataclass(frozen=True)
class ClassMembers:
    name: str
    ids: tuple[str, ...]
    origin: Origin = Origin.REAL

    def __post_init__(self):
        object.__setattr__(self, "ids", tuple(self.ids))
        object.__setattr__(self, "origin", Origin(self.origin))
        if not self.ids:
            raise DataError(f"class {self.name!r} has no images")


@dataclass(frozen=True)
class ClassSet:
    """A target class scored against one or more secondary classes."""

    target: ClassMembers
    secondaries: tuple[ClassMembers, ...]

    def __post_init__(self):
        object.__setattr__(self, "secondaries", tuple(self.secondaries))
        if not self.secondaries:
            raise DataError("at least one secondary class is required")
        key = (self.target.name, self.target.origin)
        if key in {(s.name, s.origin) for s in self.secondaries}:
            raise DataError(f"target class {self.target.name!r} is also a secondary class")

    @classmethod
    def from_manifest(
        cls,
        manifest: DatasetManifest,
        target: str,
        secondaries: Sequence[str] | None = None,
    ) -> ClassSet:
        """Target ``target`` against ``secondaries`` (default: every other class)."""
        if target not in manifest.classes:
            raise DataError(f"unknown class {target!r}")
        if secondaries is None:
            secondaries = [c for c in manifest.classes if c != target]
        members = []
        for name in secondaries:
            if name not in manifest.classes:
                raise DataError(f"unknown class {name!r}")
            refs = manifest.classes[name]
            members.append(ClassMembers(name, [r.id for r in refs], refs[0].origin))
        refs = manifest.classes[target]
        return cls(ClassMembers(target, [r.id for r in refs], refs[0].origin), members)


@dataclass(frozen=True)
class SimilarityEntry:
    secondary_id: str
    secondary_class: str
    score: float


@dataclass(frozen=True)
class Record:
    target_id: str
    entries: tuple[SimilarityEntry, ...]

    @property
    def i_max(self) -> float:
        return self.entries[0].score


@dataclass
class RecordSet:
    target_class: str
    secondary_classes: list[str]
    records: list[Record] = field(default_factory=list)
    k_limit: int = 1

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def target_ids(self) -> list[str]:
        return [r.target_id for r in self.records]

    def i_max(self) -> np.ndarray:
        return np.array([r.i_max for r in self.records], dtype=np.float64)

    def subset(self, ids: Iterable[str]) -> RecordSet:
        keep = set(ids)
        return RecordSet(self.target_class, list(self.secondary_classes),
                         [r for r in self.records if r.target_id in keep], self.k_limit)

    # -- export ------------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "target_class": self.target_class,
            "secondary_classes": list(self.secondary_classes),
            "k_limit": self.k_limit,
            "records": [
                {
                    "target_id": r.target_id,
                    "i_max": r.i_max,
                    "entries": [
                        {"secondary_id": e.secondary_id, "secondary_class": e.secondary_class,
                         "score": e.score}
                        for e in r.entries
                    ],
                }
                for r in self.records
            ],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> RecordSet:
        records = [
            Record(r["target_id"], tuple(
                SimilarityEntry(e["secondary_id"], e["secondary_class"], float(e["score"]))
                for e in r["entries"]))
            for r in doc["records"]
        ]
        return cls(doc["target_class"], list(doc["secondary_classes"]), records, int(doc["k_limit"]))

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(RECORD_CSV_HEADER)
        for r in self.records:
            for rank, e in enumerate(r.entries, start=1):
                writer.writerow([r.target_id, self.target_class, rank, e.secondary_id,
                                 e.secondary_class, format(e.score, ".17g")])
        return buf.getvalue()


def write_records(records: RecordSet, path: str | os.PathLike) -> None:
    """Write ``<path>`` as JSON and a sibling ``.csv`` with the flat table."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(records.to_dict(), sort_keys=True, indent=1) + "\n", encoding="utf-8")
    path.with_suffix(".csv").write_text(records.to_csv(), encoding="utf-8")


def read_records(path: str | os.PathLike) -> RecordSet:
    try:
        return RecordSet.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise DataError(f"malformed record file {path}: {exc}") from exc


def _top_k(row: np.ndarray, k: int) -> np.ndarray:
    """Indices of the ``k`` largest values, by value desc then index asc."""
    n = row.shape[0]
    if k >= n:
        return np.argsort(-row, kind="stable")
    kth = np.partition(row, n - k)[n - k]
    above = np.flatnonzero(row > kth)
    ties = np.flatnonzero(row == kth)[: k - above.size]
    idx = np.sort(np.concatenate([above, ties]))
    return idx[np.argsort(-row[idx], kind="stable")]


def compute_records(
    class_set: ClassSet,
    vectors: VectorStore,
    k_limit: int = 1,
    *,
    threads: int | None = None,
    block_rows: int = 256,
) -> RecordSet:
    """Score each target against all secondary images and build the sorted records.

    Only the ``k_limit`` highest-scoring secondaries are stored per target, but
    every target is still compared against every secondary image.
    """
    if k_limit < 1:
        raise ValueError(f"k_limit must be >= 1, got {k_limit}")
    target_ids = list(class_set.target.ids)
    pairs = sorted((s.name, i) for s in class_set.secondaries for i in s.ids)
    sec_classes = [c for c, _ in pairs]
    sec_ids = [i for _, i in pairs]

    tmat = vectors.rows(target_ids)
    smat = vectors.rows(sec_ids)
    sq_t = kernels.squared_norms(tmat)
    sq_s = kernels.squared_norms(smat)
    bad = [target_ids[i] for i in np.flatnonzero(sq_t <= 0)]
    bad += [sec_ids[i] for i in np.flatnonzero(sq_s <= 0)]
    if bad:
        raise ZeroNormError(sorted(set(bad)))

    threads = kernels.get_threads() if threads is None else threads
    k = min(k_limit, len(sec_ids))
    records: list[Record] = []
    for start in range(0, len(target_ids), block_rows):
        stop = start + block_rows
        dots = kernels.dot_matrix(tmat[start:stop], smat, threads)
        scores = _scores_from_dots(dots, sq_t[start:stop], sq_s)
        if k == 1:
            best = np.argmax(scores, axis=1)[:, None]
        else:
            best = [_top_k(row, k) for row in scores]
        for offset, cols in enumerate(best):
            row = scores[offset]
            entries = tuple(SimilarityEntry(sec_ids[j], sec_classes[j], float(row[j])) for j in cols)
            records.append(Record(target_ids[start + offset], entries))

    records.sort(key=lambda r: (r.i_max, r.target_id))
    return RecordSet(
        target_class=class_set.target.name,
        secondary_classes=[s.name for s in class_set.secondaries],
        records=records,
        k_limit=k_limit,
    )
