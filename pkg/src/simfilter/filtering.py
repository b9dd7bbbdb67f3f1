"""Record-based filtering before and after GAN training.

Counts are computed in exact rational arithmetic from the decimal form of
alpha, so ``ceil(173 * 0.80)`` is 139 and never 138.99999999999997 rounded
the wrong way.
"""

from __future__ import annotations

import enum
import json
import math
import os
import warnings
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

from simfilter.dataset_io import VectorStore
from simfilter.errors import DataError
from simfilter.simkernel import ClassMembers, ClassSet, RecordSet, compute_records


class FilterMode(str, enum.Enum):
    REMOVE_MOST_SIMILAR = "remove_most_similar"
    REMOVE_MOST_DISSIMILAR = "remove_most_dissimilar"


class RoundingMode(str, enum.Enum):
    CEILING = "ceiling"
    FLOOR = "floor"


class Method(str, enum.Enum):
    FBGT = "FBGT"
    FAGT = "FAGT"


class Task(str, enum.Enum):
    BINARY = "binary"
    MULTICLASS = "multiclass"


class PolicyWarning(UserWarning):
    pass


@dataclass(frozen=True)
class Alpha:
    """Retention ratio, strictly between 0 and 1."""

    value: float

    def __post_init__(self):
        if not 0.0 < float(self.value) < 1.0:
            raise ValueError(f"alpha must satisfy 0 < alpha < 1, got {self.value}")
        object.__setattr__(self, "value", float(self.value))

    @property
    def exact(self) -> Fraction:
        # the shortest repr is the decimal the user typed (0.8, not 0.8000000000000000444)
        return Fraction(repr(self.value))

    def __float__(self) -> float:
        return self.value


def _alpha(value) -> Alpha:
    return value if isinstance(value, Alpha) else Alpha(value)


def alpha_from_percent(pct_removed: float) -> Alpha:
    """alpha = (100 - percent removed) / 100."""
    if not 0 < pct_removed < 100:
        raise ValueError(f"percentage removed must be in (0, 100), got {pct_removed}")
    return Alpha(float((100 - Fraction(repr(float(pct_removed)))) / 100))


def fbgt_count(p: int, alpha) -> int:
    """Number of real images kept: ``ceil(p * alpha)``."""
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    return math.ceil(p * _alpha(alpha).exact)


def fagt_pool_size(f: int, alpha, rounding: RoundingMode | str = RoundingMode.CEILING) -> int:
    """Synthetic pool size for keeping ``f`` images: ``f / alpha`` rounded.

    Ceiling never under-generates; floor reproduces the published tables.
    """
    if f < 1:
        raise ValueError(f"f must be >= 1, got {f}")
    quotient = f / _alpha(alpha).exact
    if RoundingMode(rounding) is RoundingMode.CEILING:
        return math.ceil(quotient)
    return math.floor(quotient)


@dataclass(frozen=True)
class FilterOutcome:
    kept_ids: tuple[str, ...]
    removed_ids: tuple[str, ...]
    f: int
    method: Method | None = None
    alpha: Alpha | None = None
    mode: FilterMode = FilterMode.REMOVE_MOST_SIMILAR
    target_class: str = ""

    def to_dict(self) -> dict:
        return {
            "target_class": self.target_class,
            "method": self.method.value if self.method else None,
            "alpha": self.alpha.value if self.alpha else None,
            "mode": self.mode.value,
            "f": self.f,
            "kept_ids": list(self.kept_ids),
            "removed_ids": list(self.removed_ids),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> FilterOutcome:
        return cls(
            kept_ids=tuple(doc["kept_ids"]),
            removed_ids=tuple(doc["removed_ids"]),
            f=int(doc["f"]),
            method=Method(doc["method"]) if doc.get("method") else None,
            alpha=Alpha(doc["alpha"]) if doc.get("alpha") is not None else None,
            mode=FilterMode(doc["mode"]),
            target_class=doc.get("target_class", ""),
        )


def write_outcome(outcome: FilterOutcome, path: str | os.PathLike) -> None:
    """Write JSON to ``path`` and the removed ids, one per line, to ``<stem>.removed.txt``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(outcome.to_dict(), sort_keys=True, indent=1) + "\n", encoding="utf-8")
    removed = "".join(f"{i}\n" for i in outcome.removed_ids)
    path.with_suffix(".removed.txt").write_text(removed, encoding="utf-8")


def read_outcome(path: str | os.PathLike) -> FilterOutcome:
    try:
        return FilterOutcome.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise DataError(f"malformed filter outcome {path}: {exc}") from exc


def filter_by_records(
    records: RecordSet,
    keep_count: int,
    mode: FilterMode | str = FilterMode.REMOVE_MOST_SIMILAR,
) -> FilterOutcome:
    """Keep ``keep_count`` targets from an ascending record set.

    remove_most_similar keeps the prefix (lowest i_max); remove_most_dissimilar
    keeps the suffix. Both id lists follow record-set order.
    """
    mode = FilterMode(mode)
    n = len(records)
    if not 1 <= keep_count <= n:
        raise ValueError(f"keep_count must be in [1, {n}], got {keep_count}")
    ids = records.target_ids()
    if mode is FilterMode.REMOVE_MOST_SIMILAR:
        kept, removed = ids[:keep_count], ids[keep_count:]
    else:
        kept, removed = ids[n - keep_count:], ids[:n - keep_count]
    return FilterOutcome(tuple(kept), tuple(removed), keep_count, mode=mode,
                         target_class=records.target_class)


def run_fbgt(
    class_set: ClassSet,
    vectors: VectorStore,
    alpha,
    *,
    k_limit: int = 1,
    records: RecordSet | None = None,
    threads: int | None = None,
) -> FilterOutcome:
    """Drop the real target images most similar to any secondary class.

    ``records`` may be passed to reuse a previously computed record set.
    """
    alpha = _alpha(alpha)
    if records is None:
        records = compute_records(class_set, vectors, k_limit, threads=threads)
    f = fbgt_count(len(records), alpha)
    out = filter_by_records(records, f, FilterMode.REMOVE_MOST_SIMILAR)
    return FilterOutcome(out.kept_ids, out.removed_ids, f, Method.FBGT, alpha, out.mode,
                         class_set.target.name)


def run_fagt(
    synthetic_class: ClassMembers,
    real_class: ClassMembers,
    vectors: VectorStore,
    f: int,
    *,
    alpha=None,
    k_limit: int = 1,
    records: RecordSet | None = None,
    threads: int | None = None,
) -> FilterOutcome:
    """Keep the ``f`` synthetic images closest to the GAN's real training class."""
    if len(synthetic_class.ids) < f:
        raise DataError(
            f"synthetic pool for {synthetic_class.name!r} has {len(synthetic_class.ids)} "
            f"images, fewer than the {f} to keep")
    if records is None:
        records = compute_records(ClassSet(synthetic_class, [real_class]), vectors, k_limit,
                                  threads=threads)
    out = filter_by_records(records, f, FilterMode.REMOVE_MOST_DISSIMILAR)
    return FilterOutcome(out.kept_ids, out.removed_ids, f, Method.FAGT,
                         _alpha(alpha) if alpha is not None else None, out.mode,
                         synthetic_class.name)


def policy_check(task: Task | str, mode: FilterMode | str) -> str | None:
    """Warn when dissimilar images would be removed in a multiclass task.

    Returns the warning message (also issued as :class:`PolicyWarning`), or
    None when the combination is fine.
    """
    if Task(task) is Task.MULTICLASS and FilterMode(mode) is FilterMode.REMOVE_MOST_DISSIMILAR:
        msg = ("removing dissimilar images in a multiclass task can discard images with "
               "features that distinguish the class; remove only similar images")
        warnings.warn(msg, PolicyWarning, stacklevel=2)
        return msg
    return None
