"""Deterministic group-aware train/test split.

Only images whose group has a single member are test candidates, so
augmented variants of one lesion always stay together in train.

Procedure:

1. ``total = floor(test_fraction * N + 1/2)`` in exact arithmetic.
2. Each class gets ``total * n_c / N`` test slots, floored, with the
   remainder handed out by largest fractional part (ties: class name asc).
3. A class with fewer candidates than slots is capped (a warning is
   recorded; ``strict=True`` raises instead).
4. Candidates of a class, sorted by id, are Fisher-Yates shuffled with
   SplitMix64 seeded by ``stream_key(seed, "split", class_name)``; the first
   slots go to test.
"""

from __future__ import annotations

import csv
import io
import math
import os
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from simfilter.dataset_io import DatasetManifest
from simfilter.errors import DataError
from simfilter.rng import SplitMix64, stream_key


@dataclass(frozen=True)
class SplitSpec:
    test_fraction: float
    seed: int
    group_field: str | None = None

    def __post_init__(self):
        if not 0.0 < self.test_fraction < 1.0:
            raise ValueError(f"test_fraction must be in (0, 1), got {self.test_fraction}")


@dataclass
class SplitResult:
    train_ids: list[str]
    test_ids: list[str]
    per_class_counts: dict[str, dict[str, int]]
    warnings: list[str] = field(default_factory=list)

    def counts_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["class", "train", "test", "total"])
        for name, c in self.per_class_counts.items():
            writer.writerow([name, c["train"], c["test"], c["train"] + c["test"]])
        return buf.getvalue()


def _allocate(total: int, sizes: dict[str, int]) -> dict[str, int]:
    n = sum(sizes.values())
    shares = {c: Fraction(total * k, n) for c, k in sizes.items()}
    alloc = {c: math.floor(s) for c, s in shares.items()}
    leftover = total - sum(alloc.values())
    order = sorted(sizes, key=lambda c: (-(shares[c] - alloc[c]), c))
    for c in order[:leftover]:
        alloc[c] += 1
    return alloc


def split(manifest: DatasetManifest, spec: SplitSpec, *, strict: bool = False) -> SplitResult:
    refs = manifest.refs()
    if not refs:
        raise DataError("cannot split an empty manifest")
    if spec.group_field:
        if not hasattr(refs[0], spec.group_field):
            raise DataError(f"unknown group field {spec.group_field!r}")
        keys = {r.id: getattr(r, spec.group_field) for r in refs}
        missing = [i for i, k in keys.items() if k in (None, "")]
        if missing:
            raise DataError(f"{len(missing)} image(s) lack a {spec.group_field!r}, "
                            f"e.g. {missing[0]!r}")
    else:
        keys = {r.id: r.id for r in refs}
    group_sizes = Counter(keys.values())

    total = math.floor(Fraction(repr(float(spec.test_fraction))) * len(refs) + Fraction(1, 2))
    sizes = {name: len(members) for name, members in manifest.classes.items()}
    quotas = _allocate(total, sizes)

    notes: list[str] = []
    test: list[str] = []
    counts: dict[str, dict[str, int]] = {}
    for name, members in manifest.classes.items():
        candidates = sorted(r.id for r in members if group_sizes[keys[r.id]] == 1)
        take = min(quotas[name], len(candidates))
        if take < quotas[name]:
            if candidates:
                notes.append(f"class {name!r}: {quotas[name]} test images wanted, only "
                             f"{len(candidates)} singleton-group candidates")
            else:
                notes.append(f"class {name!r}: no singleton-group candidates, "
                             f"0 of {quotas[name]} test images assigned")
        SplitMix64(stream_key(spec.seed, "split", name)).shuffle(candidates)
        test.extend(candidates[:take])
        counts[name] = {"train": len(members) - take, "test": take}

    if strict and notes:
        achievable = sum(1 for r in refs if group_sizes[keys[r.id]] == 1)
        raise DataError(f"test fraction {spec.test_fraction} needs {total} test images; "
                        f"at most {achievable} are available: " + "; ".join(notes))

    test_set = set(test)
    train_ids = [r.id for r in refs if r.id not in test_set]
    return SplitResult(train_ids, sorted(test), counts, notes)


def write_split(result: SplitResult, out_dir: str | os.PathLike) -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "train.txt").write_text("".join(f"{i}\n" for i in result.train_ids), encoding="utf-8")
    (out_dir / "test.txt").write_text("".join(f"{i}\n" for i in result.test_ids), encoding="utf-8")
    (out_dir / "counts.csv").write_text(result.counts_csv(), encoding="utf-8")
