"""Acceptance criteria, one test (or small group) per criterion.

Run ``pytest tests/test_acceptance.py`` and read the "acceptance criteria"
section of the terminal summary for one PASS/FAIL line per criterion.
"""

from __future__ import annotations

import importlib.util
import json
import time
from pathlib import Path

import numpy as np
import pytest

import oracles
from simfilter import cli, metrics, splitter
from simfilter.dataset_io import DatasetManifest, ImageRef, VectorStore
from simfilter.filtering import (FilterMode, RoundingMode, fagt_pool_size, fbgt_count,
                                 filter_by_records, run_fagt)
from simfilter.simkernel import ClassMembers, ClassSet, compute_records, pairwise_scores

criterion = pytest.mark.criterion

# published HAM10000 and ISIC-2016 counts: p -> kept f at alpha 0.80 / 0.85 / 0.90
FBGT_TABLE = {
    "akiec": (304, (244, 259, 274)),
    "bcc": (488, (391, 415, 440)),
    "bkl": (1033, (827, 879, 930)),
    "df": (109, (88, 93, 99)),
    "mel": (1079, (864, 918, 972)),
    "vasc": (132, (106, 113, 119)),
    "benign": (727, (582, 618, 655)),
    "malignant": (173, (139, 148, 156)),
}
FBGT_ALPHAS = (0.80, 0.85, 0.90)

# f -> pool size p at alpha 0.75 / 0.80 / 0.85
FAGT_TABLE = {
    "akiec": (4218, (5624, 5272, 4962)),
    "bcc": (4026, (5368, 5032, 4736)),
    "bkl": (2431, (3241, 3038, 2860)),
    "df": (5401, (7201, 6751, 6354)),
    "mel": (2357, (3142, 2946, 2772)),
    "vasc": (5386, (7181, 6732, 6336)),
    "benign": (1081, (1441, 1351, 1271)),
    "malignant": (1148, (1530, 1435, 1350)),
}
FAGT_ALPHAS = (0.75, 0.80, 0.85)


@criterion(1, "FBGT kept counts reproduce the published counts exactly, < 1 s")
def test_fbgt_table():
    start = time.perf_counter()
    for name, (p, expected) in FBGT_TABLE.items():
        got = tuple(fbgt_count(p, a) for a in FBGT_ALPHAS)
        assert got == expected, name
    assert time.perf_counter() - start < 1.0


@criterion(2, "FAGT pool sizes reproduce the published counts under floor; ceiling is +1 on non-integral quotients")
def test_fagt_table():
    non_integral = 0
    exact = 0
    for name, (f, expected) in FAGT_TABLE.items():
        for alpha, p in zip(FAGT_ALPHAS, expected):
            assert fagt_pool_size(f, alpha, RoundingMode.FLOOR) == p, (name, alpha)
            ceil = fagt_pool_size(f, alpha, RoundingMode.CEILING)
            if (f * 100) % round(alpha * 100) == 0:
                exact += 1
                assert ceil == p, (name, alpha)
            else:
                non_integral += 1
                assert ceil == p + 1, (name, alpha)
    # the tables contain both kinds (e.g. 4218 / 0.75 = 5624 exactly)
    assert exact > 0 and non_integral > 0


@criterion(3, "pairwise kernel matches the per-pair formula within 1e-9 on 10,000 pairs, < 30 s")
def test_kernel_correctness():
    rng = np.random.default_rng(20240603)
    start = time.perf_counter()
    dims = np.exp(rng.uniform(np.log(8), np.log(12288), size=10_000)).astype(int)
    dims[:2] = (8, 12288)
    worst = 0.0
    for d in dims:
        u = rng.random(d)
        v = rng.random(d)
        naive = float(np.dot(u, v) / (np.linalg.norm(u) * np.linalg.norm(v)))
        got = pairwise_scores(u, v)[0, 0]
        worst = max(worst, abs(got - naive))
        assert pairwise_scores(u, u)[0, 0] == 1.0
        assert pairwise_scores(v, u)[0, 0] == got
        scale = rng.uniform(1e-3, 1e3)
        assert abs(pairwise_scores(scale * u, v)[0, 0] - got) <= 1e-9
    assert worst <= 1e-9
    assert time.perf_counter() - start < 30.0


def _random_class_set(rng, integer: bool):
    side = int(rng.integers(1, 3))
    dim = 3 * side * side
    vecs = {}

    def vec():
        if integer:
            v = rng.integers(0, 3, size=dim)
            if not v.any():
                v[0] = 1
            return v.astype(np.float64)
        return rng.random(dim).astype(np.float32).astype(np.float64)

    n_target = int(rng.integers(1, 31))
    targets = {f"t{i:02d}": vec() for i in range(n_target)}
    secondaries = {}
    for c in range(int(rng.integers(1, 4))):
        members = {f"s{c}_{i:02d}": vec() for i in range(int(rng.integers(1, 41)))}
        secondaries[f"class{c}"] = members
    if not integer and n_target > 1:
        # planted exact duplicate: a target equal to a secondary image
        first = next(iter(secondaries.values()))
        targets["t00"] = next(iter(first.values())).copy()
    vecs.update(targets)
    for members in secondaries.values():
        vecs.update(members)
    store = VectorStore(list(vecs), side, np.stack(list(vecs.values())))
    class_set = ClassSet(ClassMembers("target", list(targets)),
                         [ClassMembers(c, list(m)) for c, m in secondaries.items()])
    return class_set, store, targets, secondaries


@criterion(4, "compute_records matches a brute-force reference on 100 random class sets")
def test_records_oracle():
    rng = np.random.default_rng(7)
    for trial in range(100):
        integer = trial % 2 == 0
        class_set, store, targets, secondaries = _random_class_set(rng, integer)
        n_sec = sum(len(m) for m in secondaries.values())
        score = oracles.cosine_int if integer else oracles.cosine
        for k in (1, 3, n_sec):
            got = compute_records(class_set, store, k)
            want = oracles.records(targets, secondaries, k, score)
            assert len(got) == len(targets)
            assert got.target_ids() == [t for t, _ in want]
            for rec, (_, entries) in zip(got, want):
                assert [(e.secondary_id, e.secondary_class) for e in rec.entries] == \
                    [(s, c) for s, c, _ in entries]
                scores = np.array([e.score for e in rec.entries])
                expected = np.array([s for _, _, s in entries])
                if integer:
                    assert np.array_equal(scores, expected)
                else:
                    assert np.max(np.abs(scores - expected)) <= 1e-12
                assert rec.i_max == rec.entries[0].score


@criterion(5, "planted copies are exactly what each filter removes or keeps, < 5 s")
def test_planted_corpora():
    start = time.perf_counter()
    rng = np.random.default_rng(11)
    dim = 3 * 32 * 32
    for trial in range(10):
        p, q, d = 40, 60, int(rng.integers(1, 10))
        targets = rng.random((p, dim))
        secondary = rng.random((q, dim))
        copy_rows = rng.choice(p, size=d, replace=False)
        for i in copy_rows:
            targets[i] = secondary[rng.integers(q)]
        tids = [f"t{i:03d}" for i in range(p)]
        sids = [f"s{i:03d}" for i in range(q)]
        store = VectorStore(tids + sids, 32, np.vstack([targets, secondary]))
        class_set = ClassSet(ClassMembers("minor", tids), [ClassMembers("major", sids)])
        out = filter_by_records(compute_records(class_set, store), p - d,
                                FilterMode.REMOVE_MOST_SIMILAR)
        assert sorted(out.removed_ids) == sorted(tids[i] for i in copy_rows)

        f = int(rng.integers(5, 20))
        real = rng.random((30, dim))
        pool = rng.random((f + 25, dim)) ** 4  # noise with a different distribution
        planted = rng.choice(len(pool), size=f, replace=False)
        for i in planted:
            pool[i] = real[rng.integers(30)]
        rids = [f"r{i:03d}" for i in range(30)]
        gids = [f"g{i:03d}" for i in range(len(pool))]
        store = VectorStore(rids + gids, 32, np.vstack([real, pool]))
        outcome = run_fagt(ClassMembers("minor", gids, "synthetic"), ClassMembers("minor", rids),
                           store, f)
        assert sorted(outcome.kept_ids) == sorted(gids[i] for i in planted)
    assert time.perf_counter() - start < 5.0


def _tree(root: Path) -> dict[str, bytes]:
    return {str(p.relative_to(root)): p.read_bytes()
            for p in sorted(root.rglob("*")) if p.is_file() and p.relative_to(root).parts[0] != "logs"}


@criterion(6, "toy pipeline output trees are byte-identical across runs at 1 and 8 workers")
def test_pipeline_determinism(toy_root, tmp_path):
    config = str(toy_root / "pipeline.toml")
    trees = []
    for threads in (1, 1, 8, 8):
        out = tmp_path / f"out{len(trees)}"
        assert cli.main(["run", "--config", config, "--out", str(out), "--threads", str(threads)]) == 0
        trees.append(_tree(out))
    assert len(trees[0]) > 10
    for other in trees[1:]:
        assert other.keys() == trees[0].keys()
        assert all(other[k] == trees[0][k] for k in trees[0])
    assert "report/hist_fagt_minor_a.csv" in trees[0]
    assert "split/test.txt" in trees[0]


def _rows(spec):
    return [metrics.PredictionRow(f"x{i}", t, p, s) for i, (t, p, s) in enumerate(spec)]


@criterion(7, "metrics match hand-computed fixtures within 1e-12")
def test_metrics_fixtures():
    # confusion [[1, 1], [0, 1]]
    cm = metrics.confusion(_rows([("a", "a", {}), ("a", "b", {}), ("b", "b", {})]))
    assert cm.counts.tolist() == [[1, 1], [0, 1]]
    assert abs(metrics.accuracy(cm) - 2 / 3) <= 1e-12
    assert abs(metrics.recall_macro(cm) - 0.75) <= 1e-12
    assert abs(metrics.f1_macro(cm) - 2 / 3) <= 1e-12

    # Mann-Whitney: positives {0.9, 0.4}, negatives {0.5, 0.1} -> 3 of 4 pairs ordered
    rows = _rows([("p", "p", {"p": 0.9, "n": 0.1}), ("p", "n", {"p": 0.4, "n": 0.6}),
                  ("n", "p", {"p": 0.5, "n": 0.5}), ("n", "n", {"p": 0.1, "n": 0.9})])
    assert abs(metrics.auc_binary(rows, "p") - 0.75) <= 1e-12

    perfect = _rows([("a", "a", {"a": 0.8, "b": 0.1, "c": 0.1}),
                     ("b", "b", {"a": 0.2, "b": 0.7, "c": 0.1}),
                     ("c", "c", {"a": 0.1, "b": 0.2, "c": 0.7}),
                     ("a", "a", {"a": 0.6, "b": 0.3, "c": 0.1})])
    report = metrics.evaluate(perfect)
    assert report.accuracy == report.macro_recall == report.macro_f1 == report.macro_auc_ovr == 1.0

    rng = np.random.default_rng(3)
    classes = ["x", "y", "z"]
    spec = []
    for i in range(60):
        s = rng.dirichlet(np.ones(3)).round(2)  # rounding creates ties
        scores = dict(zip(classes, map(float, s)))
        pred = min(scores, key=lambda c: (-scores[c], c))
        spec.append((classes[i % 3], pred, scores))
    rows = _rows(spec)
    oracle = oracles.ovr_auc([{"true": t, "scores": s} for t, _, s in spec], classes)
    assert abs(metrics.auc_ovr_macro(rows) - oracle) <= 1e-12


def _ham_manifest() -> DatasetManifest:
    sizes = {"akiec": 327, "bcc": 514, "bkl": 1099, "df": 115, "mel": 1113, "nv": 6705, "vasc": 142}
    rng = np.random.default_rng(10015)
    classes = {}
    serial = 0
    for name, n in sizes.items():
        refs = []
        lesion = 0
        while len(refs) < n:
            size = min(int(rng.choice([1, 1, 1, 2, 2, 3, 4])), n - len(refs))
            for _ in range(size):
                refs.append(ImageRef(f"ISIC_{serial:07d}", name, f"/nonexistent/{serial}.jpg",
                                     group_key=f"HAM_{name}_{lesion:05d}"))
                serial += 1
            lesion += 1
        classes[name] = refs
    return DatasetManifest("ham", classes)


@criterion(8, "split of a 10,015-image grouped manifest keeps groups whole and is seed-deterministic")
def test_split_invariants():
    manifest = _ham_manifest()
    assert len(manifest) == 10_015
    group = {r.id: r.group_key for r in manifest.refs()}
    spec = splitter.SplitSpec(0.2, seed=1, group_field="group_key")
    a = splitter.split(manifest, spec)
    train_groups = {group[i] for i in a.train_ids}
    test_groups = {group[i] for i in a.test_ids}
    assert not train_groups & test_groups
    assert len(a.train_ids) + len(a.test_ids) == 10_015
    assert set(a.train_ids).isdisjoint(a.test_ids)
    for name, refs in manifest.classes.items():
        c = a.per_class_counts[name]
        assert c["train"] + c["test"] == len(refs)
    b = splitter.split(manifest, spec)
    assert (a.train_ids, a.test_ids) == (b.train_ids, b.test_ids)
    c = splitter.split(manifest, splitter.SplitSpec(0.2, seed=2, group_field="group_key"))
    assert c.test_ids != a.test_ids
    assert c.per_class_counts == a.per_class_counts


def _load_bench():
    path = Path(__file__).resolve().parents[1] / "benchmarks" / "bench_pairwise.py"
    spec = importlib.util.spec_from_file_location("bench_pairwise", path)
    module = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(module)
    return module


@criterion(9, "1,000 x 8,000 scoring at dim 12,288 (soft target 60 s; recorded, never fails)")
def test_performance_soft(record_property, capsys):
    result = _load_bench().run(1000, 8000, 12288, fallback_rows=5)
    record_property("benchmark", json.dumps(result))
    with capsys.disabled():
        print(f"\nbenchmark: {json.dumps(result)}")
    seconds = result.get("compiled_s", result.get("fallback_s_extrapolated"))
    if seconds > 60:
        print(f"soft target missed: {seconds:.1f} s > 60 s")


@criterion(10, "classifier outcomes are not reproduced; metrics recompute them from prediction files")
def test_non_reproducibility_statement(tmp_path, capsys):
    statement = ("Classifier results from the original experiments (e.g. sensitivity 72.00%, "
                 "accuracy 94.44%, AUC 82.47%) depend on GAN and transformer training and are "
                 "NOT reproduced here.")
    with capsys.disabled():
        print("\n" + statement)
    # a prediction file with 54 of 75 malignant test images detected gives 72.00%
    rows = ([metrics.PredictionRow(f"m{i}", "malignant", "malignant", {"malignant": 0.9, "benign": 0.1})
             for i in range(54)]
            + [metrics.PredictionRow(f"m{i}", "malignant", "benign", {"malignant": 0.2, "benign": 0.8})
               for i in range(54, 75)]
            + [metrics.PredictionRow(f"b{i}", "benign", "benign", {"malignant": 0.3, "benign": 0.7})
               for i in range(304)])
    path = tmp_path / "predictions.csv"
    metrics.write_predictions(rows, path)
    report = metrics.evaluate(metrics.read_predictions(path))
    assert f"{100 * report.per_class_recall['malignant']:.2f}" == "72.00"
