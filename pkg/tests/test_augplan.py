from collections import Counter

import numpy as np
import pytest
from PIL import Image

from simfilter.augplan import (AugmentationPlan, CompositionRow, TransformParams, TransformSpec,
                               apply_transform, compose_final, composition, composition_csv,
                               draw_params, oversample_transform, plan_class)
from simfilter.dataset_io import DatasetManifest, ImageRef, decode_image
from simfilter.errors import DataError, PlanMismatchError

IDENTITY = TransformParams(0.0, 0.0, 0.0, 1.0, False, False)


@pytest.mark.parametrize("n,r,t,s", [(2000, 727, 192, 1081), (6042, 304, 1520, 4218), (50, 50, 0, 0)])
def test_plan_class(n, r, t, s):
    plan = plan_class(n, r, t, "c")
    assert plan.synthetic == s
    assert plan.real + plan.transformed + plan.synthetic == plan.total


def test_plan_over_full():
    with pytest.raises(DataError):
        plan_class(100, 90, 20, "c")
    with pytest.raises(ValueError):
        AugmentationPlan("c", 10, 5, 5, 1)


def test_spec_validation_and_mapping():
    with pytest.raises(ValueError):
        TransformSpec(rotation_degrees=(10, -10))
    spec = TransformSpec.from_mapping({"rotation_degrees": [-5, 5], "allow_vflip": False}, seed=9)
    assert spec.rotation_degrees == (-5.0, 5.0) and spec.seed == 9 and not spec.allow_vflip
    assert spec.zoom_fraction == (0.9, 1.1)


def test_draw_params_within_ranges_and_keyed():
    spec = TransformSpec(seed=3)
    params = [draw_params(spec, f"img{i}", c) for i in range(50) for c in range(3)]
    assert all(-25 <= p.rotation <= 25 and -0.1 <= p.shift_x <= 0.1 and 0.9 <= p.zoom <= 1.1
               for p in params)
    assert draw_params(spec, "img1", 0) == draw_params(TransformSpec(seed=3), "img1", 0)
    assert draw_params(spec, "img1", 0) != draw_params(spec, "img1", 1)
    assert draw_params(spec, "img1", 0) != draw_params(TransformSpec(seed=4), "img1", 0)
    no_flip = TransformSpec(allow_hflip=False, allow_vflip=False)
    assert not any(draw_params(no_flip, f"i{i}", 0).hflip for i in range(20))


def _image(h=9, w=9, seed=0):
    return np.random.default_rng(seed).integers(0, 256, (h, w, 3), dtype=np.uint8)


def test_identity_transform():
    img = _image(7, 11)
    assert np.array_equal(apply_transform(img, IDENTITY), img)


def test_flips_and_right_angle_rotation():
    img = _image()
    h = TransformParams(0.0, 0.0, 0.0, 1.0, True, False)
    v = TransformParams(0.0, 0.0, 0.0, 1.0, False, True)
    assert np.array_equal(apply_transform(img, h), img[:, ::-1])
    assert np.array_equal(apply_transform(img, v), img[::-1])
    r180 = TransformParams(180.0, 0.0, 0.0, 1.0, False, False)
    assert np.array_equal(apply_transform(img, r180), img[::-1, ::-1])


def test_integer_shift_with_edge_replication():
    img = _image(10, 10)
    shift = TransformParams(0.0, 0.2, 0.0, 1.0, False, False)  # 2 pixels right
    out = apply_transform(img, shift)
    assert np.array_equal(out[:, 2:], img[:, :-2])
    assert np.array_equal(out[:, 0], img[:, 0]) and np.array_equal(out[:, 1], img[:, 0])


def _sources(tmp_path, n, cls="c"):
    refs = []
    for i in range(n):
        p = tmp_path / "src" / f"{cls}{i:03d}.png"
        p.parent.mkdir(parents=True, exist_ok=True)
        Image.fromarray(_image(12, 12, seed=i)).save(p)
        refs.append(ImageRef(f"{cls}{i:03d}", cls, str(p), "real", f"lesion{i // 2}"))
    return refs


def test_oversample_round_robin_counts(tmp_path):
    refs = _sources(tmp_path, 7)
    out = oversample_transform(refs, 10, TransformSpec(seed=1), tmp_path / "out")
    assert len(out) == 10
    used = Counter(r.id.rsplit("_aug", 1)[0] for r in out)
    assert sorted(used.values()) == [1, 1, 1, 1, 2, 2, 2]
    assert all(r.origin.value == "transformed" for r in out)
    # outputs stay in their source's group and keep its resolution
    assert out[0].group_key == "lesion0"
    assert decode_image(out[0].path).shape == (12, 12, 3)


def test_round_robin_counting_argument(tmp_path):
    # 173 sources, 192 outputs -> 19 sources used twice, 154 once
    src = tmp_path / "s.png"
    Image.fromarray(_image(4, 4)).save(src)
    refs = [ImageRef(f"m{i:03d}", "m", str(src)) for i in reversed(range(173))]
    out = oversample_transform(refs, 192, TransformSpec(seed=2), tmp_path / "out")
    used = Counter(r.id.rsplit("_aug", 1)[0] for r in out)
    assert Counter(used.values()) == {2: 19, 1: 154}
    # sorted-id order: the first 19 ids are the ones cycled twice
    assert sorted(i for i, n in used.items() if n == 2) == [f"m{i:03d}" for i in range(19)]


def test_oversample_deterministic_bytes(tmp_path):
    refs = _sources(tmp_path, 1)
    spec = TransformSpec(rotation_degrees=(-30, 30), shift_fraction=(0, 0), zoom_fraction=(1, 1),
                         allow_hflip=False, allow_vflip=False, seed=5)
    a = oversample_transform(refs, 3, spec, tmp_path / "a", threads=1)
    b = oversample_transform(refs, 3, spec, tmp_path / "b", threads=3)
    blobs_a = [open(r.path, "rb").read() for r in a]
    assert blobs_a == [open(r.path, "rb").read() for r in b]
    assert len(set(blobs_a)) == 3


def test_oversample_edge_cases(tmp_path):
    assert oversample_transform([], 0, TransformSpec(), tmp_path) == []
    with pytest.raises(DataError):
        oversample_transform([], 1, TransformSpec(), tmp_path)


def _manifest(name, origin, cls, n, prefix):
    return DatasetManifest(name, {cls: [ImageRef(f"{prefix}{i}", cls, "/x", origin) for i in range(n)]})


def test_compose_conservation():
    real = _manifest("r", "real", "benign", 727, "r")
    trans = _manifest("t", "transformed", "benign", 192, "t")
    syn = _manifest("s", "synthetic", "benign", 1081, "s")
    plan = {"benign": plan_class(2000, 727, 192, "benign")}
    final = compose_final(real, trans, syn, plan)
    (row,) = composition(final)
    assert (row.real, row.transformed, row.synthetic, row.total) == (727, 192, 1081, 2000)
    assert composition_csv([row]) == "class,real,transformed,synthetic,total\nbenign,727,192,1081,2000\n"


def test_compose_pass_through():
    real = _manifest("r", "real", "nv", 5, "r")
    final = compose_final(real, None, None, {"nv": plan_class(5, 5, 0, "nv")})
    assert len(final) == 5


def test_compose_missing_synthetic_names_class():
    real = _manifest("r", "real", "benign", 727, "r")
    trans = _manifest("t", "transformed", "benign", 192, "t")
    syn = _manifest("s", "synthetic", "benign", 1080, "s")
    with pytest.raises(PlanMismatchError, match="benign"):
        compose_final(real, trans, syn, {"benign": plan_class(2000, 727, 192, "benign")})


def test_compose_collisions_and_origins():
    real = _manifest("r", "real", "a", 2, "x")
    with pytest.raises(DataError, match="collision"):
        compose_final(real, None, _manifest("s", "synthetic", "a", 1, "x"))
    with pytest.raises(DataError, match="origin"):
        compose_final(real, _manifest("t", "real", "a", 1, "t"), None)


def test_composition_percentages():
    r, t, s = CompositionRow("b", 727, 192, 1081).percentages()
    assert (round(r, 2), round(t, 2), round(s, 2)) == (36.35, 9.6, 54.05)
