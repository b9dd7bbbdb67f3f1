"""Command-line pipeline: ingest -> vectorize -> records -> filter -> plan ->
transform -> compose -> split -> eval / report.

Each stage reads the previous stages' artifacts from the output directory and
writes its own, so any stage can be rerun on its own. Settings come from a
TOML file (``--config``); command-line flags take precedence.

Exit codes: 0 ok, 1 usage error, 2 data error, 3 internal error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
import time
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np

from simfilter import augplan, dataset_io, filtering, kernels, metrics, splitter, toy
from simfilter.dataset_io import DatasetManifest, Origin, VectorStore
from simfilter.errors import DataError, StageOrderError
from simfilter.simkernel import ClassMembers, ClassSet, compute_records, read_records, write_records

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

log = logging.getLogger("simfilter")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 1, 2, 3
HIST_BINS = 100


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# ---------------------------------------------------------------------------
# configuration


@dataclass
class Context:
    """Resolved configuration plus output-directory helpers."""

    cfg: dict
    out: Path
    base: Path
    threads: int
    seed: int | None
    stage: str = ""
    inputs: list[Path] = field(default_factory=list)
    params: dict = field(default_factory=dict)

    def section(self, name: str) -> dict:
        return dict(self.cfg.get(name, {}))

    def path(self, value: str | None) -> Path | None:
        if value is None:
            return None
        p = Path(value)
        return p if p.is_absolute() else (self.base / p)

    def artifact(self, *parts: str) -> Path:
        return self.out.joinpath(*parts)

    def require(self, *parts: str, producer: str) -> Path:
        p = self.artifact(*parts)
        if not p.exists():
            raise StageOrderError(f"missing artifact {p} (run `{producer}` first)")
        self.inputs.append(p)
        return p

    def need_seed(self) -> int:
        if self.seed is None:
            raise UsageError(f"`{self.stage}` requires --seed (or `seed` in the config)")
        return self.seed

    @property
    def side(self) -> int:
        return int(self.cfg.get("side", dataset_io.DEFAULT_SIDE))

    @property
    def task(self) -> str:
        return str(self.cfg.get("task", "multiclass"))


def load_config(path: str | None) -> tuple[dict, Path]:
    if path is None:
        return {}, Path.cwd()
    p = Path(path)
    try:
        with open(p, "rb") as fh:
            return tomllib.load(fh), p.parent.resolve()
    except FileNotFoundError:
        raise UsageError(f"config file {p} not found") from None
    except tomllib.TOMLDecodeError as exc:
        raise UsageError(f"config file {p}: {exc}") from None


def make_context(args: argparse.Namespace) -> Context:
    cfg, base = load_config(args.config)
    out = args.out or cfg.get("output_dir") or "out"
    out_path = Path(out) if args.out or Path(out).is_absolute() else base / out
    threads = args.threads or int(cfg.get("threads", 1))
    seed = args.seed if args.seed is not None else cfg.get("seed")
    if threads < 1:
        raise UsageError("--threads must be >= 1")
    kernels.set_threads(threads)
    return Context(cfg, out_path, base, threads, seed, stage=args.command)


# ---------------------------------------------------------------------------
# shared helpers


def _digest(paths: Sequence[Path]) -> str:
    h = hashlib.sha256()
    for p in sorted(set(paths)):
        h.update(str(p.name).encode())
        if p.is_file():
            with open(p, "rb") as fh:
                for chunk in iter(lambda: fh.read(1 << 20), b""):
                    h.update(chunk)
    return h.hexdigest()


def _jsonable(value):
    if isinstance(value, Path):
        return str(value)
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    return value


def _log_run(ctx: Context, duration: float) -> None:
    # logs/ holds the only non-deterministic bytes in the output tree
    line = {"stage": ctx.stage, "inputs_digest": _digest(ctx.inputs),
            "params": _jsonable(ctx.params), "duration_s": round(duration, 3)}
    logs = ctx.artifact("logs")
    logs.mkdir(parents=True, exist_ok=True)
    with open(logs / "run.jsonl", "a", encoding="utf-8") as fh:
        fh.write(json.dumps(line, sort_keys=True) + "\n")


def _write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def _read_manifest(ctx: Context, name: str) -> DatasetManifest:
    return dataset_io.read_manifest(ctx.require("manifests", f"{name}.json", producer="ingest"))


def _read_store(ctx: Context, name: str, manifest: DatasetManifest) -> VectorStore:
    path = ctx.require("vectors", f"{name}.bin", producer="vectorize")
    return dataset_io.read_vectors(path, manifest.ids())


def _alpha_tag(alpha: float) -> str:
    return f"{alpha:.2f}" if float(f"{alpha:.2f}") == alpha else repr(alpha)


def _targets(ctx: Context, args_targets: list[str] | None, manifest: DatasetManifest) -> list[str]:
    targets = args_targets or ctx.section("records").get("targets")
    if not targets:
        # default: every class smaller than the largest one
        counts = manifest.counts()
        biggest = max(counts.values())
        targets = [c for c, n in counts.items() if n < biggest]
    unknown = [t for t in targets if t not in manifest.classes]
    if unknown:
        raise DataError(f"unknown target class(es): {unknown}")
    return list(targets)


def _method(ctx: Context, flag: str | None) -> str:
    method = (flag or ctx.section("filter").get("method") or "fbgt").lower()
    if method not in ("fbgt", "fagt"):
        raise UsageError(f"unknown method {method!r} (expected fbgt or fagt)")
    return method


def _load_plans(ctx: Context) -> dict[str, augplan.AugmentationPlan]:
    doc = json.loads(ctx.require("plan.json", producer="plan").read_text(encoding="utf-8"))
    return {name: augplan.AugmentationPlan(name, p["total"], p["real"], p["transformed"], p["synthetic"])
            for name, p in doc["classes"].items()}


# ---------------------------------------------------------------------------
# stages


def cmd_ingest(ctx: Context, args) -> None:
    ds = ctx.section("dataset")
    jobs = []
    if args.root:
        jobs.append((args.name or args.origin, Path(args.root), args.layout, args.origin))
    else:
        layout = args.layout or ds.get("layout", "class-subdirs")
        if "real_root" not in ds:
            raise UsageError("ingest needs --root or dataset.real_root in the config")
        jobs.append(("real", ctx.path(ds["real_root"]), layout, "real"))
        if ds.get("synthetic_root"):
            jobs.append(("synthetic", ctx.path(ds["synthetic_root"]),
                         ds.get("synthetic_layout", "class-subdirs"), "synthetic"))
    for name, root, layout, origin in jobs:
        ctx.inputs += sorted(p for p in Path(root).rglob("*") if p.is_file()) if Path(root).is_dir() else []
        result = dataset_io.load_dataset(root, layout or "class-subdirs", origin=origin,
                                         dataset_name=name, side=ctx.side, threads=ctx.threads)
        dataset_io.write_manifest(result.manifest, ctx.artifact("manifests", f"{name}.json"),
                                  root=ctx.out)
        failures = "".join(f"{Path(f.path).name}\t{f.reason}\n" for f in result.failures)
        _write_text(ctx.artifact("manifests", f"{name}.failures.txt"), failures)
        for f in result.failures:
            print(f"warning: could not decode {f.path}: {f.reason}", file=sys.stderr)
        print(f"{name}: {len(result.manifest)} images in {len(result.manifest.classes)} classes, "
              f"{len(result.failures)} failure(s)")
        ctx.params[name] = {"root": str(root), "layout": layout, "origin": origin}


def _manifest_names(ctx: Context, only: list[str] | None) -> list[str]:
    if only:
        return only
    names = ["real"]
    if ctx.artifact("manifests", "synthetic.json").exists():
        names.append("synthetic")
    return names


def cmd_vectorize(ctx: Context, args) -> None:
    side = args.side or ctx.side
    for name in _manifest_names(ctx, args.manifest):
        manifest = _read_manifest(ctx, name)
        store = dataset_io.vectorize_manifest(manifest, side, ctx.threads)
        dataset_io.write_vectors(store, ctx.artifact("vectors", f"{name}.bin"))
        zero = [i for i, row in zip(store.ids, store.matrix) if not row.any()]
        if zero:
            print(f"warning: {len(zero)} all-black image(s) in {name}: {', '.join(zero[:5])}",
                  file=sys.stderr)
        print(f"{name}: {len(store)} vectors of dim {3 * side * side}")
    ctx.params.update(side=side)


def cmd_records(ctx: Context, args) -> None:
    method = _method(ctx, args.method)
    k_limit = args.k_limit or int(ctx.section("records").get("k_limit", 1))
    real = _read_manifest(ctx, "real")
    real_store = _read_store(ctx, "real", real)
    if method == "fagt":
        synthetic = _read_manifest(ctx, "synthetic")
        store = VectorStore.merge(real_store, _read_store(ctx, "synthetic", synthetic))
    else:
        store = real_store
    for target in _targets(ctx, args.target, real):
        if method == "fbgt":
            class_set = ClassSet.from_manifest(real, target, args.secondary)
        else:
            if target not in synthetic.classes:
                raise DataError(f"no synthetic pool for class {target!r}")
            class_set = ClassSet(
                ClassMembers(target, [r.id for r in synthetic.classes[target]], Origin.SYNTHETIC),
                [ClassMembers(target, [r.id for r in real.classes[target]], Origin.REAL)])
        records = compute_records(class_set, store, k_limit, threads=ctx.threads)
        write_records(records, ctx.artifact("records", f"{method}_{target}.json"))
        print(f"{method} {target}: {len(records)} records against "
              f"{sum(len(s.ids) for s in class_set.secondaries)} secondary images")
    ctx.params.update(method=method, k_limit=k_limit)


def cmd_filter(ctx: Context, args) -> None:
    method = _method(ctx, args.method)
    fcfg = ctx.section("filter")
    rounding = args.rounding or fcfg.get("rounding", "ceiling")
    alphas = args.alpha or fcfg.get("alphas") or []
    real = _read_manifest(ctx, "real")
    default_mode = ("remove_most_similar" if method == "fbgt" else "remove_most_dissimilar")
    mode = filtering.FilterMode(args.mode.replace("-", "_") if args.mode else default_mode)
    if method == "fbgt":
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            filtering.policy_check(ctx.task, mode)
        for w in caught:
            print(f"warning: {w.message}", file=sys.stderr)

    for target in _targets(ctx, args.target, real):
        records = read_records(ctx.require("records", f"{method}_{target}.json", producer="records"))
        if method == "fbgt":
            if args.keep is not None:
                runs = [(None, args.keep)]
            elif alphas:
                runs = [(a, filtering.fbgt_count(len(records), a)) for a in alphas]
            else:
                raise UsageError("fbgt filtering needs --alpha (or filter.alphas) or --keep")
        else:
            if args.keep is not None:
                keep = args.keep
            else:
                plans = _load_plans(ctx)
                if target not in plans:
                    raise DataError(f"plan has no entry for class {target!r}")
                keep = plans[target].synthetic
            if len(alphas) > 1:
                raise UsageError("fagt filtering keeps a fixed count; give at most one --alpha")
            runs = [(alphas[0] if alphas else None, keep)]
        for alpha, keep in runs:
            if method == "fagt":
                if keep > len(records):
                    raise DataError(f"synthetic pool for {target!r} has {len(records)} images, "
                                    f"fewer than the {keep} to keep")
                if alpha is not None:
                    want = filtering.fagt_pool_size(keep, alpha, rounding)
                    if len(records) < want:
                        print(f"warning: {target}: pool of {len(records)} is smaller than the "
                              f"{want} implied by alpha={alpha}", file=sys.stderr)
            out = filtering.filter_by_records(records, keep, mode)
            outcome = filtering.FilterOutcome(
                out.kept_ids, out.removed_ids, keep, filtering.Method(method.upper()),
                filtering.Alpha(alpha) if alpha is not None else None, mode, target)
            stem = f"{method}_{target}" + (f"_a{_alpha_tag(alpha)}" if method == "fbgt" and alpha else "")
            if method == "fbgt" and alpha is None:
                stem += f"_keep{keep}"
            filtering.write_outcome(outcome, ctx.artifact("filter", f"{stem}.json"))
            print(f"{method} {target}: kept {len(outcome.kept_ids)}, removed {len(outcome.removed_ids)}"
                  + (f" (alpha={alpha})" if alpha is not None else ""))
    ctx.params.update(method=method, alphas=alphas, keep=args.keep, mode=mode.value, rounding=rounding)


def cmd_plan(ctx: Context, args) -> None:
    pcfg = ctx.section("plan")
    total = args.total or pcfg.get("total")
    if total is None:
        raise UsageError("plan needs --total (or plan.total)")
    transformed = dict(pcfg.get("transformed", {}))
    for item in args.transformed or []:
        name, _, value = item.partition("=")
        if not value.isdigit():
            raise UsageError(f"--transformed expects CLASS=COUNT, got {item!r}")
        transformed[name] = int(value)
    real = _read_manifest(ctx, "real")
    classes = pcfg.get("classes") or list(real.classes)
    fcfg = ctx.section("filter")
    alphas = fcfg.get("alphas") or []
    rounding = fcfg.get("rounding", "ceiling")
    doc: dict[str, Any] = {"total": int(total), "classes": {}}
    plans = []
    for name in classes:
        if name not in real.classes:
            raise DataError(f"plan names unknown class {name!r}")
        plan = augplan.plan_class(int(total), len(real.classes[name]), int(transformed.get(name, 0)), name)
        plans.append(plan)
        entry = {"total": plan.total, "real": plan.real, "transformed": plan.transformed,
                 "synthetic": plan.synthetic}
        if plan.synthetic and alphas:
            entry["fagt_pool_size"] = {_alpha_tag(a): filtering.fagt_pool_size(plan.synthetic, a, rounding)
                                       for a in alphas}
        doc["classes"][name] = entry
    _write_text(ctx.artifact("plan.json"), json.dumps(doc, sort_keys=True, indent=2) + "\n")
    rows = [augplan.CompositionRow(p.class_name, p.real, p.transformed, p.synthetic) for p in plans]
    _write_text(ctx.artifact("plan.csv"), augplan.composition_csv(rows))
    for p in plans:
        print(f"{p.class_name}: {p.real} real + {p.transformed} transformed + {p.synthetic} synthetic = {p.total}")
    ctx.params.update(total=total, transformed=transformed)


def cmd_transform(ctx: Context, args) -> None:
    seed = ctx.need_seed()
    spec = augplan.TransformSpec.from_mapping(ctx.section("transform"), seed=seed)
    plans = _load_plans(ctx)
    real = _read_manifest(ctx, "real")
    refs = []
    for name, plan in plans.items():
        if plan.transformed:
            refs += augplan.oversample_transform(real.classes[name], plan.transformed, spec,
                                                 ctx.artifact("transformed"), threads=ctx.threads)
    classes: dict[str, list] = {}
    for r in refs:
        classes.setdefault(r.class_name, []).append(r)
    manifest = DatasetManifest("transformed", classes, real.side, created_from="transform")
    dataset_io.write_manifest(manifest, ctx.artifact("manifests", "transformed.json"), root=ctx.out)
    print(f"transformed: {len(refs)} images")
    ctx.params.update(seed=seed, spec=spec.__dict__)


def cmd_compose(ctx: Context, args) -> None:
    method = _method(ctx, args.method)
    plans = _load_plans(ctx)
    real = _read_manifest(ctx, "real")
    transformed = _read_manifest(ctx, "transformed") if any(p.transformed for p in plans.values()) else None
    kept_ids: list[str] = []
    need_synthetic = {n: p.synthetic for n, p in plans.items() if p.synthetic}
    synthetic_kept = None
    if need_synthetic:
        synthetic = _read_manifest(ctx, "synthetic")
        for name, s in need_synthetic.items():
            if method == "fagt":
                outcome = filtering.read_outcome(
                    ctx.require("filter", f"fagt_{name}.json", producer="filter --method fagt"))
                kept_ids += outcome.kept_ids
            else:
                pool = [r.id for r in synthetic.classes.get(name, [])]
                if len(pool) < s:
                    raise DataError(f"synthetic pool for {name!r} has {len(pool)} images, plan needs {s}")
                kept_ids += pool[:s]
        synthetic_kept = synthetic.subset(kept_ids, "synthetic_kept")
    final = augplan.compose_final(real, transformed, synthetic_kept, plans)
    dataset_io.write_manifest(final, ctx.artifact("manifests", "final.json"), root=ctx.out)
    _write_text(ctx.artifact("composition.csv"), augplan.composition_csv(augplan.composition(final)))
    for row in augplan.composition(final):
        r, t, s = row.percentages()
        print(f"{row.class_name}: {row.total} images ({r:.1f}% real, {t:.1f}% transformed, {s:.1f}% synthetic)")
    ctx.params.update(method=method)


def cmd_split(ctx: Context, args) -> None:
    seed = ctx.need_seed()
    scfg = ctx.section("split")
    fraction = args.test_fraction or scfg.get("test_fraction")
    if fraction is None:
        raise UsageError("split needs --test-fraction (or split.test_fraction)")
    group_field = args.group_field or scfg.get("group_field")
    name = args.manifest or scfg.get("manifest") or (
        "final" if ctx.artifact("manifests", "final.json").exists() else "real")
    manifest = _read_manifest(ctx, name)
    spec = splitter.SplitSpec(float(fraction), int(seed), group_field)
    result = splitter.split(manifest, spec, strict=args.strict)
    splitter.write_split(result, ctx.artifact("split"))
    for note in result.warnings:
        print(f"warning: {note}", file=sys.stderr)
    print(f"split {name}: {len(result.train_ids)} train, {len(result.test_ids)} test")
    ctx.params.update(seed=seed, test_fraction=fraction, group_field=group_field, manifest=name)


def cmd_eval(ctx: Context, args) -> None:
    path = Path(args.predictions)
    if not path.exists():
        raise DataError(f"prediction file {path} not found")
    ctx.inputs.append(path)
    rows = metrics.read_predictions(path, check_argmax=not args.no_argmax_check)
    report = metrics.evaluate(rows, allow_zero_support=args.allow_zero_support)
    _write_text(ctx.artifact("eval", "report.json"), report.to_json())
    _write_text(ctx.artifact("eval", "report.txt"), report.to_text())
    print(report.to_text(), end="")


def histogram_csv(values: np.ndarray, bins: int = HIST_BINS) -> str:
    """Counts over ``bins`` equal-width bins of [0, 1]; 1.0 falls in the last bin."""
    idx = np.clip(np.floor(np.clip(values, 0.0, 1.0) * bins).astype(int), 0, bins - 1)
    counts = np.bincount(idx, minlength=bins)
    lines = ["bin_lo,bin_hi,count"]
    lines += [f"{i / bins:.2f},{(i + 1) / bins:.2f},{c}" for i, c in enumerate(counts)]
    return "\n".join(lines) + "\n"


def cmd_report(ctx: Context, args) -> None:
    rec_dir = ctx.artifact("records")
    files = sorted(rec_dir.glob("*.json")) if rec_dir.exists() else []
    if not files:
        raise StageOrderError(f"no record files in {rec_dir} (run `records` first)")
    for f in files:
        ctx.inputs.append(f)
        records = read_records(f)
        _write_text(ctx.artifact("report", f"hist_{f.stem}.csv"), histogram_csv(records.i_max()))
    final = ctx.artifact("manifests", "final.json")
    if final.exists():
        ctx.inputs.append(final)
        rows = augplan.composition(dataset_io.read_manifest(final))
        _write_text(ctx.artifact("report", "composition.csv"), augplan.composition_csv(rows))
    print(f"report: {len(files)} histogram(s) written to {ctx.artifact('report')}")


PIPELINE = ["ingest", "vectorize", "records", "filter", "plan", "transform", "compose", "split", "report"]


def cmd_run(ctx: Context, args) -> None:
    """Run every stage in order with config defaults."""
    method = _method(ctx, None)
    # FAGT keeps a count derived from the plan, so plan before filtering
    order = list(PIPELINE)
    if method == "fagt":
        order.remove("plan")
        order.insert(order.index("filter"), "plan")
    parser = build_parser()
    for stage in order:
        stage_args = parser.parse_args([stage])
        sub = Context(ctx.cfg, ctx.out, ctx.base, ctx.threads, ctx.seed, stage=stage)
        _run_stage(COMMANDS[stage], sub, stage_args)


COMMANDS: dict[str, Callable] = {
    "ingest": cmd_ingest, "vectorize": cmd_vectorize, "records": cmd_records,
    "filter": cmd_filter, "plan": cmd_plan, "transform": cmd_transform,
    "compose": cmd_compose, "split": cmd_split, "eval": cmd_eval, "report": cmd_report,
    "run": cmd_run, "make-toy": None,
}


def _run_stage(fn: Callable, ctx: Context, args) -> None:
    start = time.perf_counter()
    fn(ctx, args)
    if fn is not cmd_run:
        _log_run(ctx, time.perf_counter() - start)


# ---------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="pipeline configuration (TOML)")
    common.add_argument("--out", help="output directory (default: config output_dir or ./out)")
    common.add_argument("--threads", type=int, help="worker threads (default 1)")
    common.add_argument("--seed", type=int, help="seed for transform and split")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = _Parser(prog="simfilter", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("ingest", parents=[common], help="scan a dataset into a manifest")
    p.add_argument("--root")
    p.add_argument("--layout", choices=[l.value for l in dataset_io.Layout])
    p.add_argument("--origin", default="real", choices=[o.value for o in Origin])
    p.add_argument("--name", help="manifest name (default: the origin)")

    p = sub.add_parser("vectorize", parents=[common], help="rescale and vectorise images")
    p.add_argument("--manifest", action="append", help="manifest name (repeatable)")
    p.add_argument("--side", type=int)

    p = sub.add_parser("records", parents=[common], help="compute similarity records")
    p.add_argument("--method", choices=["fbgt", "fagt"])
    p.add_argument("--target", action="append", help="target class (repeatable)")
    p.add_argument("--secondary", action="append", help="fbgt secondary class (default: all others)")
    p.add_argument("--k-limit", type=int)

    p = sub.add_parser("filter", parents=[common], help="select kept/removed images")
    p.add_argument("--method", choices=["fbgt", "fagt"])
    p.add_argument("--target", action="append")
    p.add_argument("--alpha", type=float, action="append", help="retention ratio (repeatable)")
    p.add_argument("--keep", type=int, help="explicit number of images to keep")
    p.add_argument("--mode", choices=["remove-most-similar", "remove-most-dissimilar"])
    p.add_argument("--rounding", choices=["ceiling", "floor"])

    p = sub.add_parser("plan", parents=[common], help="per-class augmentation quotas")
    p.add_argument("--total", type=int)
    p.add_argument("--transformed", action="append", metavar="CLASS=COUNT")

    sub.add_parser("transform", parents=[common], help="oversample by geometric transforms")

    p = sub.add_parser("compose", parents=[common], help="merge real, transformed and synthetic")
    p.add_argument("--method", choices=["fbgt", "fagt"])

    p = sub.add_parser("split", parents=[common], help="group-aware train/test split")
    p.add_argument("--test-fraction", type=float)
    p.add_argument("--group-field")
    p.add_argument("--manifest")
    p.add_argument("--strict", action="store_true", help="fail instead of capping test counts")

    p = sub.add_parser("eval", parents=[common], help="metrics from a prediction CSV")
    p.add_argument("--predictions", required=True)
    p.add_argument("--allow-zero-support", action="store_true")
    p.add_argument("--no-argmax-check", action="store_true")

    sub.add_parser("report", parents=[common], help="similarity histograms and composition")
    sub.add_parser("run", parents=[common], help="run the whole pipeline from the config")

    p = sub.add_parser("make-toy", parents=[common], help="write the toy corpus and config")
    p.add_argument("directory")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # usage errors and --help
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "make-toy":
            root = toy.make_toy_corpus(args.directory)
            print(f"toy corpus and config written to {toy.write_toy_config(root)}")
            return EXIT_OK
        ctx = make_context(args)
        _run_stage(COMMANDS[args.command], ctx, args)
    except UsageError as exc:
        print(f"simfilter: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, ValueError) as exc:
        print(f"simfilter: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # noqa: BLE001
        log.debug("internal error", exc_info=True)
        print(f"simfilter: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
