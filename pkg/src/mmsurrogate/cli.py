"""Command-line surface.

Subcommands: ``explain`` (run one explanation), ``evaluate`` (score
explanation files against annotation files), ``agreement`` (inter-annotator
IoU), ``baseline`` (random-explanation lower bound), ``render`` (SVG overlay
+ HTML listing), and ``fixture`` (generate a synthetic instance, model, and
ideal annotation for desk-scale experiments).

Exit codes: 0 success, 1 configuration error, 2 predictor failure, 3 input
error.  Every file-producing command writes a run manifest alongside its
output.  A predictor can also be supplied via the MMSURROGATE_PREDICTOR
environment variable.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, evaluate as ev, explain as ex, render as rd
from .model import (
    ExplainerConfig,
    ExpertAnnotation,
    Instance,
    SchemaError,
    ValidationError,
    load_explanation,
    read_json,
    save_annotations,
    save_explanation,
    save_instance,
    validate_config,
    write_json,
    FORMAT_VERSION,
)
from .predictor import (
    PredictorError,
    SyntheticLogisticModel,
    FindingWeights,
    build_predictor,
    save_model,
)
from .seeding import derive_seed

log = logging.getLogger("mmsurrogate")

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_PREDICTOR = 2
EXIT_INPUT = 3

# report vocabulary for generated fixtures; extended with wNN tokens on demand
FIXTURE_VOCABULARY = (
    "the heart is normal in size lungs are clear no acute cardiopulmonary "
    "abnormality there mild cardiomegaly with bilateral pleural effusion small "
    "calcified nodule right upper lobe left lower atelectasis seen stable "
    "degenerative changes of spine opacity costophrenic angle blunting "
    "granulomatous process innumerable nodules scattered throughout both "
    "infiltrate retrocardiac"
).split()


class UsageError(ValueError):
    """Bad command-line arguments; exits with the config-error code."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        # argparse would exit(2), which collides with the predictor-failure code
        raise UsageError(message)


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON file with explainer configuration defaults")
    p.add_argument("--samples", type=int, help="perturbation samples per modality")
    p.add_argument("--p-text", type=float, dest="p_text", help="text inactivation probability")
    p.add_argument("--p-visual", type=float, dest="p_visual", help="visual inactivation probability")
    p.add_argument("--sigma", type=float, help="kernel width")
    p.add_argument("--lambda", type=float, dest="ridge_lambda", help="ridge penalty")
    p.add_argument("--k-words", type=int, dest="k_words", help="words to output")
    p.add_argument("--k-boxes", type=int, dest="k_boxes", help="boxes to output")
    p.add_argument("--strategy", choices=("zero", "mean-std", "randomize"))
    p.add_argument("--target", choices=("probability", "loss"))
    p.add_argument("--seed", type=int, help="root seed for all randomness")


_CONFIG_FLAGS = {
    "samples": "samples",
    "p_text": "p_text",
    "p_visual": "p_visual",
    "sigma": "kernel_width",
    "ridge_lambda": "ridge_lambda",
    "k_words": "k_words",
    "k_boxes": "k_boxes",
    "strategy": "strategy",
    "target": "target",
    "seed": "seed",
}


def _resolve_config(args) -> ExplainerConfig:
    """CLI flag > config file > built-in default."""
    values = {}
    if getattr(args, "config", None):
        file_cfg = read_json(args.config)
        if not isinstance(file_cfg, dict):
            raise SchemaError(f"{args.config}: config file must hold a JSON object")
        values.update(
            {k: v for k, v in file_cfg.items() if k != "format_version"}
        )
    for attr, field_name in _CONFIG_FLAGS.items():
        flag = getattr(args, attr, None)
        if flag is not None:
            values[field_name] = flag
    try:
        return validate_config(ExplainerConfig.from_dict(values))
    except (SchemaError, ValidationError) as exc:
        raise UsageError(str(exc)) from exc


def _write_manifest(path, command, args, config, inputs, outputs, wall_clock, seed):
    manifest = {
        "format_version": FORMAT_VERSION,
        "command": command,
        "argv": list(args),
        "config": config.to_dict() if config is not None else None,
        "inputs": inputs,
        "outputs": [str(o) for o in outputs],
        "wall_clock_s": wall_clock,
        "engine_version": __version__,
        "seed": seed,
    }
    write_json(manifest, path)


# ---------------------------------------------------------------------------
# directory scanning


def _scan_dir(path, kind):
    """Yield (path, parsed dict) for every JSON file of the requested kind.

    Kind is sniffed from payload shape so mixed fixture directories work:
    embeddings => instance, annotator_id => annotation, word_items =>
    explanation, kind => model.
    """
    markers = {
        "instance": "embeddings",
        "annotation": "annotator_id",
        "explanation": "word_items",
    }
    marker = markers[kind]
    root = Path(path)
    if root.is_file():
        candidates = [root]
    elif root.is_dir():
        candidates = sorted(root.glob("*.json"))
    else:
        raise SchemaError(f"{path}: no such file or directory")
    for candidate in candidates:
        try:
            data = json.loads(candidate.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise SchemaError(f"{candidate}: unreadable JSON: {exc}") from exc
        if isinstance(data, dict) and marker in data:
            yield candidate, data
        elif isinstance(data, list) and kind == "annotation":
            if any(isinstance(d, dict) and marker in d for d in data):
                yield candidate, data


def _load_annotation_payload(path, data) -> list:
    if isinstance(data, list):
        return [ExpertAnnotation.from_dict(d) for d in data]
    return [ExpertAnnotation.from_dict(data)]


def _load_all(path, kind) -> list:
    out = []
    for candidate, data in _scan_dir(path, kind):
        if kind == "instance":
            out.append(Instance.from_dict(data))
        elif kind == "annotation":
            out.extend(_load_annotation_payload(candidate, data))
        else:
            out.append(load_explanation(candidate))
    return out


# ---------------------------------------------------------------------------
# subcommands


def cmd_explain(args, argv) -> int:
    config = _resolve_config(args)
    instance = Instance.from_dict(read_json(args.instance))
    spec = args.predictor or os.environ.get("MMSURROGATE_PREDICTOR")
    if not spec:
        raise UsageError("no predictor: pass --predictor or set MMSURROGATE_PREDICTOR")
    started = time.perf_counter()
    with build_predictor(spec) as predictor:
        if predictor.findings is not None and args.finding not in predictor.findings:
            raise UsageError(
                f"unknown finding {args.finding!r}; known labels: {sorted(predictor.findings)}"
            )
        try:
            if args.mode == "separate":
                explanation = ex.explain_separate(instance, args.finding, predictor, config)
            else:
                explanation = ex.explain_simultaneous(instance, args.finding, predictor, config)
        except ValidationError as exc:
            if "unknown finding" in str(exc):
                raise UsageError(str(exc)) from exc
            raise
    out = Path(args.out or f"{instance.id}.{args.finding}.{args.mode}.explanation.json")
    save_explanation(explanation, out)
    _write_manifest(
        out.with_name(out.name + ".manifest.json"),
        "explain",
        argv,
        config,
        {"instance": str(args.instance), "predictor": spec},
        [out],
        time.perf_counter() - started,
        config.seed,
    )
    log.info("wrote %s", out)
    print(out)
    return EXIT_OK


def _emit_report(reports, args, argv, inputs, started, seed=None) -> None:
    text = ev.format_reports(reports, args.format)
    if args.out:
        out = Path(args.out)
        out.write_text(text, encoding="utf-8")
        _write_manifest(
            out.with_name(out.name + ".manifest.json"),
            args.command,
            argv,
            None,
            inputs,
            [out],
            time.perf_counter() - started,
            seed,
        )
        log.info("wrote %s", out)
    sys.stdout.write(text)


def cmd_evaluate(args, argv) -> int:
    started = time.perf_counter()
    explanations = _load_all(args.explanations, "explanation")
    annotations = _load_all(args.annotations, "annotation")
    joined = []
    for explanation in explanations:
        for annotation in annotations:
            if annotation.instance_id != explanation.instance_id:
                continue
            if annotation.finding_context and explanation.finding not in annotation.finding_context:
                continue
            joined.append((explanation, annotation))
    if args.jobs and args.jobs > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            pairs = list(pool.map(lambda pair: ev.evaluate_pair(*pair), joined))
    else:
        pairs = [ev.evaluate_pair(e, a) for e, a in joined]
    if not pairs:
        raise SchemaError("no (instance_id, finding) pair joins an explanation to an annotation")
    group_by = tuple(k for k in args.group_by.split(",") if k) if args.group_by else ()
    reports = ev.aggregate(pairs, group_by) if group_by else list(pairs)
    inputs = {"explanations": str(args.explanations), "annotations": str(args.annotations)}
    _emit_report(reports, args, argv, inputs, started)
    return EXIT_OK


def cmd_agreement(args, argv) -> int:
    started = time.perf_counter()
    annotations = _load_all(args.annotations, "annotation")
    reports = ev.inter_annotator_agreement(annotations)
    if not reports:
        print("warning: no annotator pair shares any annotated item", file=sys.stderr)
    _emit_report(reports, args, argv, {"annotations": str(args.annotations)}, started)
    return EXIT_OK


def cmd_baseline(args, argv) -> int:
    started = time.perf_counter()
    instances = _load_all(args.instances, "instance")
    annotations = _load_all(args.annotations, "annotation")
    reports = ev.baseline_run(
        instances, annotations, args.k_words, args.k_boxes, args.trials, args.seed,
        jobs=args.jobs,
    )
    inputs = {"instances": str(args.instances), "annotations": str(args.annotations)}
    _emit_report(reports, args, argv, inputs, started, seed=args.seed)
    return EXIT_OK


def cmd_render(args, argv) -> int:
    started = time.perf_counter()
    instance = Instance.from_dict(read_json(args.instance))
    explanation = load_explanation(args.explanation)
    annotation = None
    if args.annotation:
        payloads = _load_all(args.annotation, "annotation")
        matching = [a for a in payloads if a.instance_id == explanation.instance_id]
        if not matching:
            raise SchemaError(f"{args.annotation}: no annotation for instance {explanation.instance_id!r}")
        annotation = matching[0]
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = f"{explanation.instance_id}.{explanation.finding}.{explanation.mode}"
    overlay = rd.render_image_overlay(
        instance, explanation, annotation, background=args.image or ""
    )
    overlay_path = out_dir / f"{stem}.overlay.svg"
    overlay_path.write_text(overlay.to_svg(), encoding="utf-8")
    listing_path = out_dir / f"{stem}.listing.html"
    listing_path.write_text(
        rd.render_text_listing(instance, explanation, annotation), encoding="utf-8"
    )
    _write_manifest(
        out_dir / f"{stem}.render.manifest.json",
        "render",
        argv,
        None,
        {
            "instance": str(args.instance),
            "explanation": str(args.explanation),
            "annotation": str(args.annotation or ""),
            "image": str(args.image or ""),
        },
        [overlay_path, listing_path],
        time.perf_counter() - started,
        None,
    )
    print(overlay_path)
    print(listing_path)
    return EXIT_OK


def cmd_fixture(args, argv) -> int:
    started = time.perf_counter()
    if args.hot_words > args.words:
        raise UsageError(f"--hot-words {args.hot_words} exceeds --words {args.words}")
    if args.hot_boxes > args.boxes:
        raise UsageError(f"--hot-boxes {args.hot_boxes} exceeds --boxes {args.boxes}")
    if min(args.words, args.boxes, args.dim, args.hot_words, args.hot_boxes) < 1:
        raise UsageError("all fixture counts must be positive")
    instance, model, annotation = build_fixture(
        words=args.words,
        boxes=args.boxes,
        dim=args.dim,
        hot_words=args.hot_words,
        hot_boxes=args.hot_boxes,
        seed=args.seed,
        finding=args.finding,
        bias=args.bias,
        weight=args.weight,
    )
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = [out_dir / "instance.json", out_dir / "model.json", out_dir / "annotation.json"]
    save_instance(instance, paths[0])
    save_model(model, paths[1])
    save_annotations([annotation], paths[2])
    _write_manifest(
        out_dir / "fixture.manifest.json",
        "fixture",
        argv,
        None,
        {},
        paths,
        time.perf_counter() - started,
        args.seed,
    )
    for p in paths:
        print(p)
    return EXIT_OK


def build_fixture(
    words=20,
    boxes=36,
    dim=8,
    hot_words=3,
    hot_boxes=3,
    seed=0,
    finding="nodule",
    bias=-2.0,
    weight=2.0,
    instance_id=None,
):
    """Synthetic instance + ground-truth logistic model + ideal annotation.

    The annotation's words and boxes are exactly the model's hot features,
    i.e. the annotator who agrees perfectly with the planted signal.
    """
    rng = np.random.default_rng(derive_seed(seed, "fixture"))
    vocabulary = list(FIXTURE_VOCABULARY)
    while len(vocabulary) < words:
        vocabulary.append(f"w{len(vocabulary):03d}")
    report = list(rng.permutation(vocabulary[:words]))
    width = height = 512
    cells = int(np.ceil(np.sqrt(boxes)))
    cell = width // cells
    box_rows = []
    for j in range(boxes):
        cx = (j % cells) * cell
        cy = (j // cells) * cell
        x1 = cx + int(rng.integers(0, max(cell // 4, 1)))
        y1 = cy + int(rng.integers(0, max(cell // 4, 1)))
        x2 = min(cx + cell - int(rng.integers(0, max(cell // 8, 1))), width)
        y2 = min(cy + cell - int(rng.integers(0, max(cell // 8, 1))), height)
        box_rows.append([x1, y1, max(x2, x1 + 2), max(y2, y1 + 2)])
    embeddings = rng.standard_normal((boxes, dim))
    instance = Instance(
        id=instance_id or f"fixture-{seed}",
        words=tuple(report),
        image_width=width,
        image_height=height,
        boxes=box_rows,
        embeddings=embeddings,
        gold_findings=frozenset({finding}),
    )
    hot_word_list = sorted(rng.choice(instance.unique_words, size=hot_words, replace=False).tolist())
    hot_box_list = sorted(int(i) for i in rng.choice(boxes, size=hot_boxes, replace=False))
    model = SyntheticLogisticModel(
        findings=(
            (
                finding,
                FindingWeights(
                    bias=bias,
                    word_weights=tuple((w, weight) for w in hot_word_list),
                    box_weights=tuple((i, weight) for i in hot_box_list),
                ),
            ),
        )
    )
    annotation = ExpertAnnotation(
        annotator_id="oracle",
        instance_id=instance.id,
        finding_context=frozenset({finding}),
        words=frozenset(hot_word_list),
        boxes=tuple(tuple(instance.boxes[i]) for i in hot_box_list),
    )
    return instance, model, annotation


# ---------------------------------------------------------------------------
# parser


def build_parser() -> _Parser:
    parser = _Parser(prog="mmsurrogate", description=__doc__.splitlines()[0])
    parser.add_argument("--verbose", "-v", action="count", default=0)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("explain", help="explain one (instance, finding) pair")
    p.add_argument("--instance", required=True)
    p.add_argument("--finding", required=True)
    p.add_argument("--mode", choices=("separate", "simultaneous"), default="separate")
    p.add_argument("--predictor", help="synthetic:<path> | cmd:<argv> | url:<endpoint>")
    p.add_argument("--out")
    _add_config_flags(p)
    p.set_defaults(func=cmd_explain)

    p = sub.add_parser("evaluate", help="score explanations against annotations")
    p.add_argument("--explanations", required=True, help="file or directory")
    p.add_argument("--annotations", required=True, help="file or directory")
    p.add_argument("--group-by", dest="group_by", default="", help="comma list: mode,annotator,predictor")
    p.add_argument("--format", choices=("json", "table"), default="table")
    p.add_argument("--out")
    p.add_argument(
        "--jobs", type=int, default=os.cpu_count() or 1, help="parallel workers (default: CPUs)"
    )
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("agreement", help="pairwise inter-annotator agreement")
    p.add_argument("--annotations", required=True)
    p.add_argument("--format", choices=("json", "table"), default="table")
    p.add_argument("--out")
    p.set_defaults(func=cmd_agreement)

    p = sub.add_parser("baseline", help="random-explanation lower bound")
    p.add_argument("--instances", required=True)
    p.add_argument("--annotations", required=True)
    p.add_argument("--k-words", dest="k_words", type=int, default=5)
    p.add_argument("--k-boxes", dest="k_boxes", type=int, default=3)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--format", choices=("json", "table"), default="table")
    p.add_argument("--out")
    p.add_argument(
        "--jobs", type=int, default=os.cpu_count() or 1, help="parallel workers (default: CPUs)"
    )
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("render", help="SVG overlay and HTML word listing")
    p.add_argument("--instance", required=True)
    p.add_argument("--explanation", required=True)
    p.add_argument("--annotation")
    p.add_argument("--image", help="background image path referenced by the overlay")
    p.add_argument("--out-dir", dest="out_dir", default=".")
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("fixture", help="generate a synthetic instance/model/annotation trio")
    p.add_argument("--words", type=int, default=20)
    p.add_argument("--boxes", type=int, default=36)
    p.add_argument("--dim", type=int, default=8)
    p.add_argument("--hot-words", dest="hot_words", type=int, default=3)
    p.add_argument("--hot-boxes", dest="hot_boxes", type=int, default=3)
    p.add_argument("--finding", default="nodule")
    p.add_argument("--bias", type=float, default=-2.0)
    p.add_argument("--weight", type=float, default=2.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", dest="out_dir", default=".")
    p.set_defaults(func=cmd_fixture)

    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args, argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except PredictorError as exc:
        print(f"predictor error: {exc}", file=sys.stderr)
        return EXIT_PREDICTOR
    except (SchemaError, ValidationError, OSError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
