"""
Module: commands
Handlers of the command-line subcommands; each returns the process exit code.
"""
import argparse
import hashlib
import json
import math
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Callable, List, Optional, Sequence, Tuple, TypeVar

from cli.config import RunConfig, config_hash, load_run_config
from inference.export import export_primitives
from inference.predictor import Predictor
from inference.schemas import CandidateSet, InferenceConfig
from inference.selection import refine_project, select
from logs.project_log import attach_step_log, detach_step_log, log_step, main_logger
from metrics.evaluation import aggregate, candidate_primitives, evaluate_ransac, evaluate_shape
from metrics.schemas import EvalReport
from network.checkpoint import load_checkpoint, save_checkpoint
from network.errors import NonFiniteLoss
from network.gradcheck import gradcheck
from network.model import init_params, layer_groups
from network.training import Sample, Trainer, diagnose
from scene.generator import generate_shape
from scene.lpc import read_lpc, read_scan, write_lpc
from scene.partial import add_noise, make_partial
from scene.schemas import PROTOCOL_RATIOS, LabeledCloud, ShapeSpec
from settings import settings

__all__ = ('UsageError', 'cmd_generate', 'cmd_train', 'cmd_eval', 'cmd_infer', 'cmd_gradcheck', 'cmd_robustness',
           'EXIT_OK', 'EXIT_FAILED', 'EXIT_USAGE', 'EXIT_NUMERIC', 'MANIFEST')

EXIT_OK, EXIT_FAILED, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3
MANIFEST = "manifest.json"

T = TypeVar("T")
Shapes = List[Tuple[str, LabeledCloud]]


class UsageError(Exception):
    """Bad arguments, paths or configuration."""


def _run_config(args: argparse.Namespace) -> RunConfig:
    return load_run_config(getattr(args, "config", None), getattr(args, "preset", "desk"))


def _fan_out(fn: Callable[..., T], items: Sequence) -> List[T]:
    """Maps ``fn`` over ``items`` on up to ``UNICO_THREADS`` threads; results keep input order."""
    workers = min(settings.worker_count, len(items))
    if workers <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _write_json(path: Path, payload: dict):
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _load_shapes(data_dir: str) -> Shapes:
    directory = Path(data_dir)
    if not directory.is_dir():
        raise UsageError(f"data directory {directory} does not exist")
    files = sorted(directory.glob("*.lpc"))
    if not files:
        raise UsageError(f"no .lpc shapes in {directory}")
    main_logger.info("loading %d shapes from %s", len(files), directory)
    return [(f.stem, read_lpc(f)) for f in files]


def _scans(shapes: Shapes, run: RunConfig, ratio: Optional[float] = None,
           sigma: Optional[float] = None) -> List[Sample]:
    """Partial scans of ``shapes``; shape i is cropped and jittered with seed ``run.seed + i``."""
    ratio = run.data.ratio if ratio is None else ratio
    sigma = run.data.sigma if sigma is None else sigma
    samples = []
    for i, (name, cloud) in enumerate(shapes):
        scan = make_partial(cloud, ratio, run.seed + i, run.data.partial_points, shape_id=name)
        if sigma > 0:
            scan = add_noise(scan, sigma, run.seed + i)
        samples.append((scan, cloud))
    return samples


def cmd_generate(args: argparse.Namespace) -> int:
    """Writes ``--count`` synthetic shapes and a manifest to ``--out``."""
    if args.count < 1:
        raise UsageError("--count must be positive")
    run = _run_config(args)
    spec = ShapeSpec.model_validate_json(Path(args.spec).read_text(encoding="utf-8")) if args.spec \
        else run.data.spec
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    def build(i: int) -> dict:
        seed = args.seed + i
        cloud = generate_shape(spec.model_copy(update={"seed": seed}), random_pose=args.random_pose)
        path = out / f"shape_{i:04d}.lpc"
        write_lpc(cloud, path)
        read_lpc(path)
        return {"file": path.name, "seed": seed, "primitives": cloud.primitive_count,
                "points": len(cloud.points), "types": cloud.type_counts(), "sha256": _sha256(path.read_bytes())}

    entries = _fan_out(build, list(range(args.count)))
    manifest = {"count": args.count, "seed": args.seed, "random_pose": args.random_pose,
                "spec": spec.model_dump(mode="json"), "spec_hash": config_hash(spec), "shapes": entries}
    manifest["hash"] = _sha256(json.dumps(manifest, sort_keys=True).encode("utf-8"))
    _write_json(out / MANIFEST, manifest)
    main_logger.info("generated %d shapes in %s (manifest %s)", args.count, out, manifest["hash"][:12])
    return EXIT_OK


def _data_hash(data_dir: str) -> str:
    manifest = Path(data_dir) / MANIFEST
    if manifest.is_file():
        return json.loads(manifest.read_text(encoding="utf-8")).get("hash", "")
    return _sha256(b"".join(f.read_bytes() for f in sorted(Path(data_dir).glob("*.lpc"))))


def cmd_train(args: argparse.Namespace) -> int:
    """Trains on the shapes in ``--data`` and writes a checkpoint, a step log and a run manifest."""
    run = _run_config(args)
    dataset = _scans(_load_shapes(args.data), run)
    params = state = None
    if args.resume:
        params, state = load_checkpoint(args.resume)
        if params.config != run.model:
            raise UsageError("checkpoint architecture differs from the run config")
        main_logger.info("resuming from %s at step %d", args.resume, state.step if state else 0)
    static_targets = args.static_targets or run.static_targets
    trainer = Trainer(run.model, run.optimizer, run.weights, params, state, two_stage=run.two_stage,
                      static_targets=static_targets)
    start = trainer.state.step
    steps = args.steps if args.steps is not None else \
        run.optimizer.epochs * math.ceil(len(dataset) / run.optimizer.batch_size)

    out = Path(args.out)
    handler = attach_step_log(args.log or str(out.with_suffix(".jsonl")))
    try:
        history = trainer.fit(dataset, steps, log_every=args.log_every)
    except NonFiniteLoss as exc:
        main_logger.error("training diverged at step %d in %s", trainer.state.step, exc.term, exc_info=True)
        log_step({"step": trainer.state.step, "error": "non_finite", "term": exc.term})
        return EXIT_NUMERIC
    finally:
        detach_step_log(handler)

    save_checkpoint(out, trainer.params, trainer.state)
    load_checkpoint(out)
    diagnostics = diagnose(dataset, trainer.params, run.weights)
    main_logger.info("fit on training shapes: type %.3f iou %.3f theta-l1 %.4f over %d pairs",
                     diagnostics.type_accuracy, diagnostics.membership_iou, diagnostics.parameter_l1,
                     diagnostics.matched)
    _write_json(out.with_suffix(".manifest.json"), {
        "config": run.model_dump(mode="json", by_alias=True), "config_hash": config_hash(run),
        "data": str(args.data), "data_hash": _data_hash(args.data), "start_step": start,
        "final_step": trainer.state.step, "seed": run.seed,
        "initial_total": history[0]["total"] if history else None,
        "final_total": history[-1]["total"] if history else None,
        "static_targets": static_targets, "diagnostics": diagnostics.model_dump(),
    })
    if history:
        main_logger.info("trained %d steps: total %.6f -> %.6f", len(history), history[0]["total"],
                         history[-1]["total"])
    return EXIT_OK


def _write_report(path: Path, reports: List[EvalReport], names: List[str]) -> EvalReport:
    """Writes the aggregate to ``path`` and the per-shape reports next to it."""
    summary = aggregate(reports)
    path.write_text(summary.model_dump_json(indent=2) + "\n", encoding="utf-8")
    EvalReport.model_validate_json(path.read_text(encoding="utf-8"))
    with open(path.with_suffix(".shapes.jsonl"), "w", encoding="utf-8") as f:
        for name, report in zip(names, reports):
            f.write(json.dumps({"shape": name, **report.model_dump(mode="json")}, sort_keys=True) + "\n")
    main_logger.info("report %s: cd=%s cov=%.2f over %d shapes", path, summary.cd, summary.cov, summary.shapes)
    return summary


def _sweep_path(report: Path, threshold: float) -> Path:
    return report.with_name(f"{report.stem}_t{threshold:.2f}{report.suffix}")


def _inference_config(run: RunConfig, args: argparse.Namespace, **extra) -> InferenceConfig:
    updates = {key: value for key, value in {"threshold": getattr(args, "threshold", None),
                                             "source": getattr(args, "source", None), **extra}.items()
               if value is not None}
    return InferenceConfig.model_validate({**run.inference.model_dump(), **updates})


def _predicted(candidates: CandidateSet, cfg: InferenceConfig, threshold: float):
    selected = select(candidates, threshold)
    if cfg.project:
        selected = CandidateSet(candidates=[refine_project(c) for c in selected])
    return candidate_primitives(selected)


def cmd_eval(args: argparse.Namespace) -> int:
    """
    Evaluates a checkpoint, the ground truth itself (``--oracle``) or the RANSAC
    baseline on the partial scans of ``--data``; one report per threshold.
    """
    run = _run_config(args)
    if not (args.model or args.oracle or args.baseline):
        raise UsageError("eval needs --model, --oracle or --baseline")
    samples = _scans(_load_shapes(args.data), run)
    names = [scan.source.shape_id for scan, _ in samples]
    report = Path(args.report)

    if args.oracle:
        reports = _fan_out(lambda s: evaluate_shape(s[1].primitives, s[1], run.evaluation), samples)
        _write_report(report, reports, names)
        return EXIT_OK
    if args.baseline:
        reports = _fan_out(lambda s: evaluate_ransac(s[0].points, s[1], run.ransac, run.evaluation), samples)
        _write_report(report, reports, names)
        return EXIT_OK

    cfg = _inference_config(run, args, project=args.project or None)
    predictor = Predictor.from_checkpoint(args.model, cfg)
    thresholds = args.thresholds or [cfg.threshold]
    candidates = _fan_out(lambda s: predictor.candidates(s[0].points), samples)
    for threshold in thresholds:
        reports = _fan_out(lambda pair: evaluate_shape(_predicted(pair[0], cfg, threshold), pair[1][1],
                                                       run.evaluation), list(zip(candidates, samples)))
        _write_report(_sweep_path(report, threshold) if args.thresholds else report, reports, names)
    return EXIT_OK


def cmd_infer(args: argparse.Namespace) -> int:
    """Exports the primitives predicted for one partial scan."""
    run = _run_config(args)
    cfg = _inference_config(run, args, project=args.project or None,
                            include_points=False if args.no_points else None)
    scan = read_scan(args.input)
    predictor = Predictor.from_checkpoint(args.model, cfg)
    records = export_primitives(predictor.predict(scan.points), args.out, cfg.include_points)
    main_logger.info("wrote %d primitives to %s", len(records), args.out)
    return EXIT_OK


def cmd_gradcheck(args: argparse.Namespace) -> int:
    """Runs the finite-difference suite over ``--seeds`` seeds; exit code 1 on any failure."""
    run = _run_config(args)
    if args.corrupt and args.corrupt not in layer_groups(init_params(run.model)):
        raise UsageError(f"unknown layer {args.corrupt!r}")
    reports = [gradcheck(run.model, seed, args.tol, args.corrupt, args.samples) for seed in range(args.seeds)]
    for report in reports:
        for layer in report.layers:
            main_logger.info("seed %d %-28s max rel error %.3e (%d entries)%s", report.seed, layer.layer,
                             layer.max_rel_error, layer.checked, "" if layer.passed else "  FAIL")
    if args.report:
        _write_json(Path(args.report), {"passed": all(r.passed for r in reports),
                                        "reports": [r.model_dump(mode="json") for r in reports]})
    failed = [r for r in reports if not r.passed]
    if failed:
        worst = max((r.worst for r in failed), key=lambda layer: layer.max_rel_error)
        main_logger.error("gradcheck failed: worst layer %s (%s), relative error %.3e", worst.layer,
                          worst.worst_parameter, worst.max_rel_error)
        return EXIT_FAILED
    main_logger.info("gradcheck passed for %d seeds at tol %.1e", len(reports), args.tol)
    return EXIT_OK


def cmd_robustness(args: argparse.Namespace) -> int:
    """Writes one evaluation report per incompleteness ratio and per noise level."""
    run = _run_config(args)
    if not (args.model or args.baseline):
        raise UsageError("robustness needs --model or --baseline")
    shapes = _load_shapes(args.data)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    predictor = None if args.baseline else Predictor.from_checkpoint(args.model, _inference_config(run, args))

    def evaluate(sample: Sample) -> EvalReport:
        scan, cloud = sample
        if predictor is None:
            return evaluate_ransac(scan.points, cloud, run.ransac, run.evaluation)
        return evaluate_shape(candidate_primitives(predictor.predict(scan.points)), cloud, run.evaluation)

    sweeps = [(f"ratio_{r:.2f}", r, None) for r in (args.ratios or PROTOCOL_RATIOS)]
    sweeps += [(f"sigma_{s:.3f}", None, s) for s in (args.sigmas or [])]
    for tag, ratio, sigma in sweeps:
        samples = _scans(shapes, run, ratio, sigma)
        _write_report(out / f"robustness_{tag}.json", _fan_out(evaluate, samples),
                      [scan.source.shape_id for scan, _ in samples])
    return EXIT_OK
