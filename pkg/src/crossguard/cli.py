"""Command-line surface: fuse, eval-det, eval-seg, calibrate, simulate, control, bench.

Exit codes: 0 on success, 2 on usage/parse/constraint errors.
Diagnostics go to stderr; data goes to files.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
import time

import numpy as np

from . import controller, fusion, logs, metrics, segmentation, simulator
from .controller import ControllerConfig, CrossingState, TickInput
from .fusion import Detection, FusedDetection, ModelWeights
from .geometry import BBox
from .metrics import GroundTruthObject


def _split_records(records):
    dets = [r for r in records if isinstance(r, (Detection, FusedDetection))]
    truths = [r for r in records if isinstance(r, GroundTruthObject)]
    return dets, truths


def _load_preds(path):
    dets, truths = _split_records(logs.load_detection_log(path))
    if truths:
        raise ValueError(f"{path}: ground-truth records in a prediction log")
    return dets

def _load_truths(path):
    dets, truths = _split_records(logs.load_detection_log(path))
    if dets:
        raise ValueError(f"{path}: prediction records in a ground-truth log")
    return truths


def cmd_fuse(args) -> int:
    dets = _load_preds(args.infile)
    if any(isinstance(d, FusedDetection) for d in dets):
        raise ValueError(f"{args.infile}: input is already fused")
    weights = None
    if args.weights:
        weights = ModelWeights(weights=fusion.load_weights(args.weights))
        dets = [fusion.calibrate_confidence(d, weights) for d in dets]
    fused = []
    for frame in sorted({d.frame_id for d in dets}):
        frame_dets = [d for d in dets if d.frame_id == frame]
        fused.extend(fusion.fuse_frame(frame_dets, args.models, args.iou_thresh))
    logs.save_detection_log(fused, args.out)
    return 0


def cmd_eval_det(args) -> int:
    if args.from_matrix:
        cm = metrics.load_confusion_matrix(args.from_matrix)
        report = metrics.render_report(cm)
    else:
        if not (args.pred and args.truth):
            raise ValueError("need --pred and --truth (or --from-matrix)")
        preds = _load_preds(args.pred)
        truths = _load_truths(args.truth)
        cm = metrics.evaluate_detections(preds, truths, args.iou_thresh)
        report = metrics.render_report(cm, preds, truths, args.iou_thresh)
    with open(args.report, "w", encoding="ascii") as fh:
        fh.write(report)
    return 0


def cmd_eval_seg(args) -> int:
    pred = segmentation.read_prob_mask(args.pred)
    truth = segmentation.read_binary_mask(args.truth)
    mean_iou = segmentation.mask_mean_iou(segmentation.threshold_mask(pred), truth)
    bce = segmentation.bce_loss(truth, pred)
    print(f"mean_iou {mean_iou:.6f}")
    print(f"bce {bce:.6f}")
    return 0


def cmd_calibrate(args) -> int:
    preds = _load_preds(args.pred)
    truths = _load_truths(args.truth)
    matches: list[tuple[str, float, int]] = []
    for frame in sorted({p.frame_id for p in preds} | {t.frame_id for t in truths}):
        fp = [p for p in preds if p.frame_id == frame]
        ft = [t for t in truths if t.frame_id == frame]
        for m in metrics.match_detections(fp, ft, args.iou_thresh):
            pred = fp[m.pred_index]
            matches.append((pred.source_id, pred.confidence, int(m.is_tp)))
    weights = ModelWeights(weights={}, alpha=args.alpha)
    for _ in range(args.passes):
        weights = fusion.update_model_weights(weights, matches)
    sources = sorted({p.source_id for p in preds})
    fusion.save_weights({s: weights.get(s) for s in sources}, args.out)
    if matches:
        pairs = [(y, min(1.0, max(0.0, weights.get(s) * conf)))
                 for s, conf, y in matches]
        print(f"loss {fusion.ensemble_loss(pairs):.6f}")
    else:
        print("loss 0.000000")
    return 0


def cmd_simulate(args) -> int:
    scenario = simulator.load_scenario(args.scenario)
    if args.seed is not None:
        scenario = dataclasses.replace(scenario, seed=args.seed)
    simulator.run_simulation(scenario, out_dir=args.out_dir)
    return 0


def _parse_roi(text: str) -> BBox:
    parts = text.split(",")
    if len(parts) != 4:
        raise ValueError(f"--roi needs X1,Y1,X2,Y2, got {text!r}")
    return BBox(*(float(p) for p in parts))


def cmd_control(args) -> int:
    dets = _load_preds(args.detections)
    signals = logs.load_signals(args.signals)
    roi = _parse_roi(args.roi)
    config = ControllerConfig(
        score_threshold=args.score_threshold, n_on=args.n_on,
        n_off=args.n_off, min_confidence=args.min_confidence)
    by_frame: dict[int, list] = {}
    for d in dets:
        by_frame.setdefault(d.frame_id, []).append(d)
    state = CrossingState()
    with open(args.out, "w", encoding="ascii") as fh:
        for tick, s1, s2 in signals:
            inp = TickInput(s1, s2, by_frame.get(tick, []), roi)
            state, events = controller.step(state, inp, config)
            for e in events:
                fh.write(controller.render_event(e) + "\n")
    return 0


def cmd_bench(args) -> int:
    """Throughput check: fused frame of 3x20 detections plus one controller step."""
    rng = np.random.default_rng(12345)
    classes = sorted(fusion.KNOWN_CLASSES)
    dets = []
    for source in ("yolo-s", "yolo-m", "yolo-l"):
        for _ in range(20):
            x1 = rng.uniform(0, 600)
            y1 = rng.uniform(0, 440)
            dets.append(Detection(
                0, source, classes[rng.integers(len(classes))],
                round(float(rng.uniform(0.3, 0.99)), 6),
                BBox(x1, y1, x1 + rng.uniform(5, 40), y1 + rng.uniform(5, 40))))
    roi = BBox(100, 100, 400, 300)
    config = ControllerConfig()
    state = CrossingState()

    start = time.perf_counter()
    for _ in range(args.frames):
        fused = fusion.fuse_frame(dets, 3)
        state, _events = controller.step(
            state, TickInput(0.0, 0.0, fused, roi), config)
    elapsed = time.perf_counter() - start
    fps = args.frames / elapsed
    print(f"fps {fps:.1f}")
    if fps < 100.0:
        print(f"throughput below 100 fps budget: {fps:.1f}", file=sys.stderr)
        return 2
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="crossguard",
        description="Grade-crossing detection fusion, evaluation, and control")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fuse", help="fuse a multi-source detection log")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--iou-thresh", type=float, default=0.5)
    p.add_argument("--models", type=int, required=True,
                   help="ensemble size K (>= distinct sources in the log)")
    p.add_argument("--weights", default=None)
    p.set_defaults(func=cmd_fuse)

    p = sub.add_parser("eval-det", help="evaluate detections against ground truth")
    p.add_argument("--pred")
    p.add_argument("--truth")
    p.add_argument("--iou-thresh", type=float, default=0.5)
    p.add_argument("--report", required=True)
    p.add_argument("--from-matrix", default=None,
                   help="score a prebuilt confusion matrix instead of raw logs")
    p.set_defaults(func=cmd_eval_det)

    p = sub.add_parser("eval-seg", help="score a probability mask against a binary mask")
    p.add_argument("--pred", required=True)
    p.add_argument("--truth", required=True)
    p.set_defaults(func=cmd_eval_seg)

    p = sub.add_parser("calibrate", help="fit per-source confidence weights")
    p.add_argument("--pred", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--alpha", type=float, default=0.1)
    p.add_argument("--passes", type=int, default=1)
    p.add_argument("--iou-thresh", type=float, default=0.5)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("simulate", help="run a scenario end to end")
    p.add_argument("--scenario", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("control", help="replay the controller over logs")
    p.add_argument("--detections", required=True)
    p.add_argument("--signals", required=True)
    p.add_argument("--roi", required=True, help="X1,Y1,X2,Y2")
    p.add_argument("--out", required=True)
    p.add_argument("--score-threshold", type=float, default=0.10)
    p.add_argument("--n-on", type=int, default=3)
    p.add_argument("--n-off", type=int, default=5)
    p.add_argument("--min-confidence", type=float, default=0.25)
    p.set_defaults(func=cmd_control)

    p = sub.add_parser("bench", help="measure fusion + controller throughput")
    p.add_argument("--frames", type=int, default=300)
    p.set_defaults(func=cmd_bench)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
