"""Command-line pipeline: generate -> assign -> train/ablate -> nms -> eval.

Exit codes: 0 on success, 1 on usage errors, 2 on data errors (missing
or malformed files, inconsistent inputs). All randomness sits behind
--seed and every subcommand writes byte-identical output for identical
inputs and flags.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys

import numpy as np

from . import __version__
from .assignment import (
    POSITIVE,
    AssignmentConfig,
    assign,
    distribution_dump,
    write_distribution_csv,
)
from .boxcodec import BoxDeltas
from .decay import parse_decay
from .evalmr import SUBSETS, mr2
from .losses import LossConfig, SignProbs, box_loss, cls_loss, refine, sign_loss, softmax
from .synth import (
    SceneConfig,
    generate,
    read_detections_jsonl,
    read_scenes_jsonl,
    simulate_detections,
    write_detections_jsonl,
    write_scenes_jsonl,
)
from .trainer import TrainerConfig, ablation, train
from .nms import nms

# column order mirrors the ablation row order
ABLATION_FIELDS = ("row", "gamma", "sigma", "eta", "refined", "mae", "mr2", "sign_accuracy")


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; this tool reserves 2 for data errors."""

    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(1)


def _pair(text: str, cast) -> tuple:
    parts = text.split(",")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"expected two comma-separated values, got {text!r}")
    try:
        return (cast(parts[0]), cast(parts[1]))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def _int_pair(text: str):
    return _pair(text, int)


def _float_pair(text: str):
    return _pair(text, float)


def _decay(text: str):
    try:
        return parse_decay(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="visiou", description=__doc__)
    parser.add_argument("--version", action="version", version=f"visiou {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", parents=[], help="generate synthetic scenes (JSONL)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--scenes", type=int, default=10, help="number of scenes")
    p.add_argument("--out", required=True, help="output scenes JSONL path")
    p.add_argument("--num-peds", type=_int_pair, default=(3, 8), metavar="LO,HI")
    p.add_argument("--image-size", type=_float_pair, default=(640.0, 480.0), metavar="W,H")
    p.add_argument("--height-range", type=_float_pair, default=(55.0, 200.0), metavar="LO,HI")
    p.add_argument("--aspect-ratio", type=float, default=0.41)
    p.add_argument("--overlap", type=float, default=0.5, help="overlap intensity in [0,1]")
    p.add_argument("--rois-per-gt", type=int, default=8)
    p.add_argument("--roi-jitter", type=float, default=0.15)
    p.add_argument("--dets", help="also write simulated detections JSONL here")
    p.add_argument("--det-noise", type=float, default=0.5)
    p.add_argument("--miss-prob", type=float, default=None,
                   help="constant miss probability (default: increases with occlusion)")
    p.add_argument("--false-positives", type=int, default=2, help="false positives per scene")
    p.set_defaults(fn=cmd_gen)

    p = sub.add_parser("assign", help="label RoIs and dump the positive-sample distribution")
    p.add_argument("--scenes", required=True, help="input scenes JSONL")
    p.add_argument("--decay", type=_decay, default=parse_decay("sigmoid:8,0.5"))
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--out", required=True, help="output distribution CSV")
    p.set_defaults(fn=cmd_assign)

    p = sub.add_parser("check-grad", help="compare analytic loss gradients to finite differences")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trials", type=int, default=100)
    p.set_defaults(fn=cmd_check_grad)

    p = sub.add_parser("train-toy", help="train the toy linear detector head")
    p.add_argument("--scenes", required=True)
    p.add_argument("--decay", type=_decay, default=parse_decay("sigmoid:8,0.5"))
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--gamma", type=float, default=0.1)
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--eta", type=float, default=1.0)
    p.add_argument("--epochs", type=int, default=250)
    p.add_argument("--lr", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--feature-noise", type=float, default=0.05)
    p.add_argument("--image-size", type=_float_pair, default=(640.0, 480.0), metavar="W,H")
    p.add_argument("--report", help="write the training report JSON here")
    p.set_defaults(fn=cmd_train_toy)

    p = sub.add_parser("ablate", help="run the sign-prediction ablation table")
    p.add_argument("--scenes", required=True)
    p.add_argument("--decay", type=_decay, default=parse_decay("sigmoid:8,0.5"))
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--gamma", type=float, default=0.1)
    p.add_argument("--epochs", type=int, default=250)
    p.add_argument("--lr", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--feature-noise", type=float, default=0.05)
    p.add_argument("--image-size", type=_float_pair, default=(640.0, 480.0), metavar="W,H")
    p.add_argument("--nms-thresh", type=float, default=0.5)
    p.add_argument("--out", required=True, help="output ablation CSV")
    p.set_defaults(fn=cmd_ablate)

    p = sub.add_parser("nms", help="apply greedy NMS to a detections file")
    p.add_argument("--in", dest="inp", required=True, help="input detections JSONL")
    p.add_argument("--out", required=True, help="output detections JSONL")
    p.add_argument("--thresh", type=float, default=0.5)
    p.set_defaults(fn=cmd_nms)

    p = sub.add_parser("eval", help="log-average miss rate on occlusion subsets")
    p.add_argument("--dets", required=True, help="detections JSONL")
    p.add_argument("--gts", required=True, help="scenes JSONL with ground truths")
    p.add_argument("--subset", choices=[*SUBSETS, "all"], default="all")
    p.add_argument("--iou", type=float, default=0.5, help="matching IoU threshold")
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("refine", help="apply sign refinement to a deltas file")
    p.add_argument("--in", dest="inp", required=True,
                   help='JSONL with {"deltas": [4], "sign_probs": [[2]x4]} per line')
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_refine)
    return parser


def cmd_gen(args) -> int:
    cfg = SceneConfig(
        seed=args.seed,
        num_peds=args.num_peds,
        image_size=args.image_size,
        height_range=args.height_range,
        aspect_ratio=args.aspect_ratio,
        overlap_intensity=args.overlap,
        rois_per_gt=args.rois_per_gt,
        roi_jitter=args.roi_jitter,
    )
    scenes = generate(cfg, args.scenes)
    write_scenes_jsonl(scenes, args.out)
    print(f"wrote {len(scenes)} scenes to {args.out}")
    if args.dets:
        if args.miss_prob is None:
            curve = lambda occ: min(0.95, 0.05 + 0.8 * occ)  # noqa: E731
        else:
            curve = args.miss_prob
        rng = np.random.default_rng([args.seed, 7919])
        items = [
            (s.image_id, simulate_detections(s, args.det_noise, curve, args.false_positives, rng))
            for s in scenes
        ]
        write_detections_jsonl(items, args.dets)
        print(f"wrote detections for {len(items)} scenes to {args.dets}")
    return 0


def cmd_assign(args) -> int:
    scenes = sorted(read_scenes_jsonl(args.scenes), key=lambda s: s.image_id)
    decayed_cfg = AssignmentConfig(decay=args.decay, threshold=args.threshold)
    baseline_cfg = AssignmentConfig(decay=parse_decay("none"), threshold=args.threshold)
    rows = []
    n_pos = n_base = 0
    for scene in scenes:
        records = assign(scene.rois, scene.gts, decayed_cfg)
        baseline = assign(scene.rois, scene.gts, baseline_cfg)
        rows.extend(distribution_dump(records, baseline))
        n_pos += sum(r.label == POSITIVE for r in records)
        n_base += sum(r.label == POSITIVE for r in baseline)
    write_distribution_csv(rows, args.out)
    print(f"{len(rows)} rois: {n_pos} positive under decay, {n_base} under baseline")
    return 0


def _fd_max_rel_err(value_fn, grad, x, step=1e-5):
    """Max relative error of `grad` vs central differences of `value_fn` at x."""
    worst = 0.0
    it = np.nditer(x, flags=["multi_index"])
    while not it.finished:
        i = it.multi_index
        orig = x[i]
        x[i] = orig + step
        hi = value_fn(x)
        x[i] = orig - step
        lo = value_fn(x)
        x[i] = orig
        numeric = (hi - lo) / (2 * step)
        denom = max(abs(numeric), abs(grad[i]), 1e-8)
        worst = max(worst, abs(numeric - grad[i]) / denom)
        it.iternext()
    return worst


def cmd_check_grad(args) -> int:
    rng = np.random.default_rng(args.seed)
    worst = {"cls": 0.0, "box": 0.0, "sign": 0.0}
    for _ in range(args.trials):
        n = int(rng.integers(1, 6))
        logits = rng.normal(0.0, 2.0, (n, 2))
        labels = [("bg", "ped")[int(b)] for b in rng.integers(0, 2, n)]
        _, grad = cls_loss(logits, labels)
        worst["cls"] = max(worst["cls"], _fd_max_rel_err(
            lambda z: cls_loss(z, labels)[0], grad, logits))

        cfg = LossConfig(
            gamma=0.1,
            sigma=float(rng.choice([1.0, 3.0, 5.0])),
            eta=float(rng.choice([1.0, 2.0, 3.0])),
        )
        pred = rng.normal(0.0, 1.5, (n, 4))
        target = rng.normal(0.0, 1.5, (n, 4))

        def _box_val(p):
            return box_loss([BoxDeltas(*r) for r in p], [BoxDeltas(*r) for r in target],
                            cfg, n_reg=n)[0]

        _, bgrad = box_loss([BoxDeltas(*r) for r in pred], [BoxDeltas(*r) for r in target],
                            cfg, n_reg=n)
        worst["box"] = max(worst["box"], _fd_max_rel_err(_box_val, bgrad, pred))

        sl = rng.normal(0.0, 2.0, (n, 4, 2))
        tgt = [BoxDeltas(*r) for r in rng.normal(0.0, 1.0, (n, 4))]
        from .boxcodec import sign_targets as _st

        sign_tg = [_st(d) for d in tgt]

        def _sign_val(z):
            probs = [SignProbs.from_array(softmax(row)) for row in z]
            return sign_loss(probs, sign_tg, cfg, n_reg=n)[0]

        probs = [SignProbs.from_array(softmax(row)) for row in sl]
        _, sgrad = sign_loss(probs, sign_tg, cfg, n_reg=n)
        worst["sign"] = max(worst["sign"], _fd_max_rel_err(_sign_val, sgrad, sl))
    ok = True
    for name in ("cls", "box", "sign"):
        status = "ok" if worst[name] < 1e-5 else "FAIL"
        ok = ok and worst[name] < 1e-5
        print(f"{name}_loss max rel err {worst[name]:.3e} [{status}]")
    return 0 if ok else 2


def cmd_train_toy(args) -> int:
    scenes = read_scenes_jsonl(args.scenes)
    assignment_cfg = AssignmentConfig(decay=args.decay, threshold=args.threshold)
    loss_cfg = LossConfig(gamma=args.gamma, sigma=args.sigma, eta=args.eta)
    trainer_cfg = TrainerConfig(
        lr=args.lr,
        epochs=args.epochs,
        seed=args.seed,
        feature_noise=args.feature_noise,
        image_size=args.image_size,
    )
    _, report = train(scenes, assignment_cfg, loss_cfg, trainer_cfg)
    if args.report:
        with open(args.report, "w") as fh:
            json.dump(report.to_dict(), fh, indent=2)
            fh.write("\n")
    final = report.losses[-1]
    print(
        f"epochs={len(report.losses)} final cls={final[0]:.6f} box={final[1]:.6f} "
        f"sign={final[2]:.6f} total={final[3]:.6f}"
    )
    print(
        f"holdout mae raw={report.final_mae_raw:.6f} refined={report.final_mae_refined:.6f} "
        f"sign_acc={report.sign_accuracy:.4f}"
    )
    return 0


def cmd_ablate(args) -> int:
    scenes = read_scenes_jsonl(args.scenes)
    assignment_cfg = AssignmentConfig(decay=args.decay, threshold=args.threshold)
    base_loss = LossConfig(gamma=args.gamma)
    trainer_cfg = TrainerConfig(
        lr=args.lr,
        epochs=args.epochs,
        seed=args.seed,
        feature_noise=args.feature_noise,
        image_size=args.image_size,
    )
    rows = ablation(scenes, assignment_cfg, base_loss, trainer_cfg, nms_thresh=args.nms_thresh)
    with open(args.out, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=ABLATION_FIELDS)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: row[k] for k in ABLATION_FIELDS})
    for row in rows:
        print(f"{row['row']:>18}: mae={row['mae']:.6f} mr2={row['mr2']:.4f} "
              f"sign_acc={row['sign_accuracy']:.4f}")
    return 0


def cmd_nms(args) -> int:
    items = sorted(read_detections_jsonl(args.inp), key=lambda t: t[0])
    if not 0.0 < args.thresh < 1.0:
        raise ValueError("--thresh must be in (0, 1)")
    out = [(image_id, nms(dets, args.thresh)) for image_id, dets in items]
    write_detections_jsonl(out, args.out)
    kept = sum(len(d) for _, d in out)
    total = sum(len(d) for _, d in items)
    print(f"kept {kept} of {total} detections")
    return 0


def cmd_eval(args) -> int:
    scenes = sorted(read_scenes_jsonl(args.gts), key=lambda s: s.image_id)
    det_map = dict(read_detections_jsonl(args.dets))
    known = {s.image_id for s in scenes}
    unknown = sorted(set(det_map) - known)
    if unknown:
        raise ValueError(f"detections reference unknown image_ids: {', '.join(unknown)}")
    images = [(det_map.get(s.image_id, []), list(s.gts)) for s in scenes]
    names = ["reasonable", "heavy", "partial", "bare"] if args.subset == "all" else [args.subset]
    print(f"{'subset':>10} {'mr2':>8} {'num_gt':>7} {'num_det':>8} {'tp':>6} {'fp':>6}")
    for name in names:
        result = mr2(images, SUBSETS[name], iou_thresh=args.iou)
        print(
            f"{name:>10} {result.mr2:8.4f} {result.num_gt:7d} {result.num_det:8d} "
            f"{result.num_tp:6d} {result.num_fp:6d}"
        )
    return 0


def cmd_refine(args) -> int:
    with open(args.inp) as fh, open(args.out, "w") as out:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
                deltas = BoxDeltas(*rec["deltas"])
                probs = SignProbs.from_array(rec["sign_probs"])
            except (KeyError, TypeError, ValueError) as exc:
                raise ValueError(f"{args.inp}: bad record on line {lineno}: {exc}") from exc
            refined = refine(deltas, probs)
            out.write(json.dumps({"deltas": list(refined.as_tuple()),
                                  "sign_probs": rec["sign_probs"]}) + "\n")
    print(f"refined deltas written to {args.out}")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.fn(args)
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
