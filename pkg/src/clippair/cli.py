"""Command-line surface: eval, gradcheck, loss, gen-data, train-toy.

All numeric output uses 4 decimal places (2 for percentages); subcommands
are deterministic for fixed inputs and seeds so their output can be used
in golden-file tests.  Flags override values read from ``--config`` /
``--spec`` files.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import gradcheck, io, losses, metrics, synth, trainer
from .pairs import build_pair_sets, mine_hard_negatives, segment_to_indices
from .types import Segment

PCT = "{:.2f}"
NUM = "{:.4f}"


def _load_config(path: str | None) -> dict:
    return io.parse_config(path) if path else {}


def _eval_json_payload(result: metrics.EvalResult) -> dict:
    payload = {f"R1@{thr:g}": round(v, 2) for thr, v in result.r1_at.items()}
    payload.update({f"mAP@{thr:.2f}": round(v, 2) for thr, v in result.map_at.items()})
    payload["mAP@Avg"] = round(result.map_avg, 2)
    payload["num_queries"] = result.num_queries
    return payload


def _print_eval_table(result: metrics.EvalResult) -> None:
    rows = [(f"R1@{thr:g}", PCT.format(v)) for thr, v in sorted(result.r1_at.items())]
    rows += [(f"mAP@{thr:.2f}", PCT.format(v)) for thr, v in sorted(result.map_at.items())]
    rows.append(("mAP@Avg", PCT.format(result.map_avg)))
    rows.append(("queries", str(result.num_queries)))
    width = max(len(name) for name, _ in rows)
    for name, value in rows:
        print(f"{name:<{width}}  {value:>8}")


def _cmd_eval(args) -> int:
    config = _load_config(args.config)
    cap = args.cap if args.cap is not None else int(config.get("prediction_cap", 10))
    gts = io.parse_ground_truth(args.gt)
    preds = io.parse_predictions(args.pred, cap=cap)
    result = metrics.evaluate(preds, gts, cap=cap)
    if args.json:
        print(json.dumps(_eval_json_payload(result), sort_keys=True))
    else:
        _print_eval_table(result)
    return 0


def _cmd_gradcheck(args) -> int:
    seeds = range(args.seed, args.seed + args.trials)
    reports = gradcheck.run_certification(seeds)
    all_passed = True
    width = max(len(name) for name in reports)
    for name, results in reports.items():
        passed = sum(r.passed for r in results)
        worst = max(r.max_rel_error for r in results)
        all_passed &= passed == len(results)
        status = "ok" if passed == len(results) else "FAIL"
        print(f"{name:<{width}}  {passed}/{len(results)} passed  "
              f"max rel err {worst:.3e}  {status}")
    return 0 if all_passed else 1


def _cmd_loss(args) -> int:
    config = _load_config(args.config)
    weights = io.loss_weights_from_config(config, tau=args.tau, k=args.k)
    margin = io.margin_params_from_config(config)
    window = args.window if args.window is not None else int(config.get("boundary_window", 1))

    entries = {e.query_id: e for e in io.parse_ground_truth(args.gt)}
    if args.qid not in entries:
        raise ValueError(f"qid {args.qid} not present in {args.gt}")
    entry = entries[args.qid]
    emb = io.read_features(args.features).astype(np.float64)
    total_clips = emb.shape[0]
    normalized = [seg.normalized(entry.duration) for seg in entry.segments]

    pairs = build_pair_sets(total_clips, normalized)
    sims = losses.similarity_matrix(emb)
    mined = mine_hard_negatives(sims, pairs, weights.k)
    clip_part = losses.clip_similarity_loss(emb, mined, weights.tau)
    boun_part = losses.average_boundary_loss(emb, normalized, margin, window)

    if args.pred is not None:
        start, end = (float(part) for part in args.pred.split(","))
        preds = [Segment(start, end).normalized(entry.duration)]
        targets = [normalized]
    else:
        # Without a model there is no predicted window; score the clip-grid
        # aligned approximation of each GT segment instead (the quantization
        # floor of the auxiliary loss).
        preds, targets = [], []
        for seg in normalized:
            idx = segment_to_indices(seg, total_clips)
            preds.append(Segment((idx.start_index + 1) / total_clips,
                                 (idx.end_index + 1) / total_clips))
            targets.append([seg])
    aux_value = float(np.mean([
        losses.aux_boundary_loss(pred, tgt, weights).value
        for pred, tgt in zip(preds, targets)
    ]))

    total = losses.total_loss(0.0, clip_part.value, boun_part.value, aux_value, weights)
    for name, value in (
        ("clip", clip_part.value),
        ("boundary", boun_part.value),
        ("aux_boundary", aux_value),
        ("total", total),
    ):
        print(f"{name:<12}  {NUM.format(value):>10}")
    return 0


def _cmd_gen_data(args) -> int:
    spec = io.dataset_spec_from_config(_load_config(args.spec))
    dataset = synth.generate_dataset(spec)
    out = Path(args.out)
    (out / "features").mkdir(parents=True, exist_ok=True)
    io.write_ground_truth(dataset.entries, out / "gt.jsonl")
    for feats, entry in zip(dataset.features, dataset.entries):
        io.write_features(feats, out / "features" / f"qid_{entry.query_id:05d}.ctb1")
    print(f"wrote {dataset.num_queries} queries "
          f"({spec.clips_per_video} clips x {spec.raw_dim} dims) to {out}")
    return 0


def _cmd_train_toy(args) -> int:
    config = _load_config(args.spec)
    spec = io.dataset_spec_from_config(config)
    weights = io.loss_weights_from_config(config)
    lr = float(config.get("learning_rate", trainer.DEFAULT_LEARNING_RATE))
    dataset = synth.generate_dataset(spec)
    model = trainer.init_model(spec.raw_dim, spec.embed_dim, seed=spec.seed,
                               learning_rate=lr)
    trained, trace = trainer.train(model, dataset, weights, args.steps)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "loss_trace.csv", "w", encoding="utf-8") as handle:
        handle.write("step,basic,clip,boun,b_aux,total\n")
        for step, basic, clip, boun, b_aux, total in trace:
            handle.write(f"{step},{basic:.4f},{clip:.4f},{boun:.4f},"
                         f"{b_aux:.4f},{total:.4f}\n")
    result = trainer.evaluate_model(trained, dataset)
    with open(out / "eval.json", "w", encoding="utf-8") as handle:
        handle.write(json.dumps(_eval_json_payload(result), sort_keys=True) + "\n")

    print(f"trained {args.steps} steps: total loss "
          f"{NUM.format(trace[0][5])} -> {NUM.format(trace[-1][5])}")
    _print_eval_table(result)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="clippair",
        description="Clip-pair / boundary losses, moment-retrieval metrics, "
                    "and a desk-scale trainer",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_eval = sub.add_parser("eval", help="score predictions against ground truth")
    p_eval.add_argument("--gt", required=True, help="ground-truth JSONL path")
    p_eval.add_argument("--pred", required=True, help="prediction JSONL path")
    p_eval.add_argument("--cap", type=int, default=None,
                        help="max predictions per query (default 10)")
    p_eval.add_argument("--json", action="store_true", help="emit JSON instead of a table")
    p_eval.add_argument("--config", default=None, help="flat key=value config file")
    p_eval.set_defaults(func=_cmd_eval)

    p_grad = sub.add_parser("gradcheck", help="finite-difference gradient certification")
    p_grad.add_argument("--seed", type=int, default=0)
    p_grad.add_argument("--trials", type=int, default=100)
    p_grad.add_argument("--config", default=None)
    p_grad.set_defaults(func=_cmd_gradcheck)

    p_loss = sub.add_parser("loss", help="loss values for one query's features")
    p_loss.add_argument("--features", required=True, help="CTB1 embedding file")
    p_loss.add_argument("--gt", required=True, help="ground-truth JSONL path")
    p_loss.add_argument("--qid", type=int, required=True)
    p_loss.add_argument("--config", default=None)
    p_loss.add_argument("--tau", type=float, default=None)
    p_loss.add_argument("--k", type=int, default=None)
    p_loss.add_argument("--window", type=int, default=None)
    p_loss.add_argument("--pred", default=None,
                        help="predicted window 'start,end' in seconds for the "
                             "auxiliary loss (default: clip-grid approximation of GT)")
    p_loss.set_defaults(func=_cmd_loss)

    p_gen = sub.add_parser("gen-data", help="write a synthetic dataset to disk")
    p_gen.add_argument("--spec", default=None, help="dataset config file")
    p_gen.add_argument("--out", required=True)
    p_gen.set_defaults(func=_cmd_gen_data)

    p_train = sub.add_parser("train-toy", help="train the linear toy model")
    p_train.add_argument("--spec", default=None, help="dataset / weights config file")
    p_train.add_argument("--steps", type=int, default=200)
    p_train.add_argument("--out", required=True)
    p_train.set_defaults(func=_cmd_train_toy)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
