"""Command-line pipeline.

Subcommands cover the full workflow: synthesize data, derive ranking labels,
expand them by transitivity, train the potential network, calibrate it to
absolute counts, run inference and evaluation, sweep hyperparameters, and
serve the live annotation API.

Exit codes: 0 success, 1 domain error (bad values, conflicting labels),
2 I/O or parse error.  Errors are a single line on stderr.
"""
from __future__ import annotations

import argparse
import json
import statistics
import sys

from .anchor import AnchorSet, apply_anchor_map, calibrate, select_anchors
from .features import FeatureConfig, FeatureFileError, fit_normalization, features_for_samples
from .metrics import (
    DEFAULT_ACCURACY_DELTA,
    DEFAULT_RANGE_EDGES,
    build_report,
    format_metrics_table,
    mae as metric_mae,
    mse as metric_mse,
    ranking_accuracy,
    read_predictions,
    write_metrics_csv,
    write_predictions,
)
from .model import init_model, load_model, potentials_for_samples, save_model
from .rankgraph import (
    ConflictError,
    PairFileError,
    graph_from_pairs,
    read_pair_file,
    write_pair_file,
)
from .synthdata import (
    autolabel_pairs,
    generate_synthetic,
    read_counts,
    read_manifest,
    sparse_pairs,
    sparsity_report,
    write_counts,
    write_dataset,
)
from .training import MARGIN_SIGNS, STANDARD_PLUS, TrainConfig, train, write_train_report

EXIT_DOMAIN = 1
EXIT_IO = 2
DEFAULT_MAX_PAIRS = 48000
MODES = ("ranking_only", "hybrid", "fully")


class CliError(Exception):
    def __init__(self, message: str, exit_code: int):
        super().__init__(message)
        self.exit_code = exit_code


def _load_model_file(path):
    try:
        return load_model(path)
    except OSError:
        raise
    except json.JSONDecodeError as exc:
        raise CliError(f"{path}: invalid model file: {exc}", EXIT_IO) from None
    except (KeyError, TypeError, ValueError) as exc:
        raise CliError(f"{path}: invalid model file: {exc}", EXIT_IO) from None


def _int_list(text: str) -> list[int]:
    return [int(tok) for tok in text.split(",") if tok.strip()]


def _float_list(text: str) -> list[float]:
    return [float(tok) for tok in text.split(",") if tok.strip()]


def _build_feature_config(args) -> FeatureConfig:
    return FeatureConfig(grid=args.grid, localmax_threshold=args.localmax_threshold)


def _add_feature_flags(p):
    p.add_argument("--grid", type=int, default=8, help="feature grid size per side")
    p.add_argument(
        "--localmax-threshold",
        type=float,
        default=60.0,
        help="brightness floor for the local-maxima feature",
    )


def _add_train_flags(p):
    p.add_argument("--margin", type=float, default=0.5, help="ranking hinge margin M")
    p.add_argument(
        "--margin-sign",
        choices=sorted(MARGIN_SIGNS),
        default=STANDARD_PLUS,
        help="whether the margin is added to or subtracted from the hinge",
    )
    p.add_argument("--xi", type=float, default=None, help="hard filter ratio (off when omitted)")
    p.add_argument("--alpha", type=float, default=1.0, help="regression weight in the objective")
    p.add_argument(
        "--count-norm",
        type=float,
        default=None,
        help="regression target divisor (default: max count in the regression set)",
    )
    p.add_argument("--lr", type=float, default=5e-5)
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--hidden", type=_int_list, default=[32, 16], help="hidden layer sizes")
    _add_feature_flags(p)


def _train_model(samples, pairs, reg_set, args, alpha, seed):
    fc = _build_feature_config(args)
    feats = features_for_samples(samples, fc)
    norm = fit_normalization([feats[sid] for sid in sorted(feats)])
    dims = [fc.feature_dim, *args.hidden, 1]
    model_init = init_model(dims, seed=seed, norm_stats=norm, feature_config=fc)
    config = TrainConfig(
        margin=args.margin,
        margin_sign=args.margin_sign,
        filter_threshold=args.xi,
        alpha=alpha,
        count_norm=args.count_norm,
        lr=args.lr,
        epochs=args.epochs,
        seed=seed,
    )
    return train(samples, pairs, reg_set, config, model_init)


def cmd_synth(args) -> int:
    samples = generate_synthetic(
        n=args.n,
        count_min=args.count_min,
        count_max=args.count_max,
        width=args.width,
        height=args.height,
        seed=args.seed,
    )
    manifest = write_dataset(samples, args.out)
    print(f"wrote {len(samples)} images, manifest {manifest}")
    return 0


def cmd_autolabel(args) -> int:
    counts = {s.id: s.count for s in read_manifest(args.manifest)}
    cap = args.max_pairs if args.max_pairs > 0 else None
    pairs = autolabel_pairs(counts, ratio=args.ratio, max_pairs=cap, seed=args.seed)
    write_pair_file(args.out, pairs)
    print(f"wrote {len(pairs)} pairs to {args.out}")
    return 0


def cmd_sparse(args) -> int:
    counts = {s.id: s.count for s in read_manifest(args.manifest)}
    pairs = sparse_pairs(counts, ratio=args.ratio, seed=args.seed)
    write_pair_file(args.out, pairs)
    zeta = sparsity_report(pairs).zeta_mean
    print(f"wrote {len(pairs)} pairs to {args.out} (labels per labeled image: {zeta})")
    return 0


def cmd_expand(args) -> int:
    graph = graph_from_pairs(read_pair_file(args.pairs))
    closure = graph.transitive_closure()
    write_pair_file(args.out, closure, include_provenance=True)
    stats = graph.label_stats()
    print(f"manual {stats.manual} implied {stats.implied} total {stats.total}")
    return 0


def cmd_train(args) -> int:
    samples = read_manifest(args.manifest)
    pairs = read_pair_file(args.pairs)
    alpha = args.alpha
    reg_set: list[tuple[str, int]] = []
    if args.mode == "ranking_only":
        alpha = 0.0
    elif args.mode == "hybrid":
        if not args.anchors:
            raise CliError("hybrid mode requires --anchors", EXIT_DOMAIN)
        reg_set = sorted(read_counts(args.anchors).items())
    else:  # fully: regress on every training count
        reg_set = sorted((s.id, s.count) for s in samples)
    model, report = _train_model(samples, pairs, reg_set, args, alpha, args.seed)
    save_model(model, args.out)
    if args.report:
        write_train_report(report, args.report)
    last = report.rows[-1]
    print(
        f"trained {args.epochs} epochs on {len(pairs)} pairs; "
        f"final rank_acc {last.rank_acc:.4f}, model {args.out}"
    )
    return 0


def _anchor_set_from_args(args, counts: dict[str, int]) -> AnchorSet:
    if args.anchors:
        entries = tuple(sorted(read_counts(args.anchors).items()))
        return AnchorSet(entries=entries)
    return select_anchors(counts, k=args.anchor_size, seed=args.seed)


def cmd_calibrate(args) -> int:
    model = _load_model_file(args.model)
    samples = read_manifest(args.manifest)
    counts = {s.id: s.count for s in samples}
    anchor_set = _anchor_set_from_args(args, counts)
    model.anchor_map = calibrate(model, samples, anchor_set)
    out = args.out if args.out else args.model
    save_model(model, out)
    if args.anchors_out:
        write_counts(args.anchors_out, dict(anchor_set.entries))
    print(
        f"calibrated on {anchor_set.size} anchors: "
        f"slope {model.anchor_map.slope!r} intercept {model.anchor_map.intercept!r}"
    )
    return 0


def _predict_counts(model, samples) -> dict[str, float]:
    if model.anchor_map is None:
        raise CliError("model has no anchor map; run calibrate first", EXIT_DOMAIN)
    potentials = potentials_for_samples(model, samples)
    return {sid: apply_anchor_map(model.anchor_map, v) for sid, v in potentials.items()}


def cmd_infer(args) -> int:
    model = _load_model_file(args.model)
    samples = read_manifest(args.manifest)
    write_predictions(args.out, _predict_counts(model, samples))
    print(f"wrote {len(samples)} predictions to {args.out}")
    return 0


def cmd_eval(args) -> int:
    model = _load_model_file(args.model)
    samples = read_manifest(args.manifest)
    gts = {s.id: float(s.count) for s in samples}
    if args.preds:
        preds = read_predictions(args.preds)
        missing = sorted(set(gts) - set(preds))
        if missing:
            raise CliError(f"predictions missing ids: {', '.join(missing[:5])}", EXIT_DOMAIN)
    else:
        preds = _predict_counts(model, samples)
    rank_acc = None
    if args.pairs:
        rank_acc = ranking_accuracy(model, read_pair_file(args.pairs), samples)
    ids = sorted(gts)
    report = build_report(
        [preds[i] for i in ids],
        [gts[i] for i in ids],
        range_edges=args.edges,
        delta=args.delta,
        ranking_acc=rank_acc,
    )
    if args.out:
        write_metrics_csv(report, args.out)
    print(format_metrics_table(report), end="")
    return 0


SWEEP_EVAL_SEED_OFFSET = 100_000


def _sweep_datasets(args, seed):
    train_samples = generate_synthetic(
        args.n, args.count_min, args.count_max, args.width, args.height, seed=seed
    )
    eval_samples = generate_synthetic(
        args.eval_n,
        args.count_min,
        args.count_max,
        args.width,
        args.height,
        seed=seed + SWEEP_EVAL_SEED_OFFSET,
    )
    return train_samples, eval_samples


def _sweep_eval(model, eval_samples) -> tuple[float, float]:
    preds = _predict_counts(model, eval_samples)
    ids = sorted(preds)
    p = [preds[i] for i in ids]
    g = [float(s.count) for s in sorted(eval_samples, key=lambda s: s.id)]
    return metric_mae(p, g), metric_mse(p, g)


def cmd_sweep(args) -> int:
    if not args.values:
        raise CliError("no sweep values given", EXIT_DOMAIN)
    per_value: dict[float, list[tuple[float, float]]] = {v: [] for v in args.values}
    for seed in args.seeds:
        train_samples, eval_samples = _sweep_datasets(args, seed)
        counts = {s.id: s.count for s in train_samples}
        cap = args.max_pairs if args.max_pairs > 0 else None

        if args.parameter == "anchor_size":
            # one training per seed; only the calibration set varies
            pairs = autolabel_pairs(counts, ratio=args.ratio, max_pairs=cap, seed=seed)
            model, _ = _train_model(train_samples, pairs, [], args, 0.0, seed)
            for value in args.values:
                anchors = select_anchors(counts, k=int(value), seed=seed)
                model.anchor_map = calibrate(model, train_samples, anchors)
                per_value[value].append(_sweep_eval(model, eval_samples))
            continue

        for value in args.values:
            margin = value if args.parameter == "margin" else args.margin
            ratio = value if args.parameter == "ratio" else args.ratio
            pairs = autolabel_pairs(counts, ratio=ratio, max_pairs=cap, seed=seed)
            run_args = argparse.Namespace(**vars(args))
            run_args.margin = margin
            model, _ = _train_model(train_samples, pairs, [], run_args, 0.0, seed)
            anchors = select_anchors(counts, k=args.anchor_size, seed=seed)
            model.anchor_map = calibrate(model, train_samples, anchors)
            per_value[value].append(_sweep_eval(model, eval_samples))

    lines = ["parameter,value,mae,mse"]
    print(f"{'value':>10}  {'mae':>12}  {'mse':>12}")
    for value in args.values:
        runs = per_value[value]
        med_mae = statistics.median(r[0] for r in runs)
        med_mse = statistics.median(r[1] for r in runs)
        lines.append(f"{args.parameter},{value:g},{med_mae!r},{med_mse!r}")
        print(f"{value:>10g}  {med_mae:>12.4f}  {med_mse:>12.4f}")
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(
        manifest=args.manifest,
        cap=args.cap,
        default_seed=args.seed,
        static_dir=args.static,
    )
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rankcount",
        description="Weakly-supervised counting from pairwise ranking labels.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic counting dataset")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--n", type=int, default=200)
    p.add_argument("--count-min", type=int, default=10)
    p.add_argument("--count-max", type=int, default=500)
    p.add_argument("--width", type=int, default=128)
    p.add_argument("--height", type=int, default=128)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("autolabel", help="derive ranking pairs from count ratios")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--ratio", type=float, default=2.0)
    p.add_argument("--max-pairs", type=int, default=DEFAULT_MAX_PAIRS, help="0 = unlimited")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_autolabel)

    p = sub.add_parser("sparse", help="disjoint one-label-per-image pairing")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--ratio", type=float, default=2.0)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_sparse)

    p = sub.add_parser("expand", help="transitively expand a pair file")
    p.add_argument("--pairs", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0, help="unused; kept for uniformity")
    p.set_defaults(func=cmd_expand)

    p = sub.add_parser("train", help="train the potential network on ranking pairs")
    p.add_argument("--manifest", required=True)
    p.add_argument("--pairs", required=True)
    p.add_argument("--out", required=True, help="model file to write")
    p.add_argument("--mode", choices=MODES, default="ranking_only")
    p.add_argument("--anchors", help="id,count file for hybrid regression")
    p.add_argument("--report", help="write per-epoch training report CSV here")
    p.add_argument("--seed", type=int, default=0)
    _add_train_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("calibrate", help="fit the potential-to-count map")
    p.add_argument("--model", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--anchors", help="id,count file naming the anchor images")
    p.add_argument("--anchor-size", type=int, default=10, help="anchors to select when no file")
    p.add_argument("--anchors-out", help="write the selected anchor set here")
    p.add_argument("--out", help="output model file (default: overwrite --model)")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("infer", help="predict counts for a manifest")
    p.add_argument("--model", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0, help="unused; kept for uniformity")
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("eval", help="counting and ranking metrics against ground truth")
    p.add_argument("--model", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--pairs", help="pair file for ranking accuracy")
    p.add_argument("--preds", help="evaluate these predictions instead of running the model")
    p.add_argument("--out", help="metrics CSV path")
    p.add_argument("--edges", type=_float_list, default=list(DEFAULT_RANGE_EDGES))
    p.add_argument("--delta", type=float, default=DEFAULT_ACCURACY_DELTA)
    p.add_argument("--seed", type=int, default=0, help="unused; kept for uniformity")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="hyperparameter sweep on internal synthetic data")
    p.add_argument("--parameter", choices=("margin", "anchor_size", "ratio"), required=True)
    p.add_argument("--values", type=_float_list, required=True)
    p.add_argument("--seeds", type=_int_list, default=[0, 1, 2, 3, 4])
    p.add_argument("--out", help="sweep table CSV path")
    p.add_argument("--n", type=int, default=150)
    p.add_argument("--eval-n", type=int, default=60)
    p.add_argument("--count-min", type=int, default=10)
    p.add_argument("--count-max", type=int, default=500)
    p.add_argument("--width", type=int, default=128)
    p.add_argument("--height", type=int, default=128)
    p.add_argument("--ratio", type=float, default=2.0)
    p.add_argument("--max-pairs", type=int, default=2500, help="0 = unlimited")
    p.add_argument("--anchor-size", type=int, default=10)
    _add_train_flags(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("serve", help="run the live annotation HTTP service")
    p.add_argument("--manifest", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--cap", type=int, default=3, help="max judgments requested per image")
    p.add_argument("--static", help="directory of UI files to serve at /")
    p.add_argument("--seed", type=int, default=0, help="default seed for new sessions")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except ConflictError as exc:
        chain = " -> ".join(exc.witness)
        print(f"error: conflicting ranking labels (witness {chain})", file=sys.stderr)
        return EXIT_DOMAIN
    except (PairFileError, FeatureFileError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except json.JSONDecodeError as exc:
        print(f"error: invalid JSON: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        name = exc.filename if exc.filename else "I/O"
        print(f"error: {name}: {exc.strerror if exc.strerror else exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
