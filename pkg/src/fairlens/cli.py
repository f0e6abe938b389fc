"""Command-line pipeline: annotate, train/predict, evaluate, sweep, pareto, report.

Every command writes ``<out>.manifest.json`` next to its main output, recording
the resolved parameters and SHA-256 digests of inputs and outputs. Set
``SOURCE_DATE_EPOCH`` to pin the manifest timestamp. ``FAIRLENS_CONFIG`` may
name a JSON file of defaults: top-level keys apply to every command, keys
nested under a command name apply to that command only; flags on the command
line always win.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import os
import sys
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .data import (
    _write_csv,
    load_au_frames,
    load_channel,
    load_groups,
    load_landmarks,
    load_predictions,
    merge_predictions,
    write_predictions,
)
from .ensemble import (
    load_candidates,
    one_hot_index,
    pareto_frontier,
    select_top_k_intersection,
    sweep,
    weight_grid,
    write_candidates,
)
from .errors import FairlensError, SchemaError
from .expressions import DEFAULT_TAXONOMY, ExpressionConfig, ExpressionTaxonomy, annotate_expressions
from .fairness import fairness_report
from .geometry import AttractivenessScores, GeometryConfig, binarize_attractiveness, keep_rate, score_faces
from .plot import render_scatter
from .trainer import LinearModel, TrainConfig, feature_extract, predict_proba, train

log = logging.getLogger("fairlens")

CONFIG_ENV = "FAIRLENS_CONFIG"
FEATURE_MODES = ("raw", "attractiveness", "au")


# ---------------------------------------------------------------- manifest


def _digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()


def _timestamp() -> str:
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    moment = datetime.fromtimestamp(int(epoch), timezone.utc) if epoch else datetime.now(timezone.utc)
    return moment.strftime("%Y-%m-%dT%H:%M:%SZ")


def write_manifest(args, inputs, outputs) -> Path:
    config = {k: v for k, v in sorted(vars(args).items()) if k != "func"}
    manifest = {
        "command": args.command,
        "config": config,
        "inputs": {str(p): _digest(p) for p in inputs},
        "outputs": {str(p): _digest(p) for p in outputs},
        "tool_version": __version__,
        "timestamp": _timestamp(),
    }
    path = Path(f"{outputs[0]}.manifest.json")
    path.write_text(json.dumps(manifest, indent=1, default=str) + "\n", encoding="utf-8")
    return path


def _write_json(path, data):
    Path(path).write_text(json.dumps(data, indent=1) + "\n", encoding="utf-8")


# ---------------------------------------------------------------- features


def _read_scores(path) -> list[AttractivenessScores]:
    """Frontal rows of an annotate-attractiveness output."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    needed = {"id", "frontal", "gr_score", "sym_score", "neo_score"}
    if rows and not needed <= set(rows[0]):
        raise SchemaError(f"{path}: expected columns {sorted(needed)}")
    return [
        AttractivenessScores(r["id"], True, float(r["gr_score"]), float(r["sym_score"]), float(r["neo_score"]))
        for r in rows if r["frontal"] == "1"
    ]


def _raw_features(path, columns):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        rows = list(reader)
    names = columns or [h for h in header if h not in ("id", "sensitive")]
    missing = [n for n in names if n not in header]
    if missing:
        raise SchemaError(f"{path}: missing column {missing[0]}")
    feats = {}
    for k, r in enumerate(rows, start=2):
        try:
            feats[r["id"]] = [float(r[n]) for n in names]
        except ValueError:
            raise FairlensError(f"{path}: row {k}: non-numeric feature") from None
    return feats, names


def _features(args, standardizer=None):
    """(features by id, feature names, standardizer) for the selected mode."""
    columns = args.feature_columns.split(",") if args.feature_columns else None
    if args.feature_mode == "raw":
        feats, names = _raw_features(args.features, columns)
        return feats, names, None
    if args.feature_mode == "au":
        frames = load_au_frames(args.features, required_codes=DEFAULT_TAXONOMY.au_codes)
        feats, _ = feature_extract(frames)
        return feats, [f"AU{c:02d}" for c in DEFAULT_TAXONOMY.au_codes], None
    feats, std = feature_extract(_read_scores(args.features), standardizer)
    return feats, ["golden_ratio", "symmetry", "neocanons"], std


# ---------------------------------------------------------------- commands


def cmd_annotate_attractiveness(args):
    cfg = GeometryConfig(beta_frontal=args.beta, delta_gr=args.delta, t_sym=args.t_sym, t_neo=args.t_neo,
                         keep_if_small=not args.invert_frontality)
    faces = load_landmarks(args.landmarks)
    scores = score_faces(faces, cfg, args.threads)
    rows = []
    for s in scores:
        if s.frontal:
            lab = binarize_attractiveness(s, cfg)
            rows.append([s.id, 1, s.golden_ratio, s.symmetry, s.neocanons, lab["GR"], lab["S"], lab["NC"]])
        else:
            rows.append([s.id, 0, "", "", "", "", "", ""])
    _write_csv(args.out, ["id", "frontal", "gr_score", "sym_score", "neo_score", "gr_label", "s_label", "nc_label"],
               rows)
    rate = keep_rate(scores)
    log.info("kept %d of %d faces (%s)", sum(s.frontal for s in scores), len(scores),
             "n/a" if rate is None else f"{100 * rate:.2f}%")
    return [args.landmarks], [args.out]


def cmd_annotate_expression(args):
    tax = ExpressionTaxonomy.from_json(args.taxonomy) if args.taxonomy else DEFAULT_TAXONOMY
    cfg = ExpressionConfig(algorithm=args.algorithm, neutral_t=args.neutral_t)
    frames = load_au_frames(args.aus, required_codes=tax.au_codes)
    ann = annotate_expressions(frames, tax, cfg, args.threads)
    _write_csv(args.out, ["id", "expression", "happy_label"],
               [[i, e, ann.channel[i]] for i, e in ann.expressions.items()])
    hist_path = args.histogram or str(Path(args.out).with_suffix("")) + ".histogram.json"
    summary = ann.as_json()
    summary["clamped_intensities"] = frames.clamped
    _write_json(hist_path, summary)
    if cfg.algorithm == "objbase" and frames:
        log.info("%.1f%% of frames matched more than one expression", 100 * ann.collisions / len(frames))
    inputs = [args.aus] + ([args.taxonomy] if args.taxonomy else [])
    return inputs, [args.out, hist_path]


def cmd_train(args):
    feats, names, std = _features(args)
    labels = load_channel(args.labels, column=args.label_column)
    missing = sorted(set(feats) - set(labels.labels))
    if missing:
        raise FairlensError(f"{args.labels}: no label for {len(missing)} ids, e.g. {missing[0]}")
    cfg = TrainConfig(learning_rate=args.lr, epochs=args.epochs, seed=args.seed, l2=args.l2,
                      decay_factor=args.decay_factor, decay_every=args.decay_every)
    model = train(feats, labels, cfg, names, std)
    model.save(args.out)
    return [args.features, args.labels], [args.out]


def cmd_predict(args):
    model = LinearModel.load(args.model)
    feats, _, _ = _features(args, model.standardizer)
    pm = predict_proba(model, feats, args.name, ids=sorted(feats))
    write_predictions(pm, args.out)
    return [args.model, args.features], [args.out]


def _load_pred_labels(path) -> dict[str, int]:
    """Binary predictions from either a one-model probability file or an id,label file."""
    try:
        pm = load_predictions(path)
    except SchemaError:
        return dict(load_channel(path).labels)
    if pm.n_models != 1:
        raise FairlensError(f"{path}: evaluate takes a single model, found {pm.n_models}")
    return {i: int(row[0].argmax()) for i, row in pm.rows.items()}


def _restrict(mapping, ids, what, path):
    missing = sorted(set(ids) - set(mapping))
    if missing:
        raise FairlensError(f"{path}: {what} missing for {len(missing)} ids, e.g. {missing[0]}")
    return {i: mapping[i] for i in ids}


def cmd_evaluate(args):
    pred = _load_pred_labels(args.pred)
    truth = _restrict(load_channel(args.truth, column=args.truth_column).labels, pred, "truth", args.truth)
    groups = _restrict(load_groups(args.groups, column=args.groups_column), pred, "groups", args.groups)
    report = fairness_report(pred, truth, groups)
    _write_json(args.out, report.as_json())
    return [args.pred, args.truth, args.groups], [args.out]


def cmd_sweep(args):
    preds = merge_predictions([load_predictions(p) for p in args.preds])
    truth = _restrict(load_channel(args.truth, column=args.truth_column).labels, preds.ids, "truth", args.truth)
    groups = _restrict(load_groups(args.groups, column=args.groups_column), preds.ids, "groups", args.groups)
    grid = weight_grid(preds.n_models, args.step)
    candidates = sweep(preds, truth, groups, grid, args.metric, args.threads)
    write_candidates(candidates, preds.model_names, args.out)
    log.info("%d candidates, %d with undefined gap", len(candidates), sum(not c.defined for c in candidates))
    return list(args.preds) + [args.truth, args.groups], [args.out]


def cmd_pareto(args):
    loaded = [load_candidates(p) for p in args.candidates]
    names, candidates = loaded[0]
    frontiers = [pareto_frontier(c) for _, c in loaded]
    frontier = frontiers[0]
    top = select_top_k_intersection(frontiers, args.k)
    rank = {c.weights: r for r, c in enumerate(top, start=1)}
    write_candidates(frontier.points, names, args.out,
                     extra={"top_rank": [rank.get(p.weights, "") for p in frontier]})
    models = {}
    for c in candidates:
        idx = one_hot_index(c.weights)
        if idx is not None:
            models[names[idx]] = c
    svg_path = args.svg or str(Path(args.out).with_suffix(".svg"))
    svg = render_scatter(candidates, frontier, models, hlines=args.hline or (), vlines=args.vline or (),
                         gap_label=args.gap_label)
    Path(svg_path).write_text(svg, encoding="utf-8")
    top_path = args.top_out or str(Path(args.out).with_suffix("")) + f".top{args.k}.csv"
    write_candidates(top, names, top_path)
    return list(args.candidates), [args.out, svg_path, top_path]


REPORT_COLUMNS = ("accuracy_overall", "accuracy_s1", "accuracy_s0", "delta_tpr", "delta_fpr", "delta_eoo",
                  "delta_disc")


def cmd_report(args):
    rows = []
    inputs = []
    for item in args.evaluation:
        name, sep, path = item.partition("=")
        if not sep:
            raise FairlensError(f"--evaluation expects NAME=PATH, got {item!r}")
        inputs.append(path)
        with open(path, encoding="utf-8") as fh:
            rep = json.load(fh)
        acc = rep["accuracy_per_group"]
        values = [rep["accuracy_overall"], acc["1"], acc["0"], rep["delta_tpr"], rep["delta_fpr"],
                  rep["delta_eoo"], rep["delta_disc"]]
        rows.append([name] + values)
    if str(args.out).endswith(".csv"):
        _write_csv(args.out, ("model",) + REPORT_COLUMNS, [[r[0]] + ["" if v is None else v for v in r[1:]]
                                                           for r in rows])
    else:
        lines = ["| model | " + " | ".join(REPORT_COLUMNS) + " |", "|---" * (len(REPORT_COLUMNS) + 1) + "|"]
        for r in rows:
            lines.append("| " + " | ".join([r[0]] + ["n/a" if v is None else f"{v:.3f}" for v in r[1:]]) + " |")
        Path(args.out).write_text("\n".join(lines) + "\n", encoding="utf-8")
    return inputs, [args.out]


# ---------------------------------------------------------------- parser


def _add_global(parser, suppress: bool):
    kw = {"default": argparse.SUPPRESS} if suppress else {}
    parser.add_argument("--threads", type=int, help="worker threads (default: all cores)", **kw)
    parser.add_argument("--seed", type=int, help="random seed recorded with trained models", **kw)
    parser.add_argument("--quiet", action="store_true", help="only print errors", **kw)


def _add_feature_flags(p):
    p.add_argument("--features", required=True)
    p.add_argument("--feature-mode", choices=FEATURE_MODES, default="raw",
                   help="raw numeric columns, annotate-attractiveness scores, or AU frames")
    p.add_argument("--feature-columns", help="comma-separated columns for raw mode")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fairlens", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"fairlens {__version__}")
    _add_global(parser, suppress=False)
    parser.set_defaults(threads=None, seed=0, quiet=False)
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def command(name, func, help_):
        p = sub.add_parser(name, help=help_, description=help_)
        _add_global(p, suppress=True)
        p.set_defaults(func=func)
        return p

    p = command("annotate-attractiveness", cmd_annotate_attractiveness, "score landmarks and write GR/S/NC labels")
    p.add_argument("--landmarks", required=True)
    p.add_argument("--beta", type=float, default=10.0, help="frontality threshold in pixels")
    p.add_argument("--delta", type=float, default=0.19, help="golden-ratio band half-width")
    p.add_argument("--t-sym", type=float, default=4.2)
    p.add_argument("--t-neo", type=float, default=0.29)
    p.add_argument("--invert-frontality", action="store_true", help="keep faces whose eye asymmetry exceeds beta")
    p.add_argument("--out", required=True)

    p = command("annotate-expression", cmd_annotate_expression, "label expressions from AU frames")
    p.add_argument("--aus", required=True)
    p.add_argument("--algorithm", choices=("objbase", "objlcs"), default="objlcs")
    p.add_argument("--neutral-t", type=float, default=0.3)
    p.add_argument("--taxonomy", help="JSON taxonomy replacing the default one")
    p.add_argument("--histogram", help="histogram JSON path (default: <out>.histogram.json)")
    p.add_argument("--out", required=True)

    p = command("train", cmd_train, "fit a logistic-regression model")
    _add_feature_flags(p)
    p.add_argument("--labels", required=True)
    p.add_argument("--label-column")
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--epochs", type=int, default=100)
    p.add_argument("--l2", type=float, default=0.0)
    p.add_argument("--decay-factor", type=float, default=1.0)
    p.add_argument("--decay-every", type=int, default=0)
    p.add_argument("--out", required=True)

    p = command("predict", cmd_predict, "write class probabilities of a trained model")
    _add_feature_flags(p)
    p.add_argument("--model", required=True)
    p.add_argument("--name", required=True, help="model name used in the column headers")
    p.add_argument("--out", required=True)

    p = command("evaluate", cmd_evaluate, "accuracy and fairness gaps of one model")
    p.add_argument("--pred", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--truth-column")
    p.add_argument("--groups", required=True)
    p.add_argument("--groups-column", default="sensitive")
    p.add_argument("--out", required=True)

    p = command("sweep", cmd_sweep, "evaluate every ensemble weight vector on a grid")
    p.add_argument("--preds", action="append", required=True, help="prediction file; repeat to add models")
    p.add_argument("--truth", required=True)
    p.add_argument("--truth-column")
    p.add_argument("--groups", required=True)
    p.add_argument("--groups-column", default="sensitive")
    p.add_argument("--metric", choices=("eoo", "disc"), default="eoo")
    p.add_argument("--step", type=float, default=0.1)
    p.add_argument("--out", required=True)

    p = command("pareto", cmd_pareto, "Pareto frontier, top-k intersection and scatter plot")
    p.add_argument("--candidates", action="append", required=True,
                   help="sweep output; repeat to intersect frontiers")
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--out", required=True)
    p.add_argument("--svg")
    p.add_argument("--top-out")
    p.add_argument("--hline", type=float, action="append", help="reference gap line")
    p.add_argument("--vline", type=float, action="append", help="reference accuracy line")
    p.add_argument("--gap-label", default="gap")

    p = command("report", cmd_report, "tabulate evaluate outputs")
    p.add_argument("--evaluation", action="append", required=True, metavar="NAME=PATH")
    p.add_argument("--out", required=True, help=".md or .csv")
    return parser


def _apply_config(parser: argparse.ArgumentParser, config: dict):
    sub = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    top = {k: v for k, v in config.items() if not isinstance(v, dict)}
    for action in parser._actions:
        if action.dest in top:
            parser.set_defaults(**{action.dest: top[action.dest]})
    for name, p in sub.choices.items():
        values = {**top, **config.get(name, {})}
        for action in p._actions:
            if action.dest in values and action.dest in ("threads", "seed", "quiet"):
                parser.set_defaults(**{action.dest: values[action.dest]})
            elif action.dest in values:
                action.default = values[action.dest]
                action.required = False


def main(argv=None) -> int:
    parser = build_parser()
    config_path = os.environ.get(CONFIG_ENV)
    if config_path:
        try:
            with open(config_path, encoding="utf-8") as fh:
                _apply_config(parser, json.load(fh))
        except (OSError, json.JSONDecodeError) as exc:
            print(f"fairlens: error: cannot read {CONFIG_ENV}={config_path}: {exc}", file=sys.stderr)
            return 1
    args = parser.parse_args(argv)
    if args.threads is None:
        args.threads = os.cpu_count() or 1
    logging.basicConfig(level=logging.ERROR if args.quiet else logging.INFO, format="%(message)s",
                        stream=sys.stderr, force=True)
    try:
        inputs, outputs = args.func(args)
        write_manifest(args, inputs, outputs)
    except (FairlensError, OSError) as exc:
        print(f"fairlens {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


def run(argv=None) -> int:
    """Like :func:`main` but returns argparse's exit status instead of raising SystemExit."""
    try:
        return main(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 1


if __name__ == "__main__":
    sys.exit(main())
