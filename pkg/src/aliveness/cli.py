"""Command-line pipeline: synth -> snapshot -> features -> fit -> predict -> evaluate.

Exit codes: 0 success, 1 data or validation error, 2 missing input artifact.
Every subcommand accepts ``--config FILE.json``; its keys are flag names
(dashes or underscores) and explicit flags win over config values.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from datetime import datetime
from pathlib import Path

from . import __version__, classifier, evaluation, features, graph, ingest, stm, synth

log = logging.getLogger("aliveness")

EXIT_OK, EXIT_DATA, EXIT_MISSING = 0, 1, 2


class MissingArtifact(Exception):
    pass


def _need(path) -> Path:
    p = Path(path)
    if not p.exists():
        raise MissingArtifact(f"missing input file: {p}")
    return p


def _horizons(value) -> list[int]:
    if value is None or value == "":
        return []
    if isinstance(value, str):
        value = [v for v in value.split(",") if v.strip()]
    try:
        return [int(v) for v in value]
    except (TypeError, ValueError):
        raise ValueError(f"horizons must be integers, got {value!r}") from None


def _time(value) -> datetime:
    if value is None:
        raise ValueError("a date is required")
    try:
        return ingest.parse_time(str(value))
    except ValueError:
        raise ValueError(f"bad date {value!r}; use ISO-8601") from None


def _list(value) -> list[str]:
    if isinstance(value, str):
        return [v.strip() for v in value.split(",") if v.strip()]
    return list(value)


def _json_arg(value) -> dict:
    if value is None:
        return {}
    if isinstance(value, dict):
        return value
    return json.loads(value)


def _plan(args) -> evaluation.ExperimentPlan:
    return evaluation.ExperimentPlan(
        train_start=_time(args.t),
        train_end=_time(args.t1),
        horizons=_horizons(args.horizons if args.horizons is not None else DEFAULT_HORIZONS),
        variants=_list(args.variants),
        method=args.method,
        window_days=int(args.delta),
        metric=args.metric,
        seed=int(args.seed),
        classifier_config=_json_arg(args.classifier_config),
        mincut_sample_size=args.mincut_sample_size,
        mincut_sample_threshold=int(args.mincut_sample_threshold),
    )


# --------------------------------------------------------------------------
# Commands
# --------------------------------------------------------------------------

def cmd_synth(args) -> int:
    spec = synth.SyntheticSpec(
        n_nodes=int(args.nodes), density=float(args.density), rule_attribute=args.rule_attribute,
        rule_threshold=float(args.rule_threshold), noise=float(args.noise), months=int(args.months),
        seed=int(args.seed), start=args.start, window_days=int(args.delta),
    )
    corpus = synth.generate(spec)
    paths = synth.write_corpus(corpus, args.out)
    n_dep = sum(corpus.departed.values())
    print(f"wrote {len(corpus.events)} events, {len(corpus.attrs)} members ({n_dep} departing) to {args.out}")
    for name, p in paths.items():
        print(f"  {name}: {p}")
    return EXIT_OK


def _snapshot_windows(args):
    plan_t, plan_t1 = _time(args.t), _time(args.t1)
    delta = int(args.delta)
    if delta < 1:
        raise ValueError("--delta must be >= 1 day")
    if plan_t1 <= plan_t:
        raise ValueError("--t1 must be after --t")
    hs = _horizons(args.horizons if args.horizons is not None else DEFAULT_HORIZONS)
    if any(h < 1 for h in hs) or any(b <= a for a, b in zip(hs, hs[1:])):
        raise ValueError("--horizons must be strictly increasing positive month offsets")
    windows = [("t", plan_t), ("t1", plan_t1)]
    windows += [(f"h{h}", ingest.add_months(plan_t1, h)) for h in hs]
    return windows, delta


def cmd_snapshot(args) -> int:
    windows, delta = _snapshot_windows(args)
    stats = ingest.ParseStats()
    events = ingest.parse_events(_need(args.events), stats)
    if not events:
        print(f"warning: no usable events in {args.events}; snapshots will be empty", file=sys.stderr)
    if stats.self_loops:
        print(f"warning: dropped {stats.self_loops} self-interaction rows", file=sys.stderr)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    kinds = _list(args.kinds) if args.kinds else None
    for label, start in windows:
        snap = ingest.build_snapshot(events, start, delta, label, kinds)
        path = out / f"G_{label}.edges"
        ingest.save_snapshot(snap, path)
        print(f"{label}\t{ingest.format_time(start)}\tnodes={len(snap.graph)}\tedges={snap.graph.number_of_edges()}")
    return EXIT_OK


def _load_snap(snap_dir: Path, label: str) -> ingest.Snapshot:
    path = snap_dir / f"G_{label}.edges"
    _need(path)
    _need(path.with_name(path.name + ".json"))
    return ingest.load_snapshot(path)


def _train_window(snap_t: ingest.Snapshot, snap_t1: ingest.Snapshot) -> str:
    return f"{snap_t.window_start:%Y-%m-%d}/{snap_t1.window_start:%Y-%m-%d}/{snap_t.window_days}d"


def _attrs(path):
    return ingest.parse_attributes(_need(path)) if path else {}


def cmd_features(args) -> int:
    snap_dir = Path(args.snapshots)
    snap_t = _load_snap(snap_dir, "t")
    snap_f = _load_snap(snap_dir, args.against)
    if len(snap_t.graph) == 0:
        raise ValueError("initial snapshot G_t is empty; nothing to assemble")
    labeling = ingest.label_leaves(snap_t, snap_f)
    m = features.assemble(snap_t, labeling, _attrs(args.attributes), args.mincut_sample_size,
                          int(args.mincut_sample_threshold), int(args.seed))
    if args.against == "t1":
        m.provenance["train_window"] = _train_window(snap_t, snap_f)
    features.save_matrix(m, args.out)
    print(f"wrote {len(m)} rows ({int(m.labels.sum())} departed) to {args.out}")
    return EXIT_OK


def cmd_fit(args) -> int:
    m = features.load_matrix(_need(args.features))
    fitted = evaluation.fit_method(args.method, m, args.variant, args.metric, int(args.seed),
                                   _json_arg(args.classifier_config))
    fitted.save(args.out)
    if fitted.stm_model is not None:
        s = fitted.stm_model
        print(f"stm {s.attribute}: lambda={s.lambda_!r} {s.orientation} {s.metric}={s.training_score:.4f}")
        if s.degenerate:
            print(f"warning: degenerate threshold (lambda equals the minimum {s.attribute} value)",
                  file=sys.stderr)
    else:
        print(f"{fitted.model.kind} on {len(fitted.columns)} features ({fitted.variant}) -> {args.out}")
    return EXIT_OK


def _load_model(path) -> evaluation.FittedMethod:
    try:
        return evaluation.FittedMethod.load(_need(path))
    except (KeyError, json.JSONDecodeError) as exc:
        raise ValueError(f"{path}: not a model file ({exc})") from None


def cmd_predict(args) -> int:
    fitted = _load_model(args.model)
    m = features.load_matrix(_need(args.features))
    labels = fitted.predict(m)
    if fitted.model is not None:
        prob = classifier.predict_proba(fitted.model, m.with_columns(fitted.columns))
    else:
        prob = labels.astype(float)
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("node_id", "probability", "leave_predicted"))
        for v, p, lab in zip(m.node_ids, prob.tolist(), labels.tolist()):
            w.writerow((v, repr(float(p)), "true" if lab else "false"))
    print(f"wrote {len(m)} predictions ({int(labels.sum())} leaving) to {args.out}")
    return EXIT_OK


def _write_reports(reports, args) -> None:
    evaluation.write_report_csv(reports, args.out)
    if args.json:
        evaluation.write_report_json(reports, args.json)
    for r in reports:
        row = r.row()
        tail = "empty" if r.empty else f"A={float(row['accuracy']):.3f} F1={float(row['f1']):.3f}"
        print(f"h={row['horizon_months']}\t{row['variant']}\t{row['method']}\t{tail}")


def _staged_evaluate(args) -> list[evaluation.EvalReport]:
    fitted = _load_model(args.model)
    snap_dir = Path(args.snapshots)
    snap_t = _load_snap(snap_dir, "t")
    attrs = _attrs(args.attributes)
    window = fitted.provenance.get("train_window", "")
    hs = _horizons(args.horizons) if args.horizons else sorted(
        int(p.name[3:-6]) for p in snap_dir.glob("G_h*.edges"))
    reports = []
    for h in hs:
        snap_h = _load_snap(snap_dir, f"h{h}")
        test = None
        if snap_h.n_events and len(snap_t.graph):
            labeling = ingest.label_leaves(snap_t, snap_h)
            test = features.assemble(snap_t, labeling, attrs, args.mincut_sample_size,
                                     int(args.mincut_sample_threshold), int(args.seed))
        reports.append(evaluation.evaluate_fitted(fitted, test, {"train_window": window, "horizon_months": h}))
    return reports


def cmd_evaluate(args) -> int:
    if args.model:
        reports = _staged_evaluate(args)
    else:
        if not args.events:
            raise ValueError("evaluate needs --events (one-shot) or --model with --snapshots (staged)")
        plan = _plan(args)
        events = ingest.parse_events(_need(args.events))
        attrs = _attrs(args.attributes)
        if args.test_events:
            test_plan = plan
            if args.test_t or args.test_t1:
                test_plan = evaluation.ExperimentPlan(**{**plan.__dict__, "train_start": _time(args.test_t or args.t),
                                                         "train_end": _time(args.test_t1 or args.t1)})
            reports = evaluation.run_cross_dataset(
                evaluation.Corpus(events, attrs),
                evaluation.Corpus(ingest.parse_events(_need(args.test_events)), _attrs(args.test_attributes)),
                plan, test_plan)
        else:
            reports = evaluation.run_horizon_experiment(events, attrs, plan)
        if args.cv:
            train, _ = evaluation.fit_plan(events, attrs, plan)
            kind, _ = evaluation.parse_method(plan.method)
            cv_rows = []
            for variant in (["-"] if kind == "stm" else plan.variants):
                trainer = evaluation.method_trainer(plan.method, variant, plan.metric, plan.seed,
                                                    plan.classifier_config)
                res = evaluation.kfold_cv(train, int(args.cv), trainer, seed=int(args.cv_seed),
                                          context={"train_window": plan.train_window,
                                                   "horizon_months": f"cv{args.cv}",
                                                   "variant": variant, "method": plan.method})
                cv_rows.extend(res.folds)
                print(f"cv k={args.cv} {variant}: " + " ".join(f"{k}={v:.3f}" for k, v in res.mean.items()))
            cv_path = Path(args.out).with_name(Path(args.out).stem + ".cv.csv")
            evaluation.write_report_csv(cv_rows, cv_path)
    _write_reports(reports, args)
    return EXIT_OK


def cmd_importance(args) -> int:
    m = features.load_matrix(_need(args.features))
    model = classifier.train_random_forest(m, {"seed": int(args.seed), "n_trees": int(args.n_trees)})
    ranking = classifier.feature_importance(model)
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("feature", "weight"))
        for name, weight in ranking.items:
            w.writerow((name, repr(weight)))
    for name, weight in ranking.items:
        print(f"{name:16s}{weight:.4f}")
    return EXIT_OK


def cmd_correlate(args) -> int:
    m = features.load_matrix(_need(args.features))
    corr = features.pearson_matrix(m)
    features.write_correlation_csv(corr, args.out)
    if corr.constant:
        print(f"warning: zero-variance features set to 0: {', '.join(corr.constant)}", file=sys.stderr)
    print(f"wrote {len(corr.columns)}x{len(corr.columns)} correlation matrix to {args.out}")
    return EXIT_OK


def cmd_cdf(args) -> int:
    points = features.active_weeks_cdf(ingest.parse_attributes(_need(args.attributes)))
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("weeks", "cdf"))
        for weeks, frac in points:
            w.writerow((weeks, repr(frac)))
    print(f"wrote {len(points)} CDF points to {args.out}")
    return EXIT_OK


def cmd_metrics(args) -> int:
    g = graph.read_edge_list(_need(args.edges))
    met = graph.all_metrics(g, args.mincut_sample_size, int(args.mincut_sample_threshold), int(args.seed))
    graph.write_metrics_csv(met, args.out)
    print(f"wrote metrics for {len(met)} nodes to {args.out}")
    return EXIT_OK


# --------------------------------------------------------------------------
# Parser
# --------------------------------------------------------------------------

DEFAULT_HORIZONS = "2,4,12,24"


def _add_window(p, horizons_help="comma-separated month offsets after t1 for the test windows (default 2,4,12,24)"):
    p.add_argument("--t", help="start of the initial window G_t (ISO-8601)")
    p.add_argument("--t1", help="start of the training-label window G_t1 (ISO-8601)")
    p.add_argument("--delta", type=int, default=ingest.DEFAULT_WINDOW_DAYS, help="window length in days (default 45)")
    p.add_argument("--horizons", default=None, help=horizons_help)


def _add_mincut(p):
    p.add_argument("--mincut-sample-size", type=int, default=None,
                   help="estimate avg_min_cut from this many sampled partner nodes on large graphs")
    p.add_argument("--mincut-sample-threshold", type=int, default=graph.DEFAULT_SAMPLE_THRESHOLD,
                   help="node count above which sampling applies (default 2000)")


def _add_method(p):
    p.add_argument("--method", default="svm", help="stm:<attribute>, logreg, svm or forest (default svm)")
    p.add_argument("--metric", default="f1", choices=stm.METRICS, help="metric the STM threshold maximizes")
    p.add_argument("--classifier-config", default=None, help="JSON object of classifier hyperparameters")


def build_parser() -> tuple[argparse.ArgumentParser, dict[str, argparse.ArgumentParser]]:
    parser = argparse.ArgumentParser(prog="aliveness", description="Predict which community members become inactive.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    subs = {}

    def add(name, func, help):
        p = sub.add_parser(name, help=help, description=help)
        p.add_argument("--config", default=None, help="JSON file with default values for this command's flags")
        p.add_argument("-v", "--verbose", action="store_true", help="debug logging")
        p.add_argument("--seed", type=int, default=0, help="master random seed (default 0)")
        p.set_defaults(func=func)
        subs[name] = p
        return p

    p = add("synth", cmd_synth, "generate a synthetic community with a planted departure rule")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--nodes", type=int, default=120, help="number of members")
    p.add_argument("--density", type=float, default=0.025, help="edge probability of the first-window graph")
    p.add_argument("--rule-attribute", default="degree", help="feature the departure rule thresholds")
    p.add_argument("--rule-threshold", type=float, default=3.0, help="members with attribute below this depart")
    p.add_argument("--noise", type=float, default=0.0, help="probability of flipping a member's fate, in [0, 0.5)")
    p.add_argument("--months", type=int, default=30, help="length of the corpus in months")
    p.add_argument("--start", default="2010-01-01T00:00:00Z", help="corpus start time")
    p.add_argument("--delta", type=int, default=ingest.DEFAULT_WINDOW_DAYS, help="length of the first window in days")

    p = add("snapshot", cmd_snapshot, "build G_t, G_t1 and one snapshot per horizon")
    p.add_argument("--events", required=True, help="events CSV (timestamp,actor,target,kind)")
    _add_window(p)
    p.add_argument("--kinds", default=None, help="comma-separated event kinds to keep (default all)")
    p.add_argument("--out", required=True, help="output directory for G_*.edges and sidecars")

    p = add("features", cmd_features, "assemble the feature matrix of G_t's nodes")
    p.add_argument("--snapshots", required=True, help="directory written by 'snapshot'")
    p.add_argument("--attributes", default=None, help="member attributes CSV")
    p.add_argument("--against", default="t1", help="snapshot whose node set defines the labels (t1 or h<months>)")
    p.add_argument("--out", required=True, help="feature matrix CSV")
    _add_mincut(p)

    p = add("fit", cmd_fit, "fit an STM or classifier on a feature matrix")
    p.add_argument("--features", required=True, help="training feature matrix CSV")
    _add_method(p)
    p.add_argument("--variant", default="All", choices=features.VARIANTS, help="feature subset (classifiers only)")
    p.add_argument("--out", required=True, help="model JSON")

    p = add("predict", cmd_predict, "predict leave labels with a fitted model")
    p.add_argument("--model", required=True, help="model JSON from 'fit'")
    p.add_argument("--features", required=True, help="feature matrix CSV")
    p.add_argument("--out", required=True, help="predictions CSV")

    p = add("evaluate", cmd_evaluate, "run the horizon experiment (one-shot) or score a fitted model (staged)")
    p.add_argument("--events", default=None, help="events CSV (one-shot mode)")
    p.add_argument("--attributes", default=None, help="member attributes CSV")
    _add_window(p, "comma-separated month offsets after t1 (one-shot default 2,4,12,24; "
                   "staged default: every G_h* snapshot present)")
    _add_method(p)
    p.add_argument("--variants", default="All", help="comma-separated variants: All,Best4,Best1,Best2")
    p.add_argument("--model", default=None, help="model JSON (staged mode, with --snapshots)")
    p.add_argument("--snapshots", default=None, help="snapshot directory (staged mode)")
    p.add_argument("--test-events", default=None, help="cross-dataset: events CSV of the test community")
    p.add_argument("--test-attributes", default=None, help="cross-dataset: attributes CSV of the test community")
    p.add_argument("--test-t", default=None, help="cross-dataset: G_t start in the test community")
    p.add_argument("--test-t1", default=None, help="cross-dataset: G_t1 start in the test community")
    p.add_argument("--cv", type=int, default=None, help="also run stratified k-fold CV on the training matrix")
    p.add_argument("--cv-seed", type=int, default=42, help="fold assignment seed (default 42)")
    p.add_argument("--out", required=True, help="report CSV")
    p.add_argument("--json", default=None, help="also write the report as JSON")
    _add_mincut(p)

    p = add("importance", cmd_importance, "random-forest feature importance ranking")
    p.add_argument("--features", required=True, help="feature matrix CSV")
    p.add_argument("--n-trees", type=int, default=100, help="number of trees")
    p.add_argument("--out", required=True, help="ranking CSV (feature,weight)")

    p = add("correlate", cmd_correlate, "Pearson correlation matrix of the features")
    p.add_argument("--features", required=True, help="feature matrix CSV")
    p.add_argument("--out", required=True, help="correlation matrix CSV")

    p = add("cdf", cmd_cdf, "CDF of members' active weeks")
    p.add_argument("--attributes", required=True, help="member attributes CSV")
    p.add_argument("--out", required=True, help="CSV with columns weeks,cdf")

    p = add("metrics", cmd_metrics, "node measures of an edge-list graph")
    p.add_argument("--edges", required=True, help="edge list (<node>\\t<node> per line)")
    p.add_argument("--out", required=True, help="metrics CSV")
    _add_mincut(p)
    return parser, subs


def _apply_config(sub: argparse.ArgumentParser, path: str) -> None:
    try:
        cfg = json.loads(_need(path).read_text())
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(cfg, dict):
        raise ValueError(f"{path}: config must be a JSON object")
    known = {a.dest for a in sub._actions}
    values = {}
    for key, val in cfg.items():
        dest = key.replace("-", "_")
        if dest not in known or dest in ("config", "help"):
            raise ValueError(f"{path}: unknown option {key!r}")
        if isinstance(val, list) and dest in ("horizons", "variants", "kinds"):
            val = ",".join(map(str, val))
        values[dest] = val
    for action in sub._actions:
        if action.dest in values:
            action.required = False
    sub.set_defaults(**values)


def _config_path(argv: list[str]) -> str | None:
    for i, tok in enumerate(argv):
        if tok == "--config" and i + 1 < len(argv):
            return argv[i + 1]
        if tok.startswith("--config="):
            return tok.split("=", 1)[1]
    return None


def main(argv=None) -> int:
    parser, subs = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        # config values become subcommand defaults before parsing, so flags still win
        command = next((tok for tok in argv if tok in subs), None)
        cfg_path = _config_path(argv)
        if command and cfg_path:
            _apply_config(subs[command], cfg_path)
    except MissingArtifact as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISSING
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors, which would collide with "missing artifact"
        return EXIT_OK if exc.code == 0 else EXIT_DATA
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except MissingArtifact as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISSING
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_DATA
    except (ValueError, KeyError, classifier.ModelError, ingest.DataError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
