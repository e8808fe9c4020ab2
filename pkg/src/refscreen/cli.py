"""Command-line front end.

Exit codes: 0 success, 1 diagnostic failure (bad input, cold start, domain
errors), 2 usage errors (argparse's own). Every mutation goes through the same
store paths the HTTP service uses, so the two fronts never diverge.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import evaluation, ingest, keystore, llm, ranker, stopping, store

_FORMAT_BY_SUFFIX = {
    ".ris": "ris",
    ".nbib": "nbib",
    ".xml": "pubmed_xml",
    ".csv": "csv",
}


def _detect_format(path: Path, explicit: str | None) -> str:
    if explicit:
        return explicit
    fmt = _FORMAT_BY_SUFFIX.get(path.suffix.lower())
    if fmt is None:
        raise ingest.IngestError(
            f"cannot infer format from {path.name!r}; pass --format")
    return fmt


def _open(args) -> store.Project:
    return store.open_project(args.project)


def cmd_init(args) -> int:
    project = store.create_project(args.project)
    print(f"initialized project at {project.path}")
    return 0


def cmd_import(args) -> int:
    project = _open(args)
    path = Path(args.file)
    fmt = _detect_format(path, args.format)
    data = path.read_bytes()
    drafts = ingest.parse_records(data, fmt)
    report = ingest.import_batch(drafts, project, importer=args.reviewer,
                                 source_file=path.name)
    print(f"imported {report.imported_count}, "
          f"duplicates {report.duplicate_count}, "
          f"rejected {report.rejected_count}")
    if args.verbose:
        for index, ref_id, key in report.duplicates:
            print(f"  duplicate #{index}: matches {ref_id} ({key})")
    return 0


def cmd_export(args) -> int:
    project = _open(args)
    data = ingest.export_records(project, fmt=args.format, scope=args.scope)
    if args.out:
        Path(args.out).write_text(data, encoding="utf-8")
        print(f"wrote {args.out}")
    else:
        sys.stdout.write(data)
    return 0


def cmd_rank(args) -> int:
    project = _open(args)
    snapshot = ranker.snapshot_from_project(project)
    ranked = ranker.rank_unlabeled(snapshot, alpha=args.alpha)
    limit = args.limit if args.limit > 0 else len(ranked)
    for ref_id, score in ranked[:limit]:
        print(f"{ref_id}\t{score:.6f}")
    return 0


def cmd_decide(args) -> int:
    project = _open(args)
    decision_id = project.append_decision(store.Decision(
        decision_id="",
        ref_id=args.ref,
        reviewer_id=args.reviewer,
        decision=args.decision,
        reason=args.reason,
        note=args.note,
        client_version=llm._client_version(),
    ))
    status = project.effective_status(args.ref)
    print(f"{decision_id} recorded; {args.ref} is now {status}")
    return 0


def cmd_assign(args) -> int:
    project = _open(args)
    if args.calibration is not None:
        project.config_set("assign.calibration_size", str(args.calibration))
    if args.groups is not None:
        project.config_set("assign.group_count", str(args.groups))
    counts = store.assign_screening_sets(project)
    for name in sorted(counts):
        print(f"{name}: {counts[name]}")
    return 0


def cmd_config(args) -> int:
    project = _open(args)
    if args.key is None:
        for key, value in sorted(project.config_all().items()):
            print(f"{key}={value}")
        return 0
    if args.value is None:
        value = project.config_get(args.key)
        if value is None:
            print(f"unrecognized config key {args.key!r}", file=sys.stderr)
            return 1
        print(value)
        return 0
    project.config_set(args.key, args.value)
    print(f"{args.key}={args.value}")
    return 0


def cmd_stopping(args) -> int:
    project = _open(args)
    config = stopping.StoppingConfig(
        rule=args.rule or project.config_get("stop.rule"),
        n_consecutive=int(project.config_get("stop.n_consecutive")),
        target_recall=float(project.config_get("stop.target_recall")),
        confidence=float(project.config_get("stop.confidence")),
    )
    trajectory = stopping.trajectory_from_project(project)
    stop, p_value = stopping.evaluate(trajectory, config)
    run = stopping.trailing_irrelevant_run(trajectory.labels)
    print(f"rule={config.rule} screened={len(trajectory.labels)}"
          f"/{trajectory.total_records} relevant={sum(trajectory.labels)}"
          f" trailing_run={run} p_value={p_value:.6g}")
    print("stop recommended" if stop else "keep screening")
    return 0


def _provider_from_config(project: store.Project, mock_script: str | None):
    config = llm.ProviderConfig(
        model_name=project.config_get("llm.model"),
        temperature=float(project.config_get("llm.temperature")),
        top_p=float(project.config_get("llm.top_p")),
        thinking_level=project.config_get("llm.thinking_level"),
    )
    if mock_script:
        script = json.loads(Path(mock_script).read_text(encoding="utf-8"))
        return llm.MockProvider(script, config)
    api_key = keystore.load_key("gemini")
    return llm.GeminiProvider(config, api_key)


def cmd_screen_llm(args) -> int:
    project = _open(args)
    criteria = args.criteria
    if args.criteria_file:
        criteria = Path(args.criteria_file).read_text(encoding="utf-8")
    if not criteria:
        criteria = project.config_get("llm.prompt")
    if not criteria.strip():
        print("no screening criteria: pass --criteria or set llm.prompt",
              file=sys.stderr)
        return 1
    provider = _provider_from_config(project, args.mock_script)
    prompt = llm.build_screening_prompt(
        criteria, project.config_get("llm.output_language"))
    execution = llm.run_batch(
        project, prompt, provider, scope=args.scope,
        threshold=args.threshold, execution_id=args.resume)
    cost = llm.execution_cost(project, execution.execution_id)
    print(f"{execution.execution_id}: targeted {execution.targeted_count}, "
          f"included {execution.included_count}, "
          f"excluded {execution.excluded_count}, est ${cost:.4f}")
    return 0


def cmd_threshold(args) -> int:
    project = _open(args)
    if args.confirm:
        execution = llm.confirm_threshold(project, args.execution, args.value)
        print(f"{execution.execution_id} confirmed at {execution.threshold}: "
              f"{execution.included_count} included, "
              f"{execution.excluded_count} excluded")
    else:
        included, excluded = llm.threshold_preview(
            project, args.execution, args.value)
        print(f"at {args.value}: {included} would be included, "
              f"{excluded} excluded")
    return 0


def cmd_eval_folds(args) -> int:
    records, truth = _load_eval_dataset(args)
    report = evaluation.run_fold_experiment(
        records, truth, k=args.k, seed=args.seed,
        out_dir=Path(args.out) if args.out else None,
        reference_dir=Path(args.reference) if args.reference else None,
        overlap_k=args.overlap_k)
    for result in report.results:
        line = f"fold {result.fold}: {len(result.ranking)} records"
        if result.overlap is not None:
            line += f", overlap {result.overlap:.3f}"
        print(line)
    overlaps = [o for o in report.overlaps if o is not None]
    if overlaps:
        print(f"mean overlap {sum(overlaps) / len(overlaps):.3f}")
    return 0


def cmd_eval_metrics(args) -> int:
    project = _open(args)
    truth = evaluation.load_truth_csv(args.truth)
    statuses = project.effective_statuses()
    predicted = {r: s == "include" for r, s in statuses.items()
                 if s in ("include", "exclude")}
    common = sorted(set(predicted) & set(truth))
    if not common:
        print("no decided records overlap the truth file", file=sys.stderr)
        return 1
    report = evaluation.metrics_report(
        {k: truth[k] for k in common}, {k: predicted[k] for k in common})
    print(json.dumps(report.to_dict(), indent=2, sort_keys=True))
    return 0


def cmd_eval_overlap(args) -> int:
    a = evaluation.read_ranking_csv(
        Path(args.ranking_a).read_text(encoding="utf-8"))
    b = evaluation.read_ranking_csv(
        Path(args.ranking_b).read_text(encoding="utf-8"))
    value = evaluation.topk_overlap(a, b, args.k)
    print(f"{value:.6f}")
    return 0


def cmd_eval_simulate(args) -> int:
    records, truth = _load_eval_dataset(args)
    ordered = sorted(truth)
    hidden = [truth[r] for r in ordered]
    config = stopping.StoppingConfig(
        rule=args.rule, n_consecutive=args.n_consecutive,
        target_recall=args.target_recall, confidence=args.confidence)
    hits = 0
    total = args.runs
    for seed in range(args.seed, args.seed + total):
        order = stopping.random_order(len(hidden), seed)
        recall, screened = stopping.simulate_until_stop(hidden, order, config)
        hits += recall >= args.target_recall
        if args.verbose:
            print(f"seed {seed}: recall {recall:.3f} after {screened}")
    print(f"{hits}/{total} runs reached recall >= {args.target_recall}")
    return 0


def _load_eval_dataset(args):
    if args.dataset:
        return evaluation.load_dataset_csv(args.dataset)
    from .datasets import synthetic_corpus
    return synthetic_corpus(args.synthetic_n, args.synthetic_relevant,
                            seed=args.seed)


def cmd_serve(args) -> int:
    from . import service
    ui_dir = args.ui_dir
    if ui_dir is None:
        bundled = Path(__file__).resolve().parent.parent.parent / "frontend" / "dist"
        if bundled.is_dir():
            ui_dir = bundled
    service.serve(args.project, host=args.host, port=args.port,
                  blind=args.blind, ui_dir=ui_dir)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="refscreen",
        description="Local-first screening for systematic reviews.")
    parser.add_argument("--project", default=".",
                        help="project directory (default: current)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("init", help="create an empty project")
    p.set_defaults(fn=cmd_init)

    p = sub.add_parser("import", help="import references from a file")
    p.add_argument("file")
    p.add_argument("--format", choices=sorted(ingest.FORMATS))
    p.add_argument("--reviewer", default="importer@local")
    p.add_argument("--verbose", action="store_true")
    p.set_defaults(fn=cmd_import)

    p = sub.add_parser("export", help="export records with final decisions")
    p.add_argument("--format", choices=list(ingest.EXPORT_FORMATS),
                   default="csv")
    p.add_argument("--scope", choices=list(ingest.EXPORT_SCOPES),
                   default="all")
    p.add_argument("--out", help="output file (default: stdout)")
    p.set_defaults(fn=cmd_export)

    p = sub.add_parser("rank", help="rank pending records by model certainty")
    p.add_argument("--alpha", type=float, default=ranker.DEFAULT_ALPHA)
    p.add_argument("--limit", type=int, default=20)
    p.set_defaults(fn=cmd_rank)

    p = sub.add_parser("decide", help="record a screening decision")
    p.add_argument("ref")
    p.add_argument("decision", choices=sorted(store.DECISION_VALUES))
    p.add_argument("--reviewer", default="reviewer@local")
    p.add_argument("--reason", default="")
    p.add_argument("--note", default="")
    p.set_defaults(fn=cmd_decide)

    p = sub.add_parser("assign", help="assign calibration and group sets")
    p.add_argument("--calibration", type=int)
    p.add_argument("--groups", type=int)
    p.set_defaults(fn=cmd_assign)

    p = sub.add_parser("config", help="read or write project configuration")
    p.add_argument("key", nargs="?")
    p.add_argument("value", nargs="?")
    p.set_defaults(fn=cmd_config)

    p = sub.add_parser("stopping", help="evaluate the stopping rule")
    p.add_argument("--rule", choices=("consecutive", "statistical"))
    p.set_defaults(fn=cmd_stopping)

    p = sub.add_parser("screen-llm", help="batch-screen records with an LLM")
    p.add_argument("--criteria", default="")
    p.add_argument("--criteria-file")
    p.add_argument("--scope", default="pending")
    p.add_argument("--threshold", type=float)
    p.add_argument("--resume", help="execution id to resume")
    p.add_argument("--mock-script",
                   help="JSON file of scripted responses (testing)")
    p.set_defaults(fn=cmd_screen_llm)

    p = sub.add_parser("threshold", help="preview or confirm a threshold")
    p.add_argument("execution")
    p.add_argument("value", type=float)
    p.add_argument("--confirm", action="store_true")
    p.set_defaults(fn=cmd_threshold)

    p = sub.add_parser("eval", help="evaluation experiments")
    esub = p.add_subparsers(dest="eval_command", required=True)

    e = esub.add_parser("folds", help="stratified fold ranking experiment")
    _dataset_args(e)
    e.add_argument("--k", type=int, default=10)
    e.add_argument("--overlap-k", type=int, default=100)
    e.add_argument("--out", help="directory for fold rankings")
    e.add_argument("--reference", help="directory of reference rankings")
    e.set_defaults(fn=cmd_eval_folds)

    e = esub.add_parser("metrics", help="confusion metrics vs a truth file")
    e.add_argument("truth")
    e.set_defaults(fn=cmd_eval_metrics)

    e = esub.add_parser("overlap", help="top-k overlap of two rankings")
    e.add_argument("ranking_a")
    e.add_argument("ranking_b")
    e.add_argument("--k", type=int, default=100)
    e.set_defaults(fn=cmd_eval_overlap)

    e = esub.add_parser("simulate", help="stopping-rule recall simulation")
    _dataset_args(e)
    e.add_argument("--rule", choices=("consecutive", "statistical"),
                   default="statistical")
    e.add_argument("--runs", type=int, default=100)
    e.add_argument("--n-consecutive", type=int, default=50)
    e.add_argument("--target-recall", type=float, default=0.95)
    e.add_argument("--confidence", type=float, default=0.95)
    e.add_argument("--verbose", action="store_true")
    e.set_defaults(fn=cmd_eval_simulate)

    p = sub.add_parser("serve", help="run the local web service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8377)
    p.add_argument("--blind", action="store_true",
                   help="hide other reviewers' decisions")
    p.add_argument("--ui-dir", help="static UI directory")
    p.set_defaults(fn=cmd_serve)

    return parser


def _dataset_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--dataset", help="dataset CSV (ref_id,title,abstract,label)")
    p.add_argument("--synthetic-n", type=int, default=300)
    p.add_argument("--synthetic-relevant", type=int, default=30)
    p.add_argument("--seed", type=int, default=42)


_DIAGNOSTIC = (
    store.StoreError,
    ingest.IngestError,
    ranker.RankerError,
    llm.LlmError,
    keystore.KeystoreError,
    ValueError,
    OSError,
)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except _DIAGNOSTIC as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
