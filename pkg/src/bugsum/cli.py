"""Command-line entry point: ``bugsum <subcommand> ...``.

Exit codes: 0 success, 1 usage error, 2 data/format error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .baselines import WalkConfig
from .benchgen import InjectedBenchmark, build_benchmark, is_fixed
from .corpus import (
    AnnotatedCorpus,
    IngestError,
    dump_annotations,
    dump_corpus,
    ingest_report,
    load_annotated_corpus,
    load_corpus,
    load_sds_xml,
    _read_records,
)
from .evaluation import (
    METRICS,
    VolunteerMatrix,
    ablate_volunteers,
    attribute_cluster,
    dump_json,
    evaluate,
    fisher_ranking,
    format_table,
    gold_standard,
    hit_rate,
    lrca_columns,
    volunteer_census,
    wilcoxon_signed_rank,
    write_winning_csv,
)
from .features import DUP_THRESHOLD, extract_matrix, get_schema, write_feature_csv
from .ranking import (
    RankModel,
    TrainConfig,
    TrainingError,
    labels_for,
    loo_folds,
    loo_rank,
    rank_report,
    train,
    train_on_corpus,
)
from .summarizer import BUDGET_FRACTION, METHODS, SUPERVISED, SchemaMismatch, dump_summaries, rank, select_budgeted, summarize
from .vsm import stats_for_reports

log = logging.getLogger("bugsum")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _config(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k != "func"}


def _threads(args) -> int:
    return args.threads or os.cpu_count() or 1


def _methods(values: list[str] | None, default: tuple[str, ...]) -> list[str]:
    if not values:
        return list(default)
    out = []
    for v in values:
        for m in v.split(","):
            m = m.strip().upper()
            if m == "ALL":
                out.extend(x for x in default if x not in out)
            elif m not in METHODS:
                raise UsageError(f"unknown method {m}; choose from {', '.join(METHODS)}")
            elif m not in out:
                out.append(m)
    return out


def _annotated(args) -> AnnotatedCorpus:
    if not args.annotations:
        raise UsageError("--annotations is required")
    return load_annotated_corpus(args.corpus, args.annotations)


def _write_text(path: Path, text: str) -> None:
    path.write_text(text + "\n", encoding="utf-8")


# subcommands


def cmd_ingest(args) -> int:
    if args.sds:
        if not args.sds_annotations:
            raise UsageError("--sds needs --sds-annotations")
        corpus = load_sds_xml(args.sds, args.sds_annotations)
        dump_corpus(corpus.reports, args.out)
        if args.annotations_out:
            dump_annotations(corpus.annotations, args.annotations_out)
        print(f"ingested {len(corpus.reports)} reports, {len(corpus.annotations)} annotated")
        return 0
    if not args.input:
        raise UsageError("ingest needs --input or --sds")
    reports = [ingest_report(rec) for rec in _read_records(Path(args.input))]
    dump_corpus(reports, args.out)
    print(f"ingested {len(reports)} reports, {sum(len(r.sentences) for r in reports)} sentences")
    return 0


def _walk(args) -> WalkConfig:
    return WalkConfig(damping=args.damping)


def cmd_summarize(args) -> int:
    reports = load_corpus(args.corpus)
    stats = stats_for_reports(reports)
    method = args.method.upper()
    model = RankModel.load(args.model) if args.model else None
    summaries = [
        summarize(r, method, stats, model, args.budget, dup_threshold=args.dup_threshold, walk=_walk(args))
        for r in reports
    ]
    out = Path(args.out)
    dump_summaries(summaries, out, _config(args))
    by_id = {r.report_id: r for r in reports}
    _write_text(out.with_suffix(".txt"), "\n\n".join(s.render(by_id[s.report_id]) for s in summaries))
    print(f"wrote {len(summaries)} summaries to {out}")
    return 0


def _train_config(args) -> TrainConfig:
    return TrainConfig(l2_lambda=args.l2, max_iters=args.max_iters)


def cmd_train(args) -> int:
    corpus = _annotated(args)
    model = train_on_corpus(corpus, args.schema, _train_config(args), args.dup_threshold)
    model.save(args.out)
    print(f"trained {model.schema} model on {len(corpus.annotated_reports)} reports -> {args.out}")
    return 0


def _loo_summaries(corpus, method, args, folds_cache: dict) -> dict[str, list[str]]:
    reports = corpus.annotated_reports
    if method in SUPERVISED:
        schema = SUPERVISED[method]
        if schema not in folds_cache:
            folds_cache[schema] = loo_folds(corpus, schema, args.dup_threshold, args.idf_scope, _threads(args))
        ranked = loo_rank(folds_cache[schema], _train_config(args))
    else:
        stats = stats_for_reports(reports)
        ranked = {r.report_id: rank(r, method, stats, walk=_walk(args)) for r in reports}
    by_id = {r.report_id: r for r in reports}
    return {rid: list(select_budgeted(rk, by_id[rid], args.budget).selected) for rid, rk in ranked.items()}


def _golds(corpus):
    return {rid: gold_standard(entries, rid) for rid, entries in corpus.annotations.items()}


def _word_counts(corpus):
    return {r.report_id: {s.id: s.word_count for s in r.sentences} for r in corpus.annotated_reports}


def cmd_loo_eval(args) -> int:
    methods = _methods(args.method, METHODS)
    corpus = _annotated(args)
    golds = _golds(corpus)
    folds_cache: dict = {}
    reports = []
    for m in methods:
        summaries = _loo_summaries(corpus, m, args, folds_cache)
        reports.append(evaluate(m, summaries, golds, args.avg, args.pyramid_mode, _word_counts(corpus),
                                {"budget_fraction": args.budget, "dup_threshold": args.dup_threshold,
                                 "include_crossing_sentence": True, "idf_scope": args.idf_scope}))
    table = format_table(reports)
    print(table)
    tests = {}
    if "LRCA" in methods:
        lrca = next(r for r in reports if r.method == "LRCA")
        rids = sorted(lrca.per_report)
        for other in reports:
            if other is lrca:
                continue
            tests[other.method] = {
                m: dict(zip(("statistic", "p_two_sided"), wilcoxon_signed_rank(
                    [lrca.per_report[r][m] for r in rids], [other.per_report[r][m] for r in rids])))
                for m in METRICS
            }
    out = Path(args.out)
    dump_json({"config": _config(args), "results": [r.to_json() for r in reports], "wilcoxon_vs_lrca": tests}, out)
    _write_text(out.with_suffix(".txt"), table)
    return 0


def cmd_bench_build(args) -> int:
    reports = load_corpus(args.corpus)
    bench = build_benchmark(reports, args.seed, is_fixed if args.fixed_only else None)
    bench.save(args.out)
    print(f"benchmark: {len(bench.reports)} of {len(reports)} reports, seed {args.seed} -> {args.out}")
    return 0


def _kfold_rank(bench: InjectedBenchmark, schema: str, args) -> dict[str, list]:
    """Cross-validated ranking on a benchmark whose only positive is the injected sentence."""
    reports = bench.reports
    k = max(2, min(args.folds, len(reports)))
    assign = {r.report_id: i % k for i, r in enumerate(reports)}
    out = {}
    for fold in range(k):
        train_reports = [r for r in reports if assign[r.report_id] != fold]
        stats = stats_for_reports(train_reports)
        mats = [extract_matrix(r, stats, schema, args.dup_threshold) for r in train_reports]
        X = np.vstack([m.values for m in mats])
        y = np.concatenate([labels_for(r, {bench.injected[r.report_id]}) for r in train_reports])
        model = train(X, y, _train_config(args), schema)
        for r in reports:
            if assign[r.report_id] == fold:
                out[r.report_id] = rank_report(model, extract_matrix(r, stats, schema, args.dup_threshold))
    return out


def cmd_bench_eval(args) -> int:
    methods = _methods(args.method, tuple(m for m in METHODS if m != "HURRIED"))
    bench = InjectedBenchmark.load(args.benchmark)
    stats = stats_for_reports(bench.reports)
    rows = {}
    for m in methods:
        if m in SUPERVISED:
            if args.model:
                model = RankModel.load(args.model)
                ranked = {r.report_id: rank(r, m, stats, model, args.dup_threshold) for r in bench.reports}
            else:
                ranked = _kfold_rank(bench, SUPERVISED[m], args)
        else:
            ranked = {r.report_id: rank(r, m, stats, walk=_walk(args)) for r in bench.reports}
        by_id = {r.report_id: r for r in bench.reports}
        selected = {rid: select_budgeted(rk, by_id[rid], args.budget).selected for rid, rk in ranked.items()}
        rows[m] = hit_rate(selected, bench.injected)
    lines = [f"{'Method':<12}{'HitRate':>10}", "-" * 22] + [f"{m:<12}{100 * v:>10.2f}" for m, v in rows.items()]
    print("\n".join(lines))
    out = Path(args.out)
    dump_json({"config": _config(args), "n_reports": len(bench.reports), "hit_rate": rows}, out)
    _write_text(out.with_suffix(".txt"), "\n".join(lines))
    return 0


def cmd_attr_stats(args) -> int:
    corpus = _annotated(args)
    schema = get_schema(args.schema)
    reports = corpus.annotated_reports
    stats = stats_for_reports(reports)
    golds = _golds(corpus)
    mats = [extract_matrix(r, stats, schema, args.dup_threshold) for r in reports]
    X = np.vstack([m.values for m in mats])
    y = np.concatenate([labels_for(r, golds[r.report_id].gss) for r in reports])
    ranking = fisher_ranking(X, y, schema.attributes)
    dendro = attribute_cluster(X, schema.attributes)
    lines = ["Fisher-score ranking", *(f"  {n:<8} {'+inf' if math.isinf(v) else f'{v:.4f}'}" for n, v in ranking),
             "", "Spearman |rho| average-linkage merges", dendro.render()]
    print("\n".join(lines))
    out = Path(args.out)
    dump_json({"config": _config(args), "fisher": [[n, "+inf" if math.isinf(v) else v] for n, v in ranking],
               "dendrogram": dendro.to_json()}, out)
    _write_text(out.with_suffix(".txt"), "\n".join(lines))
    if args.features_csv:
        labels = {(m.report_id, sid): int(sid in golds[m.report_id].gss) for m in mats for sid in m.sentence_ids}
        write_feature_csv(args.features_csv, mats, labels)
    return 0


def cmd_ablate(args) -> int:
    baseline_methods = _methods(args.method, ("CENTROID", "MMR", "GRASSHOPPER", "DIVRANK", "HURRIED", "BRC"))
    matrix = VolunteerMatrix.from_csv(args.volunteers)
    census = volunteer_census(matrix)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    summary = {"config": _config(args), "distinct_sets": len(census.distinct_sets),
               "combinations_by_size": census.combinations_by_size}
    print(f"{len(census.distinct_sets)} distinct attribute sets over {sum(census.combinations_by_size.values())} combinations")
    if args.census_only:
        dump_json(summary, out / "census.json")
        return 0
    corpus = _annotated(args)
    golds = _golds(corpus)
    wc = _word_counts(corpus)
    folds_cache: dict = {}
    baselines = {}
    for m in baseline_methods:
        baselines[m] = evaluate(m, _loo_summaries(corpus, m, args, folds_cache), golds, args.avg,
                                args.pyramid_mode, wc).aggregate
    folds = loo_folds(corpus, "LRCA11", args.dup_threshold, args.idf_scope, _threads(args))
    by_id = {r.report_id: r for r in corpus.annotated_reports}
    cfg = _train_config(args)

    def score(attr_set):
        ranked = loo_rank(folds, cfg, lrca_columns(attr_set))
        sums = {rid: select_budgeted(rk, by_id[rid], args.budget).selected for rid, rk in ranked.items()}
        return evaluate("LRCA", sums, golds, args.avg, args.pyramid_mode, wc).aggregate

    census, scores, tables = ablate_volunteers(matrix, score, baselines)
    for metric, table in tables.items():
        write_winning_csv(table, out / f"winning_{metric}.csv")
    summary["baselines"] = baselines
    summary["set_scores"] = [{"attributes": sorted(s), **v} for s, v in scores.items()]
    dump_json(summary, out / "ablation.json")
    print(f"winning tables written to {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="bugsum", description="Extractive bug report summarization toolkit.")
    p.add_argument("--version", action="version", version=f"bugsum {__version__}")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    def common(sp, corpus=True, annotations=False):
        if corpus:
            sp.add_argument("--corpus", required=True)
        if annotations:
            sp.add_argument("--annotations", required=True)
        sp.add_argument("--out", required=True)
        sp.add_argument("--budget", type=float, default=BUDGET_FRACTION)
        sp.add_argument("--dup-threshold", type=float, default=DUP_THRESHOLD)
        sp.add_argument("--threads", type=int, default=0)
        sp.add_argument("--damping", type=float, default=0.85)
        sp.add_argument("--l2", type=float, default=TrainConfig.l2_lambda)
        sp.add_argument("--max-iters", type=int, default=TrainConfig.max_iters)
        sp.add_argument("--idf-scope", choices=("train", "corpus"), default="train")
        sp.add_argument("--pyramid-mode", choices=("sentences", "words"), default="sentences")
        sp.add_argument("--avg", choices=("macro", "micro"), default="macro")
        sp.add_argument("--seed", type=int, default=0)

    s = sub.add_parser("ingest", help="raw report records -> corpus file")
    s.add_argument("--input")
    s.add_argument("--sds", help="SDS bugreports.xml")
    s.add_argument("--sds-annotations", help="SDS annotation.xml")
    s.add_argument("--annotations-out")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_ingest)

    s = sub.add_parser("summarize", help="summarize every report of a corpus")
    common(s)
    s.add_argument("--method", required=True)
    s.add_argument("--model")
    s.set_defaults(func=cmd_summarize)

    s = sub.add_parser("train", help="train a ranking model on an annotated corpus")
    common(s, annotations=True)
    s.add_argument("--schema", default="LRCA11")
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("loo-eval", help="leave-one-out evaluation table")
    common(s, annotations=True)
    s.add_argument("--method", action="append")
    s.set_defaults(func=cmd_loo_eval)

    s = sub.add_parser("bench-build", help="build a title-injection benchmark")
    common(s)
    s.add_argument("--fixed-only", action="store_true")
    s.set_defaults(func=cmd_bench_build)

    s = sub.add_parser("bench-eval", help="HitRate of methods on a benchmark")
    common(s, corpus=False)
    s.add_argument("--benchmark", required=True)
    s.add_argument("--method", action="append")
    s.add_argument("--model")
    s.add_argument("--folds", type=int, default=10)
    s.set_defaults(func=cmd_bench_eval)

    s = sub.add_parser("attr-stats", help="Fisher-score ranking and Spearman clustering")
    common(s, annotations=True)
    s.add_argument("--schema", default="LRCA11")
    s.add_argument("--features-csv")
    s.set_defaults(func=cmd_attr_stats)

    s = sub.add_parser("ablate", help="volunteer-combination ablation and winning tables")
    common(s, corpus=False)
    s.add_argument("--corpus")
    s.add_argument("--annotations")
    s.add_argument("--volunteers", help="volunteer x attribute CSV (default: shipped table)")
    s.add_argument("--method", action="append")
    s.add_argument("--census-only", action="store_true")
    s.set_defaults(func=cmd_ablate)
    return p


def run(argv: list[str] | None = None) -> int:
    level = os.environ.get("BUGSUM_LOG", "error").upper()
    logging.basicConfig(level=getattr(logging, level, logging.ERROR), format="%(levelname)s %(name)s: %(message)s")
    try:
        args = build_parser().parse_args(argv)
        if not getattr(args, "func", None):
            raise UsageError("a subcommand is required: ingest, summarize, train, loo-eval, bench-build, "
                             "bench-eval, attr-stats, ablate")
        if getattr(args, "command", None) == "ablate" and not args.census_only and not args.corpus:
            raise UsageError("ablate needs --corpus and --annotations unless --census-only")
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (TrainingError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3
    except (IngestError, SchemaMismatch, ValueError, KeyError, OSError, json.JSONDecodeError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
