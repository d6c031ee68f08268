"""Command-line surface: one subcommand per module boundary plus `run`.

Exit codes: 0 success, 1 usage error (bad flags, missing inputs), 2 data
error (malformed files), 3 invariant violation (e.g. a leaky split).
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .cluster import (
    ClusterModelError,
    kmeans,
    load_cluster_model,
    save_cluster_model,
    silhouette,
    truncated_svd,
    write_inspection_file,
)
from .corpus import (
    Corpus,
    CorpusError,
    filter_annotators,
    ingest_corpus,
    load_split,
    make_split,
    save_split,
    verify_split,
)
from .disclosure import (
    PatternError,
    PatternSet,
    audit_sample,
    build_profiles,
    default_patterns,
    extract_disclosures,
    ngram_stats,
    write_audit_file,
    write_ngram_tsv,
)
from .embed import EmbedderConfig, EmbeddingMatrix, EmbxError, embed_text, embed_texts, export_embeddings
from .model import (
    ModelFileError,
    TrainConfig,
    build_features,
    evaluate,
    load_model,
    save_model,
    significance_test,
    train,
)
from .pipeline import (
    ConfigError,
    InvariantViolation,
    effective_config_text,
    merge_reports,
    parse_config,
    run_pipeline,
)
from .sampler import (
    CategoryFilter,
    category_coverage,
    dump_contexts,
    load_contexts,
    sample_context,
    similar_post_diversity,
)
from .synthgen import PopulationSpec, SynthesisError, generate_population, write_population

_DATA_ERRORS = (
    CorpusError, EmbxError, PatternError, ModelFileError, ClusterModelError,
    ConfigError, SynthesisError, json.JSONDecodeError, UnicodeDecodeError,
)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage problems; the contract here is 1
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _require_files(*paths) -> None:
    for p in paths:
        if p is not None and not Path(p).exists():
            raise UsageError(f"input not found: {p}")


def _load_corpus(args) -> Corpus:
    _require_files(args.posts, args.comments, args.verdicts)
    corpus, _ = ingest_corpus(args.posts, args.comments, args.verdicts)
    return corpus


def _comments_only_corpus(comments_path) -> Corpus:
    _require_files(comments_path)
    from .corpus import Comment, _iter_jsonl, _require_str

    comments = {}
    for lineno, rec in _iter_jsonl(Path(comments_path)):
        where = f"{Path(comments_path).name} line {lineno}"
        cid = _require_str(rec, "id", where)
        if cid in comments:
            raise CorpusError(f"{where}: duplicate comment id {cid!r}")
        comments[cid] = Comment(
            id=cid,
            author_id=_require_str(rec, "author_id", where),
            text=_require_str(rec, "text", where),
        )
    return Corpus(posts={}, comments=comments, verdicts=[])


def _patterns(args) -> PatternSet:
    if getattr(args, "patterns", None):
        _require_files(args.patterns)
        return PatternSet.load(args.patterns)
    return default_patterns()


def _embed_cfg(args) -> EmbedderConfig:
    return EmbedderConfig(
        dim=args.dim, ngram_range=(args.ngram_lo, args.ngram_hi), seed=args.embed_seed)


def _embed_corpus(corpus: Corpus, cfg: EmbedderConfig) -> EmbeddingMatrix:
    items = [(pid, corpus.posts[pid].query_text()) for pid in sorted(corpus.posts)]
    items += [(cid, corpus.comments[cid].text) for cid in sorted(corpus.comments)]
    return embed_texts(items, cfg)


def _add_corpus_flags(p) -> None:
    p.add_argument("--posts", required=True)
    p.add_argument("--comments", required=True)
    p.add_argument("--verdicts", required=True)


def _add_embed_flags(p) -> None:
    p.add_argument("--dim", type=int, default=4096)
    p.add_argument("--ngram-lo", type=int, default=1)
    p.add_argument("--ngram-hi", type=int, default=2)
    p.add_argument("--embed-seed", type=int, default=0)


def _category_filter_from(token: str | None) -> CategoryFilter | None:
    if not token or token == "none":
        return None
    from .disclosure import HighLevelCategory

    family, _, value = token.partition(":")
    if family == "theory":
        try:
            return CategoryFilter(theory=HighLevelCategory(value))
        except ValueError:
            raise UsageError(f"unknown theory category {value!r}")
    if family == "cluster":
        try:
            return CategoryFilter(cluster=int(value))
        except ValueError:
            raise UsageError(f"bad cluster id {value!r}")
    raise UsageError(f"bad category token {token!r}")


# ---------------------------------------------------------------------------
# subcommand handlers

def _write_corpus_files(corpus: Corpus, outdir: Path) -> None:
    with open(outdir / "posts.jsonl", "w", encoding="utf-8") as fh:
        for pid in sorted(corpus.posts):
            post = corpus.posts[pid]
            fh.write(json.dumps({
                "id": post.id, "author_id": post.author_id,
                "title": post.title, "body": post.body,
            }, ensure_ascii=False) + "\n")
    with open(outdir / "comments.jsonl", "w", encoding="utf-8") as fh:
        for cid in sorted(corpus.comments):
            comment = corpus.comments[cid]
            fh.write(json.dumps({
                "id": comment.id, "author_id": comment.author_id,
                "text": comment.text,
            }, ensure_ascii=False) + "\n")
    with open(outdir / "verdicts.jsonl", "w", encoding="utf-8") as fh:
        for v in corpus.verdicts:
            fh.write(json.dumps({
                "post_id": v.post_id, "annotator_id": v.annotator_id,
                "label": v.label, "justification": v.justification,
            }, ensure_ascii=False) + "\n")


def _cmd_ingest(args) -> int:
    _require_files(args.posts, args.comments, args.verdicts)
    corpus, report = ingest_corpus(args.posts, args.comments, args.verdicts)
    filtered, filter_report = filter_annotators(corpus, args.min_comments, args.max_comments)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    _write_corpus_files(filtered, outdir)
    (outdir / "ingest_report.json").write_text(
        json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n")
    (outdir / "filter_report.json").write_text(
        json.dumps(filter_report.to_dict(), indent=2, sort_keys=True) + "\n")
    print(f"posts={report.n_posts} comments={report.n_comments} "
          f"verdicts_kept={filter_report.n_verdicts_kept} "
          f"self_verdicts_dropped={report.n_self_verdicts_dropped}")
    return 0


def _cmd_extract(args) -> int:
    corpus = _comments_only_corpus(args.comments)
    pats = _patterns(args)
    profiles = build_profiles(corpus, pats)
    with open(args.spans_out, "w", encoding="utf-8") as fh:
        for cid in sorted(corpus.comments):
            for span in extract_disclosures(corpus.comments[cid], pats):
                fh.write(json.dumps({
                    "comment_id": span.comment_id,
                    "sentence_index": span.sentence_index,
                    "category": span.category.value,
                    "high_level": span.high_level.value,
                    "start": span.start,
                    "end": span.end,
                    "matched_text": span.matched_text,
                }, ensure_ascii=False) + "\n")
    if args.profiles_out:
        with open(args.profiles_out, "w", encoding="utf-8") as fh:
            for cid in sorted(profiles):
                prof = profiles[cid]
                fh.write(json.dumps({
                    "comment_id": cid,
                    "theory_categories": sorted(c.value for c in prof.theory_categories),
                    "passes_phrase_filter": prof.passes_phrase_filter,
                }) + "\n")
    n_spans = sum(
        len(extract_disclosures(corpus.comments[cid], pats)) for cid in corpus.comments)
    print(f"comments={len(corpus.comments)} spans={n_spans}")
    return 0


def _cmd_cluster(args) -> int:
    corpus = _comments_only_corpus(args.comments)
    pats = _patterns(args)
    profiles = build_profiles(corpus, pats)
    eligible = [cid for cid in sorted(corpus.comments)
                if profiles[cid].passes_phrase_filter]
    if len(eligible) < args.k:
        raise CorpusError(f"only {len(eligible)} phrase-filtered comments for k={args.k}")
    cfg = _embed_cfg(args)
    matrix = embed_texts(
        [(cid, corpus.comments[cid].text) for cid in eligible], cfg)
    target = min(args.reduce_dim, len(eligible), matrix.dim)
    reduced = truncated_svd(matrix, target, seed=args.seed)
    model = kmeans(reduced, args.k, seed=args.seed)
    save_cluster_model(model, args.model_out)
    sil = silhouette(reduced, model) if args.k >= 2 else None
    if args.inspect_out:
        texts = {cid: corpus.comments[cid].text for cid in eligible}
        write_inspection_file(model, reduced, texts, args.inspect_n, args.seed, args.inspect_out)
    msg = f"k={args.k} inertia={model.inertia:.4f}"
    if sil is not None:
        msg += f" silhouette={sil.mean:.4f}"
    print(msg)
    return 0


def _cmd_split(args) -> int:
    corpus = _load_corpus(args)
    ratios = tuple(float(x) for x in args.ratios.split(","))
    spec = make_split(corpus, args.kind, ratios, seed=args.seed)
    report = verify_split(spec, corpus)
    save_split(spec, args.out)
    sizes = spec.sizes()
    print(f"train={sizes['train']} val={sizes['val']} test={sizes['test']}")
    if not report.ok:
        for msg in report.messages():
            print(f"violation: {msg}", file=sys.stderr)
        return 3
    return 0


def _cmd_sample(args) -> int:
    corpus = _load_corpus(args)
    pats = _patterns(args)
    cluster_assignment = None
    if args.cluster_model:
        _require_files(args.cluster_model)
        cluster_assignment = load_cluster_model(args.cluster_model).assignment
    profiles = build_profiles(corpus, pats, cluster_assignment)
    cfg = _embed_cfg(args)
    matrix = _embed_corpus(corpus, cfg)
    from .sampler import SamplerConfig

    sampler_cfg = SamplerConfig(
        strategy=args.strategy,
        max_samples=args.max_samples,
        category_filter=_category_filter_from(args.category),
        seed=args.seed,
        replication_mode=not args.no_replication_check,
    )
    embed_fn = (lambda text: embed_text(text, cfg)) if "sentences" in args.strategy else None
    contexts = []
    for v in corpus.verdicts:
        contexts.append(sample_context(
            v.annotator_id, v.post_id, corpus, matrix, profiles, sampler_cfg,
            embed_fn=embed_fn))
    dump_contexts(contexts, args.out)
    print(f"contexts={len(contexts)}")
    return 0


def _features_for(args, corpus, matrix, cfg, contexts, indices):
    by_pair = {(c.annotator_id, c.post_id): c for c in contexts}
    pairs = []
    for vi in indices:
        v = corpus.verdicts[vi]
        try:
            ctx = by_pair[(v.annotator_id, v.post_id)]
        except KeyError:
            raise CorpusError(
                f"contexts file lacks pair ({v.annotator_id}, {v.post_id})")
        fv = build_features(matrix.row(v.post_id), ctx, embeddings=matrix,
                            embed_fn=lambda text: embed_text(text, cfg))
        pairs.append((fv, v.label))
    return pairs


def _cmd_train(args) -> int:
    corpus = _load_corpus(args)
    _require_files(args.contexts, args.split)
    split = load_split(args.split)
    cfg = _embed_cfg(args)
    matrix = _embed_corpus(corpus, cfg)
    contexts = load_contexts(args.contexts, corpus)
    dataset = _features_for(args, corpus, matrix, cfg, contexts, split.indices("train"))
    tc = TrainConfig(
        epochs=args.epochs, learning_rate=args.learning_rate,
        focal_gamma=args.focal_gamma,
        focal_alpha=tuple(float(x) for x in args.focal_alpha.split(",")) if args.focal_alpha else None,
        batch_size=args.batch_size, runs=1, seed=args.seed,
    )
    params = train(dataset, tc)
    save_model(params, args.model_out)
    print(f"trained on {len(dataset)} examples; final loss "
          f"{params.loss_history[-1]:.6f}" if params.loss_history else
          f"trained on {len(dataset)} examples")
    return 0


def _cmd_evaluate(args) -> int:
    corpus = _load_corpus(args)
    _require_files(args.model, args.contexts, args.split)
    params = load_model(args.model)
    split = load_split(args.split)
    cfg = _embed_cfg(args)
    matrix = _embed_corpus(corpus, cfg)
    contexts = load_contexts(args.contexts, corpus)
    dataset = _features_for(args, corpus, matrix, cfg, contexts, split.indices(args.partition))
    report = evaluate(params, dataset)
    payload = {
        "n": report.n,
        "accuracy": report.accuracy,
        "macro_f1": report.macro_f1,
        "per_class": {
            lab: {"precision": m.precision, "recall": m.recall,
                  "f1": m.f1, "support": m.support}
            for lab, m in report.per_class.items()
        },
        "correctness": report.correctness.tolist(),
    }
    Path(args.report_out).write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    print(f"n={report.n} accuracy={report.accuracy:.4f} macro_f1={report.macro_f1:.4f}")
    return 0


def _cmd_analyze(args) -> int:
    if args.what == "coverage":
        corpus = _comments_only_corpus(args.comments)
        pats = _patterns(args)
        cluster_assignment = None
        if args.cluster_model:
            cluster_assignment = load_cluster_model(args.cluster_model).assignment
        profiles = build_profiles(corpus, pats, cluster_assignment)
        contexts = load_contexts(args.contexts, corpus)
        table = category_coverage(contexts, profiles)
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write("family\tbucket\tpercent\n")
            for bucket, pct in table.theory_pct.items():
                fh.write(f"theory\t{bucket}\t{pct:.2f}\n")
            for bucket, pct in table.cluster_pct.items():
                fh.write(f"cluster\t{bucket}\t{pct:.2f}\n")
        print(f"items={table.n_items}")
    elif args.what == "diversity":
        corpus = _comments_only_corpus(args.comments)
        contexts = load_contexts(args.contexts, corpus)
        report = similar_post_diversity(contexts, corpus)
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write("measure\tlower_whisker\tq1\tmedian\tq3\tupper_whisker\tn\n")
            c = report.coverage
            fh.write(f"coverage\t{c.lower_whisker:.4f}\t{c.q1:.4f}\t{c.median:.4f}"
                     f"\t{c.q3:.4f}\t{c.upper_whisker:.4f}\t{len(report.coverage_values)}\n")
            if report.rank_ratio is not None:
                r = report.rank_ratio
                fh.write(f"rank_ratio\t{r.lower_whisker:.4f}\t{r.q1:.4f}\t{r.median:.4f}"
                         f"\t{r.q3:.4f}\t{r.upper_whisker:.4f}\t{len(report.rank_ratio_values)}\n")
        print(f"annotators={len(report.coverage_values)}")
    elif args.what == "ngrams":
        corpus = _comments_only_corpus(args.comments)
        rows = ngram_stats(corpus, args.n, args.position)
        write_ngram_tsv(rows[:args.top] if args.top else rows, args.out)
        print(f"ngrams={len(rows)}")
    elif args.what == "audit":
        corpus = _comments_only_corpus(args.comments)
        records = audit_sample(corpus, args.category, args.n, args.seed, _patterns(args))
        write_audit_file(records, args.out)
        print(f"sampled={len(records)}")
    elif args.what == "significance":
        _require_files(args.report_a, args.report_b)
        a = json.loads(Path(args.report_a).read_text(encoding="utf-8"))
        b = json.loads(Path(args.report_b).read_text(encoding="utf-8"))
        t, p = significance_test(a["correctness"], b["correctness"])
        print(f"t={t:.4f} p={p:.6g}")
    else:  # pragma: no cover - argparse restricts choices
        raise UsageError(f"unknown analyze target {args.what!r}")
    return 0


def _cmd_synth(args) -> int:
    mix = {}
    for name, value in (("Demographics", args.mix_demographics),
                        ("Experiences", args.mix_experiences),
                        ("Attitudes", args.mix_attitudes),
                        ("Relationships", args.mix_relationships)):
        if value is not None:
            mix[name] = value
    spec = PopulationSpec(
        n_annotators=args.annotators,
        n_posts=args.posts,
        comments_per_annotator=(args.comments_lo, args.comments_hi),
        verdicts_per_annotator=(args.verdicts_lo, args.verdicts_hi),
        judgment_rule=args.rule,
        nta_base_rate=args.nta_base_rate,
        seed=args.seed,
        **({"disclosure_mix": mix} if mix else {}),
    )
    corpus, ground_truth = generate_population(spec)
    paths = write_population(corpus, ground_truth, args.out)
    print(f"posts={len(corpus.posts)} comments={len(corpus.comments)} "
          f"verdicts={len(corpus.verdicts)} -> {paths['posts'].parent}")
    return 0


def _cmd_embed(args) -> int:
    corpus = _load_corpus(args)
    cfg = _embed_cfg(args)
    matrix = _embed_corpus(corpus, cfg)
    export_embeddings(matrix, args.out)
    print(f"rows={len(matrix)} dim={matrix.dim}")
    return 0


def _cmd_run(args) -> int:
    _require_files(args.config)
    overrides = {}
    for item in args.set or []:
        if "=" not in item:
            raise UsageError(f"--set expects section.key=value, got {item!r}")
        key, value = item.split("=", 1)
        overrides[key.strip()] = value.strip()
    # --seed / --out are shorthand for [run] overrides; routing them through
    # the parser keeps seeds derived at parse time (synth) consistent
    if args.seed is not None:
        overrides["run.seed"] = str(args.seed)
    if args.out:
        overrides["run.out"] = args.out
    cfg = parse_config(args.config, overrides)
    if args.print_effective_config:
        sys.stdout.write(effective_config_text(cfg))
        return 0
    rows = run_pipeline(cfg, workers=args.workers)
    for row in rows:
        p = row.get("p_vs_baseline")
        suffix = f" p={p:.4g}" if p is not None else ""
        print(f"{row['condition']}: acc={row['accuracy']:.4f} "
              f"f1={row['macro_f1']:.4f}{suffix}")
    return 0


def _cmd_report(args) -> int:
    _require_files(*args.inputs)
    merge_reports(args.inputs, args.layout, args.out)
    print(f"wrote {args.out}")
    return 0


# ---------------------------------------------------------------------------
# parser wiring

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dlab", description=__doc__)
    parser.add_argument("--version", action="version", version=f"dlab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("ingest", help="validate and filter a corpus")
    _add_corpus_flags(p)
    p.add_argument("--min-comments", type=int, default=20)
    p.add_argument("--max-comments", type=int, default=500)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_ingest)

    p = sub.add_parser("extract", help="extract disclosure spans and profiles")
    p.add_argument("--comments", required=True)
    p.add_argument("--patterns")
    p.add_argument("--spans-out", required=True)
    p.add_argument("--profiles-out")
    p.set_defaults(func=_cmd_extract)

    p = sub.add_parser("embed", help="embed a corpus into an EMBX file")
    _add_corpus_flags(p)
    _add_embed_flags(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_embed)

    p = sub.add_parser("cluster", help="cluster phrase-filtered comments")
    p.add_argument("--comments", required=True)
    p.add_argument("--patterns")
    _add_embed_flags(p)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--reduce-dim", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--model-out", required=True)
    p.add_argument("--inspect-out")
    p.add_argument("--inspect-n", type=int, default=5)
    p.set_defaults(func=_cmd_cluster)

    p = sub.add_parser("split", help="make and verify a train/val/test split")
    _add_corpus_flags(p)
    p.add_argument("--kind", choices=("verdict", "situation", "author"), required=True)
    p.add_argument("--ratios", default="0.8,0.1,0.1")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_split)

    p = sub.add_parser("sample", help="sample contexts for every verdict pair")
    _add_corpus_flags(p)
    _add_embed_flags(p)
    p.add_argument("--patterns")
    p.add_argument("--strategy", choices=(
        "random_comments", "random_sentences", "similar_comments", "similar_sentences"),
        required=True)
    p.add_argument("--max-samples", type=int, required=True)
    p.add_argument("--category")
    p.add_argument("--cluster-model")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-replication-check", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_sample)

    p = sub.add_parser("train", help="train a verdict model from dumped contexts")
    _add_corpus_flags(p)
    _add_embed_flags(p)
    p.add_argument("--contexts", required=True)
    p.add_argument("--split", required=True)
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--learning-rate", type=float, default=1e-3)
    p.add_argument("--focal-gamma", type=float, default=2.0)
    p.add_argument("--focal-alpha")
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--model-out", required=True)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("evaluate", help="evaluate a saved model on a partition")
    _add_corpus_flags(p)
    _add_embed_flags(p)
    p.add_argument("--model", required=True)
    p.add_argument("--contexts", required=True)
    p.add_argument("--split", required=True)
    p.add_argument("--partition", choices=("train", "val", "test"), default="test")
    p.add_argument("--report-out", required=True)
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("analyze", help="coverage, diversity, ngrams, audit, significance")
    asub = p.add_subparsers(dest="what", required=True, parser_class=_Parser)

    pa = asub.add_parser("coverage")
    pa.add_argument("--contexts", required=True)
    pa.add_argument("--comments", required=True)
    pa.add_argument("--patterns")
    pa.add_argument("--cluster-model")
    pa.add_argument("--out", required=True)
    pa.set_defaults(func=_cmd_analyze)

    pa = asub.add_parser("diversity")
    pa.add_argument("--contexts", required=True)
    pa.add_argument("--comments", required=True)
    pa.add_argument("--out", required=True)
    pa.set_defaults(func=_cmd_analyze)

    pa = asub.add_parser("ngrams")
    pa.add_argument("--comments", required=True)
    pa.add_argument("--n", type=int, choices=(1, 2, 3), required=True)
    pa.add_argument("--position", choices=("before", "after"), required=True)
    pa.add_argument("--top", type=int, default=0)
    pa.add_argument("--out", required=True)
    pa.set_defaults(func=_cmd_analyze)

    pa = asub.add_parser("audit")
    pa.add_argument("--comments", required=True)
    pa.add_argument("--patterns")
    pa.add_argument("--category", required=True)
    pa.add_argument("--n", type=int, default=20)
    pa.add_argument("--seed", type=int, default=0)
    pa.add_argument("--out", required=True)
    pa.set_defaults(func=_cmd_analyze)

    pa = asub.add_parser("significance")
    pa.add_argument("--report-a", required=True)
    pa.add_argument("--report-b", required=True)
    pa.set_defaults(func=_cmd_analyze)

    p = sub.add_parser("synth", help="generate a synthetic population")
    p.add_argument("--annotators", type=int, default=200)
    p.add_argument("--posts", type=int, default=300)
    p.add_argument("--comments-lo", type=int, default=20)
    p.add_argument("--comments-hi", type=int, default=40)
    p.add_argument("--verdicts-lo", type=int, default=20)
    p.add_argument("--verdicts-hi", type=int, default=30)
    p.add_argument("--rule", choices=("demographic_keyed", "attitude_keyed", "random"),
                   default="demographic_keyed")
    p.add_argument("--nta-base-rate", type=float, default=0.7)
    p.add_argument("--mix-demographics", type=float)
    p.add_argument("--mix-experiences", type=float)
    p.add_argument("--mix-attitudes", type=float)
    p.add_argument("--mix-relationships", type=float)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("run", help="run a full experiment from an INI config")
    p.add_argument("--config", required=True)
    p.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE")
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.add_argument("--workers", type=int)
    p.add_argument("--print-effective-config", action="store_true")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("report", help="merge condition rows into a table layout")
    p.add_argument("--layout", choices=("grid", "category"), required=True)
    p.add_argument("--out", required=True)
    p.add_argument("inputs", nargs="+")
    p.set_defaults(func=_cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except SystemExit:
        raise
    except UsageError as exc:
        print(f"dlab: {exc}", file=sys.stderr)
        return 1
    except InvariantViolation as exc:
        print(f"dlab: invariant violation: {exc}", file=sys.stderr)
        return 3
    except _DATA_ERRORS as exc:
        print(f"dlab: data error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"dlab: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
