"""End-to-end experiment runner: config in, deterministic report out.

A run wires the whole chain together: corpus (ingested or synthesized),
annotator filtering, embeddings, category profiles (theory and optionally
cluster), a leakage-controlled split, a grid of sampling conditions plus
baselines, focal-loss training with repeated runs, evaluation, and Welch
significance against a baseline condition. Reruns of the same config write
byte-identical outputs: no timestamps, fixed float formatting, fixed row
order, and every random choice derived from the one seed in the config.
"""
from __future__ import annotations

import configparser
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import __version__
from .cluster import kmeans, truncated_svd
from .corpus import Corpus, filter_annotators, ingest_corpus, make_split, save_split, verify_split
from .disclosure import CategoryProfile, HighLevelCategory, build_profiles, default_patterns
from .embed import EmbedderConfig, EmbeddingMatrix, embed_texts, import_embeddings
from .model import EvalReport, TrainConfig, build_features, evaluate, significance_test, train
from .sampler import (
    STRATEGIES,
    CategoryFilter,
    ContextSet,
    SamplerConfig,
    dump_contexts,
    full_pool_context,
    sample_context,
)
from .seeds import derive_seed
from .synthgen import PopulationSpec, generate_population, write_population

BASELINE_CONDITIONS = ("no_comments", "all_comments")


class ConfigError(ValueError):
    """Unusable experiment config: unknown keys, bad values, missing parts."""


class InvariantViolation(RuntimeError):
    """A mid-run integrity check failed (e.g. a leaky split)."""


@dataclass(frozen=True)
class Condition:
    name: str
    kind: str  # "baseline" | "grid"
    strategy: str | None = None
    max_samples: int | None = None
    category_token: str | None = None  # "theory:Demographics" | "cluster:3" | None


@dataclass
class ExperimentConfig:
    seed: int = 42
    out: str = "runs/exp"
    corpus_paths: tuple[str, str, str] | None = None
    synth: PopulationSpec | None = None
    min_comments: int = 20
    max_comments: int = 500
    embed_dim: int = 4096
    ngram_range: tuple[int, int] = (1, 2)
    embx_path: str | None = None
    cluster_enabled: bool = False
    cluster_k: int = 10
    reduce_dim: int = 5
    split_kind: str = "situation"
    split_ratios: tuple[float, float, float] = (0.8, 0.1, 0.1)
    strategies: tuple[str, ...] = ("similar_comments",)
    max_samples_list: tuple[int, ...] = (5,)
    categories: tuple[str, ...] = ("none",)
    baselines: tuple[str, ...] = ("no_comments",)
    baseline_condition: str = "no_comments"
    epochs: int = 10
    learning_rate: float = 1e-3
    focal_gamma: float = 2.0
    focal_alpha: tuple[float, float] | None = None
    batch_size: int = 32
    runs: int = 5
    save_contexts: bool = True

    def validate(self) -> None:
        if (self.corpus_paths is None) == (self.synth is None):
            raise ConfigError("configure exactly one of [corpus] paths or [synth]")
        for s in self.strategies:
            if s not in STRATEGIES:
                raise ConfigError(f"unknown strategy {s!r}")
        for b in self.baselines:
            if b not in BASELINE_CONDITIONS:
                raise ConfigError(f"unknown baseline {b!r}")
        if any(m < 1 for m in self.max_samples_list):
            raise ConfigError("max_samples values must be >= 1")
        for token in self.categories:
            if token != "none":
                _parse_category_token(token, k=None)
        if self.baseline_condition and self.baseline_condition not in self.baselines:
            raise ConfigError(
                f"baseline_condition {self.baseline_condition!r} not in baselines")


# ---------------------------------------------------------------------------
# config file parsing

_SCHEMA: dict[str, set[str]] = {
    "corpus": {"posts", "comments", "verdicts", "min_comments", "max_comments"},
    "synth": {"enabled", "n_annotators", "n_posts", "comments_lo", "comments_hi",
              "verdicts_lo", "verdicts_hi", "judgment_rule", "nta_base_rate",
              "mix_demographics", "mix_experiences", "mix_attitudes",
              "mix_relationships"},
    "embed": {"dim", "ngram_lo", "ngram_hi", "embx"},
    "cluster": {"enabled", "k", "reduce_dim"},
    "split": {"kind", "ratios"},
    "sampler": {"strategies", "max_samples", "categories", "baselines"},
    "train": {"epochs", "learning_rate", "focal_gamma", "focal_alpha",
              "batch_size", "runs"},
    "run": {"seed", "out", "baseline", "save_contexts"},
}


def _read_ini(path) -> configparser.ConfigParser:
    parser = configparser.ConfigParser()
    read = parser.read(path, encoding="utf-8")
    if not read:
        raise ConfigError(f"config file not found: {path}")
    return parser


def parse_config(path, overrides: dict[str, str] | None = None) -> ExperimentConfig:
    """Load an INI experiment config, apply section.key=value overrides,
    and validate against the schema (unknown keys are errors)."""
    parser = _read_ini(path)
    for key, value in (overrides or {}).items():
        if "." not in key:
            raise ConfigError(f"override {key!r} must look like section.key")
        section, opt = key.split(".", 1)
        if not parser.has_section(section):
            parser.add_section(section)
        parser.set(section, opt, value)

    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown config section [{section}]")
        for opt in parser.options(section):
            if opt not in _SCHEMA[section]:
                raise ConfigError(f"unknown key {opt!r} in section [{section}]")

    cfg = ExperimentConfig()

    def get(section, key, default=None):
        if parser.has_option(section, key):
            return parser.get(section, key)
        return default

    def getbool(section, key, default=False):
        if parser.has_option(section, key):
            try:
                return parser.getboolean(section, key)
            except ValueError:
                raise ConfigError(f"[{section}] {key} must be a boolean")
        return default

    try:
        seed = int(get("run", "seed", "42"))
        out = get("run", "out", "runs/exp")

        corpus_paths = None
        triple = (get("corpus", "posts"), get("corpus", "comments"),
                  get("corpus", "verdicts"))
        if any(p is not None for p in triple):
            if any(p is None for p in triple):
                raise ConfigError("[corpus] needs posts, comments, and verdicts paths")
            corpus_paths = triple

        synth = None
        if getbool("synth", "enabled", False):
            mix = {}
            for name, key in (("Demographics", "mix_demographics"),
                              ("Experiences", "mix_experiences"),
                              ("Attitudes", "mix_attitudes"),
                              ("Relationships", "mix_relationships")):
                raw = get("synth", key)
                if raw is not None:
                    mix[name] = float(raw)
            spec = PopulationSpec(
                n_annotators=int(get("synth", "n_annotators", "200")),
                n_posts=int(get("synth", "n_posts", "300")),
                comments_per_annotator=(int(get("synth", "comments_lo", "20")),
                                        int(get("synth", "comments_hi", "40"))),
                verdicts_per_annotator=(int(get("synth", "verdicts_lo", "20")),
                                        int(get("synth", "verdicts_hi", "30"))),
                judgment_rule=get("synth", "judgment_rule", "demographic_keyed"),
                nta_base_rate=float(get("synth", "nta_base_rate", "0.7")),
                seed=derive_seed(seed, "synth"),
                **({"disclosure_mix": mix} if mix else {}),
            )
            synth = spec

        ratios_raw = get("split", "ratios", "0.8,0.1,0.1")
        ratios = tuple(float(r) for r in ratios_raw.split(","))

        def split_list(raw):
            return tuple(tok.strip() for tok in raw.split(",") if tok.strip())

        focal_alpha_raw = get("train", "focal_alpha")
        focal_alpha = None
        if focal_alpha_raw:
            parts = [float(x) for x in focal_alpha_raw.split(",")]
            if len(parts) != 2:
                raise ConfigError("focal_alpha must be two comma-separated numbers")
            focal_alpha = (parts[0], parts[1])

        cfg = ExperimentConfig(
            seed=seed,
            out=out,
            corpus_paths=corpus_paths,
            synth=synth,
            min_comments=int(get("corpus", "min_comments", "20")),
            max_comments=int(get("corpus", "max_comments", "500")),
            embed_dim=int(get("embed", "dim", "4096")),
            ngram_range=(int(get("embed", "ngram_lo", "1")),
                         int(get("embed", "ngram_hi", "2"))),
            embx_path=get("embed", "embx"),
            cluster_enabled=getbool("cluster", "enabled", False),
            cluster_k=int(get("cluster", "k", "10")),
            reduce_dim=int(get("cluster", "reduce_dim", "5")),
            split_kind=get("split", "kind", "situation"),
            split_ratios=ratios,  # validated by make_split
            strategies=split_list(get("sampler", "strategies", "similar_comments")),
            max_samples_list=tuple(int(x) for x in split_list(get("sampler", "max_samples", "5"))),
            categories=split_list(get("sampler", "categories", "none")) or ("none",),
            baselines=split_list(get("sampler", "baselines", "no_comments")),
            baseline_condition=get("run", "baseline", "no_comments"),
            epochs=int(get("train", "epochs", "10")),
            learning_rate=float(get("train", "learning_rate", "1e-3")),
            focal_gamma=float(get("train", "focal_gamma", "2.0")),
            focal_alpha=focal_alpha,
            batch_size=int(get("train", "batch_size", "32")),
            runs=int(get("train", "runs", "5")),
            save_contexts=getbool("run", "save_contexts", True),
        )
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad config value: {exc}")
    cfg.validate()
    return cfg


def effective_config_text(cfg: ExperimentConfig) -> str:
    """Canonical one-value-per-line rendering used for provenance."""
    lines = [f"dlab.version = {__version__}"]
    for key in sorted(vars(cfg)):
        value = getattr(cfg, key)
        if isinstance(value, PopulationSpec):
            for skey in sorted(vars(value)):
                sval = getattr(value, skey)
                if isinstance(sval, dict):
                    sval = json.dumps(sval, sort_keys=True)
                lines.append(f"synth.{skey} = {sval}")
            continue
        lines.append(f"{key} = {value}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# conditions

def _parse_category_token(token: str, k: int | None):
    """Parse 'theory:<Category>' / 'cluster:<id>'; '*' expands later."""
    if ":" not in token:
        raise ConfigError(f"bad category token {token!r}")
    family, value = token.split(":", 1)
    if family == "theory":
        if value == "*":
            return None
        try:
            HighLevelCategory(value)
        except ValueError:
            raise ConfigError(f"unknown theory category {value!r}")
        return None
    if family == "cluster":
        if value == "*":
            return None
        try:
            cid = int(value)
        except ValueError:
            raise ConfigError(f"cluster id must be an integer, got {value!r}")
        if k is not None and not (0 <= cid < k):
            raise ConfigError(f"cluster id {cid} out of range for k={k}")
        return None
    raise ConfigError(f"unknown category family {family!r}")


def _expand_categories(tokens, cluster_enabled: bool, k: int) -> list[str | None]:
    out: list[str | None] = []
    for token in tokens:
        if token == "none":
            out.append(None)
        elif token == "theory:*":
            out.extend(f"theory:{c.value}" for c in HighLevelCategory)
        elif token == "cluster:*":
            if not cluster_enabled:
                raise ConfigError("cluster:* requires [cluster] enabled")
            out.extend(f"cluster:{i}" for i in range(k))
        else:
            _parse_category_token(token, k if cluster_enabled else None)
            if token.startswith("cluster:") and not cluster_enabled:
                raise ConfigError(f"{token!r} requires [cluster] enabled")
            out.append(token)
    return out


def build_conditions(cfg: ExperimentConfig) -> list[Condition]:
    conditions = [Condition(name=b, kind="baseline") for b in cfg.baselines]
    for strategy in cfg.strategies:
        for m in cfg.max_samples_list:
            for token in _expand_categories(cfg.categories, cfg.cluster_enabled, cfg.cluster_k):
                name = f"{strategy}-k{m}" + (f"-{token}" if token else "")
                conditions.append(Condition(
                    name=name, kind="grid", strategy=strategy,
                    max_samples=m, category_token=token,
                ))
    names = [c.name for c in conditions]
    if len(names) != len(set(names)):
        raise ConfigError("duplicate condition names in grid")
    return conditions


def _category_filter(token: str | None) -> CategoryFilter | None:
    if token is None:
        return None
    family, value = token.split(":", 1)
    if family == "theory":
        return CategoryFilter(theory=HighLevelCategory(value))
    return CategoryFilter(cluster=int(value))


# ---------------------------------------------------------------------------
# run state

@dataclass
class RunState:
    cfg: ExperimentConfig
    corpus: Corpus
    embeddings: EmbeddingMatrix
    profiles: dict[str, CategoryProfile]
    train_pairs: list[int]  # verdict indices
    test_pairs: list[int]
    embed_cfg: EmbedderConfig


_SHARED: RunState | None = None


def _init_worker(state: RunState) -> None:
    global _SHARED
    _SHARED = state


def _condition_contexts(state: RunState, condition: Condition,
                        verdict_indices: list[int]) -> list[ContextSet]:
    corpus = state.corpus
    out = []
    if condition.kind == "baseline":
        for vi in verdict_indices:
            v = corpus.verdicts[vi]
            if condition.name == "no_comments":
                out.append(ContextSet(v.annotator_id, v.post_id, []))
            else:
                out.append(full_pool_context(v.annotator_id, v.post_id, corpus))
        return out
    sampler_cfg = SamplerConfig(
        strategy=condition.strategy,
        max_samples=condition.max_samples,
        category_filter=_category_filter(condition.category_token),
        seed=derive_seed(state.cfg.seed, "sampler"),
    )

    def embed_fn(text):
        from .embed import embed_text
        return embed_text(text, state.embed_cfg)

    needs_fn = condition.strategy in ("random_sentences", "similar_sentences")
    for vi in verdict_indices:
        v = corpus.verdicts[vi]
        out.append(sample_context(
            v.annotator_id, v.post_id, corpus, state.embeddings,
            state.profiles, sampler_cfg,
            embed_fn=embed_fn if needs_fn else None,
        ))
    return out


def _five_plus_pct(state: RunState, condition: Condition) -> float:
    """Share of annotators with at least five comments available under the
    condition's pool definition."""
    if condition.name == "no_comments":
        return 0.0
    corpus = state.corpus
    annotators = corpus.annotators()
    if not annotators:
        return 0.0
    filt = _category_filter(condition.category_token) if condition.kind == "grid" else None
    count = 0
    for aid in annotators:
        pool = corpus.annotator_index[aid]
        if filt is not None:
            pool = [cid for cid in pool if filt.admits(state.profiles[cid])]
        if len(pool) >= 5:
            count += 1
    return 100.0 * count / len(annotators)


def run_condition(state: RunState, condition: Condition) -> dict:
    """Build features, train cfg.runs models, evaluate each, aggregate."""
    corpus = state.corpus
    cfg = state.cfg

    def embed_fn(text):
        from .embed import embed_text
        return embed_text(text, state.embed_cfg)

    datasets = {}
    contexts_by_partition = {}
    for part, indices in (("train", state.train_pairs), ("test", state.test_pairs)):
        contexts = _condition_contexts(state, condition, indices)
        pairs = []
        for vi, ctx in zip(indices, contexts):
            v = corpus.verdicts[vi]
            fv = build_features(
                state.embeddings.row(v.post_id), ctx,
                embeddings=state.embeddings, embed_fn=embed_fn,
            )
            pairs.append((fv, v.label))
        datasets[part] = pairs
        contexts_by_partition[part] = contexts

    run_reports: list[EvalReport] = []
    correctness = []
    base_seed = derive_seed(cfg.seed, "train", condition.name)
    for run_idx in range(cfg.runs):
        tc = TrainConfig(
            epochs=cfg.epochs, learning_rate=cfg.learning_rate,
            focal_gamma=cfg.focal_gamma, focal_alpha=cfg.focal_alpha,
            batch_size=cfg.batch_size, runs=1, seed=base_seed + run_idx,
        )
        params = train(datasets["train"], tc)
        report = evaluate(params, datasets["test"])
        run_reports.append(report)
        correctness.append(report.correctness)

    agg = EvalReport.from_runs(run_reports)
    return {
        "condition": condition.name,
        "kind": condition.kind,
        "n_train": len(datasets["train"]),
        "n_test": len(datasets["test"]),
        "five_plus_pct": _five_plus_pct(state, condition),
        "accuracy": agg.accuracy,
        "macro_f1": agg.macro_f1,
        "acc_runs": [r.accuracy for r in run_reports],
        "f1_runs": [r.macro_f1 for r in run_reports],
        # per-example correctness concatenated across runs; feeds the
        # example-level Welch test between conditions
        "correctness": np.concatenate(correctness).tolist(),
        "contexts": contexts_by_partition,
    }


# ---------------------------------------------------------------------------
# the full run

def _load_or_synthesize(cfg: ExperimentConfig, outdir: Path):
    if cfg.synth is not None:
        corpus, ground_truth = generate_population(cfg.synth)
        write_population(corpus, ground_truth, outdir / "synth")
        ingest_report = {
            "n_posts": len(corpus.posts),
            "n_comments": len(corpus.comments),
            "n_verdicts": len(corpus.verdicts),
            "synthesized": True,
        }
        return corpus, ingest_report
    corpus, report = ingest_corpus(*cfg.corpus_paths)
    return corpus, report.to_dict()


def _build_embeddings(cfg: ExperimentConfig, corpus: Corpus) -> tuple[EmbeddingMatrix, EmbedderConfig]:
    embed_cfg = EmbedderConfig(
        dim=cfg.embed_dim, ngram_range=cfg.ngram_range,
        seed=derive_seed(cfg.seed, "embed"),
    )
    if cfg.embx_path:
        matrix = import_embeddings(cfg.embx_path)
        missing = [pid for pid in corpus.posts if pid not in matrix]
        missing += [cid for cid in corpus.comments if cid not in matrix]
        if missing:
            raise ConfigError(
                f"imported embeddings lack {len(missing)} corpus ids "
                f"(first: {sorted(missing)[:3]})")
        return matrix, embed_cfg
    items = [(pid, corpus.posts[pid].query_text()) for pid in sorted(corpus.posts)]
    items += [(cid, corpus.comments[cid].text) for cid in sorted(corpus.comments)]
    return embed_texts(items, embed_cfg), embed_cfg


def _cluster_assignment(cfg: ExperimentConfig, corpus: Corpus,
                        embeddings: EmbeddingMatrix,
                        profiles: dict[str, CategoryProfile]) -> dict[str, int]:
    eligible = [cid for cid in sorted(corpus.comments)
                if profiles[cid].passes_phrase_filter]
    if len(eligible) < cfg.cluster_k:
        raise ConfigError(
            f"only {len(eligible)} phrase-filtered comments for k={cfg.cluster_k}")
    sub = EmbeddingMatrix(
        ids=eligible,
        data=np.vstack([embeddings.row(cid) for cid in eligible]),
    )
    target = min(cfg.reduce_dim, len(eligible), sub.dim)
    reduced = truncated_svd(sub, target, seed=derive_seed(cfg.seed, "svd"))
    model = kmeans(reduced, cfg.cluster_k, seed=derive_seed(cfg.seed, "kmeans"))
    return model.assignment


def run_pipeline(cfg: ExperimentConfig, workers: int | None = None) -> list[dict]:
    """Execute the configured experiment; returns the report rows.

    Conditions are independent and may run in a process pool (workers > 1,
    or the DLAB_WORKERS environment variable); results are merged in
    configured order so parallel and sequential runs emit identical bytes.
    """
    cfg.validate()
    outdir = Path(cfg.out)
    outdir.mkdir(parents=True, exist_ok=True)

    corpus, ingest_report = _load_or_synthesize(cfg, outdir)
    corpus, filter_report = filter_annotators(corpus, cfg.min_comments, cfg.max_comments)
    if not corpus.verdicts:
        raise ConfigError("no verdicts survive annotator filtering")

    embeddings, embed_cfg = _build_embeddings(cfg, corpus)

    cluster_assignment = None
    patterns = default_patterns()
    profiles = build_profiles(corpus, patterns)
    if cfg.cluster_enabled:
        cluster_assignment = _cluster_assignment(cfg, corpus, embeddings, profiles)
        profiles = build_profiles(corpus, patterns, cluster_assignment)

    split = make_split(corpus, cfg.split_kind, cfg.split_ratios,
                       seed=derive_seed(cfg.seed, "split"))
    violations = verify_split(split, corpus)
    if not violations.ok:
        raise InvariantViolation(
            "split verification failed: " + "; ".join(violations.messages()[:5]))
    save_split(split, outdir / "split.jsonl")

    state = RunState(
        cfg=cfg, corpus=corpus, embeddings=embeddings, profiles=profiles,
        train_pairs=split.indices("train"), test_pairs=split.indices("test"),
        embed_cfg=embed_cfg,
    )
    conditions = build_conditions(cfg)

    if workers is None:
        workers = int(os.environ.get("DLAB_WORKERS", "1"))
    if workers > 1:
        import multiprocessing as mp
        try:
            ctx = mp.get_context("fork")
        except ValueError:
            ctx = None
        if ctx is not None:
            with ProcessPoolExecutor(
                max_workers=workers, mp_context=ctx,
                initializer=_init_worker, initargs=(state,),
            ) as pool:
                rows = list(pool.map(_run_condition_global, conditions))
        else:
            rows = [run_condition(state, c) for c in conditions]
    else:
        rows = [run_condition(state, c) for c in conditions]

    baseline_correct = None
    for row in rows:
        if row["condition"] == cfg.baseline_condition:
            baseline_correct = row["correctness"]
    for row in rows:
        if baseline_correct is None or row["condition"] == cfg.baseline_condition:
            row["t_vs_baseline"] = None
            row["p_vs_baseline"] = None
        else:
            t, p = significance_test(row["correctness"], baseline_correct)
            row["t_vs_baseline"] = t
            row["p_vs_baseline"] = p

    contexts_dir = outdir / "contexts"
    if cfg.save_contexts:
        contexts_dir.mkdir(exist_ok=True)
    for row in rows:
        contexts = row.pop("contexts")
        if cfg.save_contexts:
            dump_contexts(
                contexts["train"] + contexts["test"],
                contexts_dir / f"{row['condition']}.jsonl",
            )

    test_labels = [corpus.verdicts[i].label for i in state.test_pairs]
    nta_share = test_labels.count("NTA") / len(test_labels) if test_labels else 0.0
    summary = {
        "version": __version__,
        "n_annotators": len(corpus.annotators()),
        "n_posts": len(corpus.posts),
        "n_comments": len(corpus.comments),
        "n_verdicts": len(corpus.verdicts),
        "ingest": ingest_report,
        "filter": filter_report.to_dict(),
        "split_sizes": split.sizes(),
        "test_nta_share": nta_share,
        "test_majority_accuracy": max(nta_share, 1.0 - nta_share),
    }
    (outdir / "summary.json").write_text(
        json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    (outdir / "effective.cfg").write_text(effective_config_text(cfg), encoding="utf-8")
    write_report_tsv(rows, cfg, outdir / "report.tsv")
    return rows


def _run_condition_global(condition: Condition) -> dict:
    # runs inside a pool worker; state was installed by the initializer
    assert _SHARED is not None
    return run_condition(_SHARED, condition)


# ---------------------------------------------------------------------------
# report output

def _fmt(value, spec: str = ".6f") -> str:
    if value is None:
        return ""
    return format(value, spec)


def write_report_tsv(rows: list[dict], cfg: ExperimentConfig, path) -> None:
    """Condition rows with pinned formatting and embedded provenance."""
    lines = [f"# dlab {__version__} report"]
    for cfg_line in effective_config_text(cfg).strip().split("\n"):
        lines.append(f"# {cfg_line}")
    header = ["condition", "n_train", "n_test", "five_plus_pct", "accuracy",
              "macro_f1", "acc_runs", "f1_runs", "t_vs_baseline", "p_vs_baseline"]
    lines.append("\t".join(header))
    for row in rows:
        lines.append("\t".join([
            row["condition"],
            str(row["n_train"]),
            str(row["n_test"]),
            _fmt(row["five_plus_pct"], ".1f"),
            _fmt(row["accuracy"]),
            _fmt(row["macro_f1"]),
            ";".join(_fmt(a) for a in row["acc_runs"]),
            ";".join(_fmt(f) for f in row["f1_runs"]),
            _fmt(row.get("t_vs_baseline"), ".4f"),
            _fmt(row.get("p_vs_baseline"), ".6g"),
        ]))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_report_tsv(path) -> list[dict]:
    rows = []
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    data = [ln for ln in lines if ln and not ln.startswith("#")]
    if not data:
        return rows
    header = data[0].split("\t")
    for ln in data[1:]:
        rows.append(dict(zip(header, ln.split("\t"))))
    return rows


def merge_reports(paths, layout: str, out_path) -> None:
    """Merge condition rows from several reports into one table.

    layout "category": one row per condition with 5+%/accuracy/macro F1.
    layout "grid": strategies as rows, sample sizes as columns.
    """
    rows = []
    for p in paths:
        rows.extend(read_report_tsv(p))
    if layout == "category":
        lines = ["condition\tfive_plus_pct\taccuracy\tmacro_f1"]
        for row in rows:
            lines.append("\t".join([
                row["condition"], row["five_plus_pct"],
                row["accuracy"], row["macro_f1"]]))
    elif layout == "grid":
        cells: dict[str, dict[int, tuple[str, str]]] = {}
        counts: set[int] = set()
        for row in rows:
            name = row["condition"]
            if "-k" not in name:
                continue
            strategy, _, rest = name.partition("-k")
            m_str = rest.split("-", 1)[0]
            try:
                m = int(m_str)
            except ValueError:
                continue
            counts.add(m)
            cells.setdefault(strategy, {})[m] = (row["accuracy"], row["macro_f1"])
        ordered = sorted(counts)
        lines = ["strategy\t" + "\t".join(f"acc@{m}\tf1@{m}" for m in ordered)]
        for strategy in sorted(cells):
            parts = [strategy]
            for m in ordered:
                acc, f1 = cells[strategy].get(m, ("", ""))
                parts.extend([acc, f1])
            lines.append("\t".join(parts))
    else:
        raise ConfigError(f"unknown layout {layout!r}")
    Path(out_path).write_text("\n".join(lines) + "\n", encoding="utf-8")
