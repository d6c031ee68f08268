"""Per-annotator context sampling for (annotator, post) prediction pairs.

Four strategies: random or similarity-ranked, over whole comments or single
sentences. Sampling draws only from the annotator's background comments, so
the judged situation can never leak into its own context. Randomness is
derived per (seed, annotator, post), making every pair independently
reproducible regardless of evaluation order.
"""
from __future__ import annotations

import json
import random
import warnings
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .corpus import Corpus
from .disclosure import CategoryProfile, HighLevelCategory
from .embed import EmbeddingMatrix, cosine_similarity
from .seeds import derive_seed

STRATEGIES = (
    "random_comments",
    "random_sentences",
    "similar_comments",
    "similar_sentences",
)

_REPLICATION_MAX_SAMPLES = 5


@dataclass(frozen=True)
class CategoryFilter:
    """Restrict the candidate pool to one category (theory or cluster)."""

    theory: HighLevelCategory | None = None
    cluster: int | None = None

    def __post_init__(self):
        if (self.theory is None) == (self.cluster is None):
            raise ValueError("set exactly one of theory / cluster")

    def admits(self, profile: CategoryProfile) -> bool:
        if self.theory is not None:
            return self.theory in profile.theory_categories
        return profile.cluster_id == self.cluster

    def label(self) -> str:
        if self.theory is not None:
            return f"theory:{self.theory.value}"
        return f"cluster:{self.cluster}"


@dataclass(frozen=True)
class SamplerConfig:
    strategy: str
    max_samples: int
    category_filter: CategoryFilter | None = None
    seed: int = 0
    # The reference protocol pairs category filters with similarity ranking
    # over whole comments and at most 5 samples; set False to override, which
    # warns instead of failing.
    replication_mode: bool = True

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}")
        if self.max_samples < 1:
            raise ValueError(f"max_samples must be >= 1, got {self.max_samples}")
        if self.category_filter is not None:
            conforming = (
                self.strategy == "similar_comments"
                and self.max_samples <= _REPLICATION_MAX_SAMPLES
            )
            if not conforming:
                msg = (
                    "category filters pair with similar_comments and "
                    f"max_samples <= {_REPLICATION_MAX_SAMPLES}; got "
                    f"{self.strategy} / {self.max_samples}"
                )
                if self.replication_mode:
                    raise ValueError(msg)
                warnings.warn(msg)


@dataclass(frozen=True)
class ContextItem:
    source_comment_id: str
    text: str
    similarity: float | None  # None under random strategies
    unit: str  # "comment" | "sentence"
    sentence_index: int | None = None


@dataclass
class ContextSet:
    annotator_id: str
    post_id: str
    items: list[ContextItem] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.items)


def _candidate_ids(corpus: Corpus, annotator_id: str,
                   profiles: dict[str, CategoryProfile] | None,
                   cfg: SamplerConfig) -> list[str]:
    pool = corpus.annotator_index[annotator_id]
    if cfg.category_filter is None:
        return list(pool)
    if profiles is None:
        raise ValueError("category filter requires comment profiles")
    return [cid for cid in pool if cfg.category_filter.admits(profiles[cid])]


def _query_vector(corpus: Corpus, post_id: str,
                  embeddings: EmbeddingMatrix | None, embed_fn):
    if embeddings is not None and post_id in embeddings:
        return embeddings.row(post_id)
    if embed_fn is not None:
        return embed_fn(corpus.posts[post_id].query_text())
    raise ValueError(f"no embedding for post {post_id!r} and no embed_fn given")


def _comment_vector(corpus: Corpus, cid: str,
                    embeddings: EmbeddingMatrix | None, embed_fn):
    if embeddings is not None and cid in embeddings:
        return embeddings.row(cid)
    if embed_fn is not None:
        return embed_fn(corpus.comments[cid].text)
    raise ValueError(f"no embedding for comment {cid!r} and no embed_fn given")


def sample_context(annotator_id: str, post_id: str, corpus: Corpus,
                   embeddings: EmbeddingMatrix | None,
                   profiles: dict[str, CategoryProfile] | None,
                   cfg: SamplerConfig, embed_fn=None) -> ContextSet:
    """Draw up to max_samples context items for one (annotator, post) pair.

    Similarity strategies rank the full candidate pool by cosine against
    the post (title + body) and break ties by id; random strategies sample
    uniformly without replacement with a per-pair derived RNG. Sentence
    strategies operate on sentences of the candidate comments and need an
    embed_fn when ranking, since sentence vectors are not kept in the
    comment matrix. Fewer candidates than max_samples returns them all; an
    empty pool returns an empty context.
    """
    if annotator_id not in corpus.annotator_index:
        raise ValueError(f"unknown annotator {annotator_id!r}")
    if post_id not in corpus.posts:
        raise ValueError(f"unknown post {post_id!r}")
    candidates = _candidate_ids(corpus, annotator_id, profiles, cfg)
    items: list[ContextItem] = []

    if cfg.strategy == "random_comments":
        rng = random.Random(derive_seed(cfg.seed, annotator_id, post_id))
        chosen = rng.sample(candidates, min(cfg.max_samples, len(candidates)))
        items = [
            ContextItem(cid, corpus.comments[cid].text, None, "comment")
            for cid in chosen
        ]

    elif cfg.strategy == "random_sentences":
        rng = random.Random(derive_seed(cfg.seed, annotator_id, post_id))
        units = [
            (cid, idx, corpus.comments[cid].text[a:b])
            for cid in candidates
            for idx, (a, b) in enumerate(corpus.comments[cid].sentence_spans())
        ]
        chosen = rng.sample(units, min(cfg.max_samples, len(units)))
        items = [
            ContextItem(cid, text, None, "sentence", sentence_index=idx)
            for cid, idx, text in chosen
        ]

    elif cfg.strategy == "similar_comments":
        if candidates:
            query = _query_vector(corpus, post_id, embeddings, embed_fn)
            scored = [
                (cid, cosine_similarity(
                    query, _comment_vector(corpus, cid, embeddings, embed_fn)))
                for cid in candidates
            ]
            scored.sort(key=lambda pair: (-pair[1], pair[0]))
            items = [
                ContextItem(cid, corpus.comments[cid].text, score, "comment")
                for cid, score in scored[:cfg.max_samples]
            ]

    elif cfg.strategy == "similar_sentences":
        if embed_fn is None:
            raise ValueError("similar_sentences requires an embed_fn for sentence vectors")
        units = [
            (cid, idx, corpus.comments[cid].text[a:b])
            for cid in candidates
            for idx, (a, b) in enumerate(corpus.comments[cid].sentence_spans())
        ]
        if units:
            query = _query_vector(corpus, post_id, embeddings, embed_fn)
            scored = [
                (cid, idx, text, cosine_similarity(query, embed_fn(text)))
                for cid, idx, text in units
            ]
            scored.sort(key=lambda rec: (-rec[3], rec[0], rec[2]))
            items = [
                ContextItem(cid, text, score, "sentence", sentence_index=idx)
                for cid, idx, text, score in scored[:cfg.max_samples]
            ]

    return ContextSet(annotator_id=annotator_id, post_id=post_id, items=items)


def full_pool_context(annotator_id: str, post_id: str, corpus: Corpus) -> ContextSet:
    """Every background comment of the annotator, in id order (All Comments)."""
    if annotator_id not in corpus.annotator_index:
        raise ValueError(f"unknown annotator {annotator_id!r}")
    items = [
        ContextItem(cid, corpus.comments[cid].text, None, "comment")
        for cid in corpus.annotator_index[annotator_id]
    ]
    return ContextSet(annotator_id=annotator_id, post_id=post_id, items=items)


# ---------------------------------------------------------------------------
# diagnostics

@dataclass
class CoverageTable:
    """What categories the sampled items actually covered, in percent.

    A multi-category comment counts toward each of its theory categories,
    so the theory row can exceed 100; "none" holds items without any
    category (resp. without a cluster id).
    """

    n_items: int
    theory_pct: dict[str, float]
    cluster_pct: dict[str, float]


def category_coverage(contexts: list[ContextSet],
                      profiles: dict[str, CategoryProfile]) -> CoverageTable:
    theory_counts = Counter()
    cluster_counts = Counter()
    n_items = 0
    for ctx in contexts:
        for item in ctx.items:
            n_items += 1
            prof = profiles[item.source_comment_id]
            if prof.theory_categories:
                for cat in prof.theory_categories:
                    theory_counts[cat.value] += 1
            else:
                theory_counts["none"] += 1
            if prof.cluster_id is not None:
                cluster_counts[str(prof.cluster_id)] += 1
            else:
                cluster_counts["none"] += 1
    def pct(counts: Counter) -> dict[str, float]:
        if n_items == 0:
            return {}
        return {key: 100.0 * counts[key] / n_items for key in sorted(counts)}
    return CoverageTable(
        n_items=n_items, theory_pct=pct(theory_counts), cluster_pct=pct(cluster_counts)
    )


@dataclass
class BoxStats:
    lower_whisker: float
    q1: float
    median: float
    q3: float
    upper_whisker: float


def box_stats(values) -> BoxStats:
    """Tukey box summary: quartiles plus whiskers at the last points within
    1.5 IQR of the box."""
    vals = np.asarray(sorted(values), dtype=np.float64)
    if vals.size == 0:
        raise ValueError("box_stats needs at least one value")
    q1, med, q3 = np.percentile(vals, [25.0, 50.0, 75.0])
    iqr = q3 - q1
    in_lo = vals[vals >= q1 - 1.5 * iqr]
    in_hi = vals[vals <= q3 + 1.5 * iqr]
    return BoxStats(
        lower_whisker=float(in_lo[0]),
        q1=float(q1),
        median=float(med),
        q3=float(q3),
        upper_whisker=float(in_hi[-1]),
    )


@dataclass
class DiversityReport:
    """How much of each annotator's pool similarity sampling actually touches.

    coverage: percent of the annotator's comments sampled at least once
    across their contexts. rank_ratio: count of their most-sampled comment
    over their second most-sampled (annotators with fewer than two distinct
    sampled comments are skipped).
    """

    coverage_values: list[float]
    coverage: BoxStats
    rank_ratio_values: list[float]
    rank_ratio: BoxStats | None


def similar_post_diversity(contexts: list[ContextSet], corpus: Corpus) -> DiversityReport:
    per_annotator: dict[str, Counter] = {}
    for ctx in contexts:
        per_annotator.setdefault(ctx.annotator_id, Counter())
        for item in ctx.items:
            per_annotator[ctx.annotator_id][item.source_comment_id] += 1

    coverage_values: list[float] = []
    ratio_values: list[float] = []
    for aid in sorted(per_annotator):
        pool = len(corpus.annotator_index.get(aid, []))
        counts = per_annotator[aid]
        if pool == 0:
            warnings.warn(f"annotator {aid!r} has an empty pool; skipped in coverage")
        else:
            coverage_values.append(100.0 * len(counts) / pool)
        top = counts.most_common(2)
        if len(top) >= 2:
            ratio_values.append(top[0][1] / top[1][1])
    if not coverage_values:
        raise ValueError("no annotators with non-empty pools")
    return DiversityReport(
        coverage_values=coverage_values,
        coverage=box_stats(coverage_values),
        rank_ratio_values=ratio_values,
        rank_ratio=box_stats(ratio_values) if ratio_values else None,
    )


# ---------------------------------------------------------------------------
# serialization

def dump_contexts(contexts: list[ContextSet], path) -> None:
    """JSONL: one context per line; texts are re-derivable from the corpus."""
    with open(path, "w", encoding="utf-8") as fh:
        for ctx in contexts:
            fh.write(json.dumps({
                "annotator_id": ctx.annotator_id,
                "post_id": ctx.post_id,
                "items": [
                    {
                        "comment_id": item.source_comment_id,
                        "similarity": item.similarity,
                        "unit": item.unit,
                        "sentence_index": item.sentence_index,
                    }
                    for item in ctx.items
                ],
            }) + "\n")


def load_contexts(path, corpus: Corpus) -> list[ContextSet]:
    """Rebuild dumped contexts, resolving texts against the corpus, so a
    training run can be repeated without re-sampling."""
    out: list[ContextSet] = []
    with open(Path(path), encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            rec = json.loads(line)
            items = []
            for it in rec["items"]:
                cid = it["comment_id"]
                comment = corpus.comments[cid]
                if it["unit"] == "sentence":
                    a, b = comment.sentence_spans()[int(it["sentence_index"])]
                    text = comment.text[a:b]
                else:
                    text = comment.text
                items.append(ContextItem(
                    source_comment_id=cid,
                    text=text,
                    similarity=it["similarity"],
                    unit=it["unit"],
                    sentence_index=it["sentence_index"],
                ))
            out.append(ContextSet(rec["annotator_id"], rec["post_id"], items))
    return out
