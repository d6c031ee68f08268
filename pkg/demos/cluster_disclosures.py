"""
Data-driven alternative to the fixed taxonomy: embed the disclosure-bearing
comments of a synthetic population, reduce with truncated SVD, cluster with
k-means, and print silhouette plus the comments nearest each centroid.

Run:
    python demos/cluster_disclosures.py
    python demos/cluster_disclosures.py --k 6 --reduce-dim 16
"""
import argparse

from dlab.cluster import kmeans, nearest_to_centroid, silhouette, truncated_svd
from dlab.disclosure import matches_phrase_filter
from dlab.embed import EmbedderConfig, EmbeddingMatrix, embed_texts
from dlab.synthgen import PopulationSpec, generate_population


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--k", type=int, default=4)
    ap.add_argument("--reduce-dim", type=int, default=24)
    ap.add_argument("--dim", type=int, default=512)
    ap.add_argument("--seed", type=int, default=3)
    args = ap.parse_args()

    spec = PopulationSpec(n_annotators=40, n_posts=60, seed=args.seed)
    corpus, _ = generate_population(spec)
    keep = [(cid, c.text) for cid, c in sorted(corpus.comments.items())
            if matches_phrase_filter(c.text)]
    print(f"{len(corpus.comments)} comments, {len(keep)} pass the phrase filter")

    cfg = EmbedderConfig(dim=args.dim, ngram_range=(1, 2), seed=args.seed)
    matrix = embed_texts(keep, cfg)
    reduced = truncated_svd(matrix, target_dim=args.reduce_dim, seed=args.seed)
    model = kmeans(reduced, k=args.k, seed=args.seed)
    sil = silhouette(reduced, model)
    print(f"k={args.k} inertia={model.inertia:.2f} mean silhouette={sil.mean:.3f}")

    texts = dict(keep)
    for cluster in range(args.k):
        size = len(model.members(cluster))
        print(f"\ncluster {cluster} ({size} comments), nearest to centroid:")
        for cid in nearest_to_centroid(model, reduced, cluster, n=3):
            print(f"  {cid}: {texts[cid]}")


if __name__ == "__main__":
    main()
