"""
Embed a pile of comments with the hashed n-gram embedder and rank them
against a query post by exact cosine similarity.

Run:
    python demos/retrieval_playground.py
    python demos/retrieval_playground.py --dim 512 --k 8 --query "my cat ruined the sofa"
"""
import argparse

from dlab.embed import EmbedderConfig, embed_text, embed_texts, top_k_similar

COMMENTS = [
    ("c01", "I have three cats and the oldest one claws everything I own."),
    ("c02", "My cat knocked a glass off the counter just to watch it break."),
    ("c03", "I think landlords should not be allowed to ban pets outright."),
    ("c04", "We repainted the kitchen last weekend and it took forever."),
    ("c05", "I'm allergic to cats but my partner refuses to rehome hers."),
    ("c06", "The sofa we bought online arrived with a huge tear in it."),
    ("c07", "I work from home so the dog is basically my coworker."),
    ("c08", "Public transit in this town is a complete joke."),
    ("c09", "My kitten sleeps on the sofa all day, it is her sofa now."),
    ("c10", "I like hiking on weekends when the weather cooperates."),
]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--query", default="my cat scratched up the new sofa")
    ap.add_argument("--k", type=int, default=5)
    ap.add_argument("--dim", type=int, default=256)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    cfg = EmbedderConfig(dim=args.dim, ngram_range=(1, 2), seed=args.seed)
    matrix = embed_texts(COMMENTS, cfg)
    query = embed_text(args.query, cfg)

    print(f"query: {args.query!r}  (dim={args.dim}, {len(COMMENTS)} candidates)")
    print(f"{'rank':<5}{'id':<6}{'cosine':<10}text")
    lookup = dict(COMMENTS)
    for rank, (cid, score) in enumerate(top_k_similar(query, matrix, k=args.k), 1):
        print(f"{rank:<5}{cid:<6}{score:<10.4f}{lookup[cid]}")


if __name__ == "__main__":
    main()
