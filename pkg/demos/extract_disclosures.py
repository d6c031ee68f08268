"""
Run the self-disclosure taxonomy over a handful of sentences and show what
each stage sees: sentence segmentation, the first-person phrase filter, and
the per-category regex spans.

Run:
    python demos/extract_disclosures.py
    python demos/extract_disclosures.py --text-file my_comments.txt
"""
import argparse

from dlab.disclosure import (
    extract_disclosures,
    matches_phrase_filter,
    segment_sentences,
)

SAMPLES = [
    "I'm 24 and I work nights at the hospital. My roommate thinks I'm nuts.",
    "I have two dogs and honestly they are better company than most people.",
    "I think tipping culture has gotten completely out of hand.",
    "My sister and I haven't spoken since the wedding.",
    "NTA. The bus was late, not your fault.",
    "24F here, first time posting.",
]


def show(text):
    print(f"text: {text}")
    passed = matches_phrase_filter(text)
    print(f"  phrase filter: {'pass' if passed else 'reject'}")
    spans = extract_disclosures(text)
    if not spans:
        print("  no disclosure spans")
    for span in spans:
        print(f"  {span.category.value:<12} -> {span.high_level.value:<13} "
              f"| {span.matched_text!r}")
    sentences = segment_sentences(text)
    if len(sentences) > 1:
        print(f"  ({len(sentences)} sentences)")
    print()


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--text-file", default=None,
                    help="one comment per line; defaults to built-in samples")
    args = ap.parse_args()

    if args.text_file:
        with open(args.text_file, encoding="utf-8") as fh:
            texts = [line.strip() for line in fh if line.strip()]
    else:
        texts = SAMPLES
    for text in texts:
        show(text)


if __name__ == "__main__":
    main()
