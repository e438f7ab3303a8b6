#!/usr/bin/env python3
"""Writes tests/data/metric_goldens.jsonl.

A standalone reimplementation of the sentence metrics (no code shared with
the C++ library) evaluated on ten hand-written candidate/reference pairs.
IDF statistics for CIDEr-D come from the ten references.

usage: tools/golden_metrics.py [output]
"""

import json
import math
import sys
from collections import Counter
from pathlib import Path

PAIRS = [
    ("the committee approved the report", "the committee approved the report"),
    ("we must protect the rights of citizens", "we must defend the rights of all citizens"),
    ("this is a very important question", "this is an important question for europe"),
    ("i would like to thank the commissioner", "i should like to thank the commissioner"),
    ("the vote will take place tomorrow", "the vote will take place tomorrow at noon"),
    ("madam president", "madam president i have a question"),
    ("the council has not answered", "the council has still not answered our letter"),
    ("that is why we voted against", "that is why we voted against this report"),
    ("member states must act now", "the member states must act"),
    ("the debate is closed", "the sitting is closed"),
]

EPSILON = 1e-9
SIGMA = 6.0


def ngrams(words, n):
    return Counter(tuple(words[i:i + n]) for i in range(len(words) - n + 1))


def bleu(cand, ref, n):
    if not cand or not ref:
        return 0.0
    orders = min(n, len(cand))
    log_sum = 0.0
    for k in range(1, orders + 1):
        c, r = ngrams(cand, k), ngrams(ref, k)
        matched = sum(min(v, r[g]) for g, v in c.items())
        log_sum += math.log(max(matched, EPSILON) / (len(cand) - k + 1))
    bp = min(1.0, math.exp(1.0 - len(ref) / len(cand)))
    return math.exp(log_sum / orders) * bp


def cider_d(cand, ref, docs):
    """pycocoevalcap-style CIDEr-D for one reference."""
    if not cand or not ref:
        return 0.0
    log_n = math.log(len(docs))
    df = Counter()
    for d in docs:
        grams = set()
        for k in range(1, 5):
            grams.update(ngrams(d, k))
        df.update(grams)

    def vec(words, k):
        return {g: c * (log_n - math.log(max(1.0, df[g]))) for g, c in ngrams(words, k).items()}

    delta = len(cand) - len(ref)
    total = 0.0
    for k in range(1, 5):
        vc, vr = vec(cand, k), vec(ref, k)
        nc = math.sqrt(sum(v * v for v in vc.values()))
        nr = math.sqrt(sum(v * v for v in vr.values()))
        if nc == 0.0 or nr == 0.0:
            continue
        dot = sum(min(v, vr[g]) * vr[g] for g, v in vc.items() if g in vr)
        total += dot / (nc * nr) * math.exp(-(delta ** 2) / (2 * SIGMA ** 2))
    return total / 4.0 * 10.0


def wer(cand, ref):
    longer = max(len(cand), len(ref))
    if longer == 0:
        return 0.0
    hits = sum(1 for a, b in zip(cand, ref) if a == b)
    return 1.0 - hits / longer


def main():
    out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).resolve().parent.parent / "tests/data/metric_goldens.jsonl"
    docs = [r.split() for _, r in PAIRS]
    lines = []
    for cand_text, ref_text in PAIRS:
        cand, ref = cand_text.split(), ref_text.split()
        row = {"candidate": cand_text, "reference": ref_text}
        for n in range(1, 5):
            row["bleu%d" % n] = bleu(cand, ref, n)
        row["cider_d"] = cider_d(cand, ref, docs)
        row["wer"] = wer(cand, ref)
        lines.append(json.dumps(row))
    out.write_text("\n".join(lines) + "\n")


if __name__ == "__main__":
    main()
