#!/usr/bin/env python3
"""Regenerate tests/data/wordnet/wup_golden.tsv.

Standalone Wu-Palmer computation straight from a WordNet 3.0 data.noun file:
depth is 1 + the longest hypernym path to a root, the subsumer is the deepest
common ancestor (ties by smaller id), score = 2*depth(lcs)/(depth(a)+depth(b)).

When NLTK is importable (with NLTK_DATA pointing at the same WordNet 3.0),
its wup_similarity is written alongside for comparison. NLTK measures the
synset-to-subsumer legs by shortest path, so the two columns differ on pairs
whose ancestors have more than one hypernym.

usage: wup_golden.py /path/to/data.noun > wup_golden.tsv
"""
import sys
from functools import lru_cache

PAIRS = [
    ("01443537", "01443537"), ("01443537", "01484850"), ("01484850", "01491361"),
    ("01514859", "01518878"), ("02123045", "02123159"), ("02099601", "02099712"),
    ("02099601", "02123045"), ("01443537", "07873807"), ("02084071", "02121808"),
    ("01317541", "02084071"), ("01514859", "02099712"), ("01518878", "01491361"),
    ("07873807", "07873807"), ("02121620", "02121808"), ("00015388", "02123159"),
    ("01443537", "02099601"), ("00001740", "07873807"), ("01482330", "01443537"),
    ("01861778", "01503061"), ("02084071", "02121620"),
]


def load(path):
    hypernyms = {}
    with open(path, encoding="latin-1") as f:
        for line in f:
            if line.startswith("  "):
                continue
            fields = line.split(" | ")[0].split()
            n_words = int(fields[3], 16)
            p = 4 + 2 * n_words
            n_ptrs = int(fields[p])
            p += 1
            hyp = []
            for _ in range(n_ptrs):
                sym, target, pos = fields[p], fields[p + 1], fields[p + 2]
                p += 4
                if sym in ("@", "@i") and pos == "n":
                    hyp.append(target)
            hypernyms[fields[0]] = hyp
    return hypernyms


def main():
    hyp = load(sys.argv[1])

    @lru_cache(None)
    def depth(o):
        return 1 if not hyp[o] else 1 + max(depth(h) for h in hyp[o])

    def ancestors(o):
        seen, stack = set(), [o]
        while stack:
            x = stack.pop()
            if x not in seen:
                seen.add(x)
                stack.extend(hyp[x])
        return seen

    try:
        from nltk.corpus import wordnet as wn
    except ImportError:
        wn = None

    print("id1\tid2\tlcs\twup_standard\twup_nltk")
    for a, b in PAIRS:
        common = ancestors(a) & ancestors(b)
        lcs = min(common, key=lambda c: (-depth(c), c))
        score = 2.0 * depth(lcs) / (depth(a) + depth(b))
        ref = "NA"
        if wn is not None:
            s1 = wn.synset_from_pos_and_offset("n", int(a))
            s2 = wn.synset_from_pos_and_offset("n", int(b))
            ref = "%.12f" % s1.wup_similarity(s2)
        print("n%s\tn%s\tn%s\t%.12f\t%s" % (a, b, lcs, score, ref))


if __name__ == "__main__":
    main()
