#!/usr/bin/env python3
"""Regenerates the toy agreement corpus, eval sentences, and minimal pairs.

Grammar: every content word in a sentence carries the same suffix. Six
content slots per sentence make the all-slots-masked event (the only
genuinely ambiguous case under masked prediction) vanishingly rare, and
sixteen suffix types keep its entropy low when it does happen.
"""
import random

STEMS = ["zab", "mob", "kib", "lub", "dob", "wex"]
SUFFIXES = [
    "ado", "iku", "eno", "ula", "epo", "ika", "oru", "emi",
    "alo", "uni", "eka", "ipo", "ona", "ute", "abi", "oze",
]
REPEATS = 4   # 16 suffix types x 4 = 64 corpus lines
N_PAIRS = 200


def sentence(suffix):
    w = [s + suffix for s in STEMS]
    return f"the {w[0]} {w[1]} {w[2]} the {w[3]} {w[4]} {w[5]} ."


def main():
    rng = random.Random(7)

    lines = [sentence(s) for s in SUFFIXES for _ in range(REPEATS)]
    rng.shuffle(lines)
    with open("corpus.txt", "w") as f:
        f.write("\n".join(lines) + "\n")

    with open("sentences.txt", "w") as f:
        f.write("\n".join(sentence(s) for s in SUFFIXES) + "\n")

    # bad side: one content slot borrows another sentence's suffix
    combos = [
        (g, slot, d)
        for g in range(len(SUFFIXES))
        for slot in range(len(STEMS))
        for d in range(len(SUFFIXES))
        if d != g
    ]
    rng.shuffle(combos)
    with open("pairs.tsv", "w") as f:
        f.write("# toy grammar minimal pairs: good<TAB>bad (one slot disagrees)\n")
        for g, slot, d in combos[:N_PAIRS]:
            good = sentence(SUFFIXES[g]).split(" ")
            bad = list(good)
            word_pos = [1, 2, 3, 5, 6, 7][slot]
            bad[word_pos] = STEMS[slot] + SUFFIXES[d]
            f.write(" ".join(good) + "\t" + " ".join(bad) + "\n")


if __name__ == "__main__":
    main()
