"""Reference scores for the golden metric corpus.

Written independently of the Rust metrics: n-gram counting with
collections.Counter, LCS by recursion with memoisation, METEOR alignment
by enumerating every partial matching, CIDEr with explicit dense vectors,
and nltk's Porter stemmer (original algorithm mode, with the
reference program's two-letter guard). Run from the
repository root:

    python3 fixtures/tools/metrics_oracle.py
"""

import itertools
import json
import math
import os
from collections import Counter
from functools import lru_cache

from nltk.stem.porter import PorterStemmer

HERE = os.path.dirname(os.path.abspath(__file__))
METRICS = os.path.join(HERE, "..", "metrics")
STEMMER = PorterStemmer(mode=PorterStemmer.ORIGINAL_ALGORITHM)


def stem(word):
    # Porter's reference C program leaves words of one or two letters alone;
    # nltk's ORIGINAL_ALGORITHM mode does not.
    return word if len(word) <= 2 else STEMMER.stem(word)


def tokenize(text):
    out, cur = [], []
    for ch in text.lower():
        if ch.isspace():
            if cur:
                out.append("".join(cur))
                cur = []
        elif "a" <= ch <= "z" or "0" <= ch <= "9":
            cur.append(ch)
    if cur:
        out.append("".join(cur))
    return out


def grams(toks, n):
    return Counter(tuple(toks[i:i + n]) for i in range(len(toks) - n + 1))


def bleu(pairs, max_n):
    c = sum(len(cand) for cand, _ in pairs)
    r = 0
    for cand, refs in pairs:
        r += sorted((abs(len(x) - len(cand)), len(x)) for x in refs)[0][1]
    logs = 0.0
    for n in range(1, max_n + 1):
        num = den = 0
        for cand, refs in pairs:
            cg = grams(cand, n)
            best = Counter()
            for ref in refs:
                best |= grams(ref, n)
            num += sum(min(v, best[g]) for g, v in cg.items())
            den += sum(cg.values())
        if num == 0:
            return 0.0
        logs += math.log(num / den) / max_n
    bp = 1.0 if c > r else math.exp(1 - r / c)
    return bp * math.exp(logs)


def lcs(a, b):
    @lru_cache(maxsize=None)
    def go(i, j):
        if i == len(a) or j == len(b):
            return 0
        if a[i] == b[j]:
            return 1 + go(i + 1, j + 1)
        return max(go(i + 1, j), go(i, j + 1))

    return go(0, 0)


def rouge_l(pairs, beta=1.2):
    total = 0.0
    for cand, refs in pairs:
        best = 0.0
        for ref in refs:
            l = lcs(tuple(cand), tuple(ref))
            if l:
                p, r = l / len(cand), l / len(ref)
                best = max(best, (1 + beta ** 2) * p * r / (r + beta ** 2 * p))
        total += best
    return total / len(pairs)


def all_matchings(cand, ref):
    """Every partial injective map from candidate to reference positions
    restricted to stem-equal words."""
    stems_c = [stem(w) for w in cand]
    stems_r = [stem(w) for w in ref]
    options = [[None] + [j for j in range(len(ref)) if stems_r[j] == stems_c[i]] for i in range(len(cand))]
    for choice in itertools.product(*options):
        used = [j for j in choice if j is not None]
        if len(used) == len(set(used)):
            yield choice


def meteor_one(cand, ref):
    best = None
    for m in all_matchings(cand, ref):
        exact = sum(1 for i, j in enumerate(m) if j is not None and cand[i] == ref[j])
        total = sum(1 for j in m if j is not None)
        chunks = 0
        for i, j in enumerate(m):
            if j is not None and not (i > 0 and m[i - 1] is not None and m[i - 1] + 1 == j):
                chunks += 1
        key = (exact, total, -chunks)
        if best is None or key > best:
            best = key
    exact, total, neg_chunks = best
    if total == 0:
        return 0.0
    p, r = total / len(cand), total / len(ref)
    f = 10 * p * r / (r + 9 * p)
    return f * (1 - 0.5 * (-neg_chunks / total) ** 3)


def meteor(pairs):
    return sum(max(meteor_one(c, r) for r in refs) for c, refs in pairs) / len(pairs)


def cider(pairs):
    n_docs = len(pairs)
    score = 0.0
    for cand, refs in pairs:
        per_n = 0.0
        for n in range(1, 5):
            df = Counter()
            for _, rs in pairs:
                df.update({g for x in rs for g in grams(x, n)})
            vocab = sorted(set(grams(cand, n)) | {g for x in refs for g in grams(x, n)})
            idf = [math.log(n_docs / (1 + df[g])) for g in vocab]

            def vec(toks):
                cnt = grams(toks, n)
                return [cnt[g] * w for g, w in zip(vocab, idf)]

            cv = vec(cand)
            sims = 0.0
            for ref in refs:
                rv = vec(ref)
                na = math.sqrt(sum(x * x for x in cv))
                nb = math.sqrt(sum(x * x for x in rv))
                if na > 0 and nb > 0:
                    sims += sum(x * y for x, y in zip(cv, rv)) / (na * nb)
            per_n += 10 * sims / len(refs)
        score += per_n / 4
    return score / n_docs


def main():
    pairs = []
    with open(os.path.join(METRICS, "golden_pairs.jsonl")) as f:
        for line in f:
            if line.strip():
                rec = json.loads(line)
                pairs.append((tokenize(rec["candidate"]), [tokenize(r) for r in rec["references"]]))
    golden = {
        "bleu": [bleu(pairs, n) for n in range(1, 5)],
        "rouge_l": rouge_l(pairs),
        "meteor": meteor(pairs),
        "cider": cider(pairs),
        "pair_count": len(pairs),
    }
    with open(os.path.join(METRICS, "golden_scores.json"), "w") as f:
        json.dump(golden, f, indent=1)
        f.write("\n")

    # stemmer reference list: every distinct word of the corpus plus the
    # repository's text fixtures
    words = set()
    for cand, refs in pairs:
        words.update(cand)
        for r in refs:
            words.update(r)
    for name in ("validate_ds/triplets/train.jsonl", "validate_ds/triplets/val.jsonl"):
        with open(os.path.join(HERE, "..", name)) as f:
            for line in f:
                rec = json.loads(line)
                for s in rec["steps"]:
                    words.update(tokenize(s["text"]))
                words.update(tokenize(rec["instruction"]))
    extra = ("relational conditional rational valenci digitizer conformabli radicalli differentli vileli "
             "analogousli vietnamization predication operator feudalism decisiveness hopefulness callousness "
             "formaliti sensitiviti sensibiliti triplicate formative formalize electriciti electrical hopeful "
             "goodness revival allowance inference airliner gyroscopic adjustable defensible irritant "
             "replacement adjustment dependent adoption homologou communism activate angulariti homologous "
             "effective bowdlerize probate rate cease controll roll generalizations oscillators caresses "
             "ponies ties feed agreed plastered bled motoring sing conflated troubled sized hopping tanned "
             "falling hissing fizzed failing filing happy sky knowing walking turned degrees meters toward "
             "crying flies dies lying tying agreement argument bus buses yes")
    words.update(extra.split())
    with open(os.path.join(METRICS, "porter_reference.tsv"), "w") as f:
        for w in sorted(words):
            f.write(f"{w}\t{stem(w)}\n")


if __name__ == "__main__":
    main()
