#!/usr/bin/env python3
"""Row-by-row feature computation for the oracle fixture.

Written from the feature definitions alone, without looking at the Rust
code paths. Regenerate the frozen table with

    python3 crates/core/tests/oracles/features_oracle.py \
        > crates/core/tests/fixtures/oracle/expected_features.tsv
"""

import math
import os
import re

HERE = os.path.dirname(os.path.abspath(__file__))
FIX = os.path.join(HERE, "..", "fixtures", "oracle")

K1, B, MU = 1.2, 0.75, 2000.0
K_GRID = [5, 10, 20, 50, 100]

# Only the function words that can occur in the fixture matter here.
FUNCTION_WORDS = {"a", "an", "the", "of", "in", "from", "is", "was", "and"}
NON_NOUN_SUFFIXES = [("est", 7), ("ly", 7), ("ous", 5), ("ful", 5),
                     ("able", 6), ("ible", 6), ("less", 6)]


def tokenize(text):
    return [t.lower() for t in re.split(r"[^0-9A-Za-z]+", text) if t]


def camel(ident):
    return " ".join(re.findall(r"[A-Z][a-z0-9]*", ident)).lower()


def read_tsv(name):
    with open(os.path.join(FIX, name)) as f:
        return [line.rstrip("\n").split("\t") for line in f if line.strip()]


types = {}
order = []
for tid, label, parent in read_tsv("types.tsv"):
    types[tid] = {"label": tokenize(label or camel(tid)), "parent": parent or None}
    order.append(tid)


def ancestors_and_self(t):
    out = []
    while t is not None:
        out.append(t)
        t = types[t]["parent"]
    return out


def depth(t):
    return len(ancestors_and_self(t))


max_depth = max(depth(t) for t in order)
children = {t: [c for c in order if types[c]["parent"] == t] for t in order}
top = [t for t in order if types[t]["parent"] is None]

docs = {}
for eid, _name, desc in read_tsv("entities.tsv"):
    docs[eid] = tokenize(desc)
ext = {t: [] for t in order}
for eid, tid in read_tsv("entity_types.tsv"):
    for a in ancestors_and_self(tid):
        if eid not in ext[a]:
            ext[a].append(eid)


def w(e, t):
    return 1.0 / len(ext[t]) if e in ext[t] else 0.0


N = len(docs)
avgdl = sum(len(d) for d in docs.values()) / N
T = sum(len(d) for d in docs.values())


def df(term):
    return sum(1 for d in docs.values() if term in d)


def cf(term):
    return sum(d.count(term) for d in docs.values())


def bm25(q, e):
    d = docs[e]
    s = 0.0
    for term in q:
        tf = d.count(term)
        if tf == 0:
            continue
        idf = math.log(1 + (N - df(term) + 0.5) / (df(term) + 0.5))
        s += idf * tf * (K1 + 1) / (tf + K1 * (1 - B + B * len(d) / avgdl))
    return s


def lm(q, e):
    d = docs[e]
    p = 1.0
    for term in q:
        if cf(term) == 0:
            return 0.0
        p *= (d.count(term) + MU * cf(term) / T) / (len(d) + MU)
    return p


def ec(q, scorer, k):
    scored = [(scorer(q, e), e) for e in docs]
    scored = sorted([x for x in scored if x[0] > 0], key=lambda x: (-x[0], x[1]))[:k]
    return {t: sum(s * w(e, t) for s, e in scored) for t in order}


# Pseudo type documents.
pseudo = {}
for t in order:
    if not ext[t]:
        continue
    f = {}
    for e in ext[t]:
        for term in docs[e]:
            f[term] = f.get(term, 0.0) + w(e, t)
    length = sum(len(docs[e]) * w(e, t) for e in ext[t])
    pseudo[t] = (f, length)
NT = len(pseudo)
avg_t = sum(l for _, l in pseudo.values()) / NT
total_t = sum(l for _, l in pseudo.values())


def tc_bm25(q, t):
    if t not in pseudo:
        return 0.0
    f, length = pseudo[t]
    s = 0.0
    for term in q:
        tf = f.get(term, 0.0)
        if tf <= 0:
            continue
        dft = sum(1 for g, _ in pseudo.values() if g.get(term, 0.0) > 0)
        idf = math.log(1 + (NT - dft + 0.5) / (dft + 0.5))
        s += idf * tf * (K1 + 1) / (tf + K1 * (1 - B + B * length / avg_t))
    return s


def tc_lm(q, t):
    if t not in pseudo:
        return 0.0
    f, length = pseudo[t]
    p = 1.0
    for term in q:
        c = sum(g.get(term, 0.0) for g, _ in pseudo.values())
        if c == 0:
            return 0.0
        p *= (f.get(term, 0.0) + MU * c / total_t) / (length + MU)
    return p


emb = {}
with open(os.path.join(FIX, "embeddings.txt")) as fh:
    for line in fh:
        parts = line.split()
        if parts:
            emb[parts[0]] = [float(x) for x in parts[1:]]


def cos(a, b):
    na = math.sqrt(sum(x * x for x in a))
    nb = math.sqrt(sum(x * x for x in b))
    if na == 0 or nb == 0:
        return 0.0
    return sum(x * y for x, y in zip(a, b)) / (na * nb)


def content(tokens):
    return [emb[t] for t in tokens if t not in FUNCTION_WORDS and t in emb]


def sims(q, lab):
    qv, tv = content(q), content(lab)
    if not qv or not tv:
        return 0.0, 0.0, 0.0
    cq = [sum(v[i] for v in qv) / len(qv) for i in range(3)]
    ct = [sum(v[i] for v in tv) / len(tv) for i in range(3)]
    pairs = [max(0.0, cos(a, b)) for a in qv for b in tv]
    return max(0.0, cos(cq, ct)), max(pairs), sum(pairs) / len(pairs)


def jac(a, b):
    a, b = set(a), set(b)
    u = a | b
    return len(a & b) / len(u) if u else 0.0


def grams(tokens, n):
    return [tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1)]


def is_noun(t):
    if t in FUNCTION_WORDS or not any(c.isalpha() for c in t):
        return False
    return not any(len(t) >= m and t.endswith(s) for s, m in NON_NOUN_SUFFIXES)


def row(q, t):
    lab = types[t]["label"]
    v = []
    v += [ec(q, bm25, k)[t] for k in K_GRID]
    v += [ec(q, lm, k)[t] for k in K_GRID]
    v += [tc_bm25(q, t), tc_lm(q, t)]
    parent = types[t]["parent"]
    siblings = (len(children[parent]) if parent else len(top)) - 1
    v += [depth(t) / max_depth, len(children[t]), siblings, len(ext[t]), len(lab)]
    idfs = [max(0.0, math.log(N / (1 + df(x)))) for x in lab]
    v += [sum(idfs), sum(idfs) / len(idfs)]
    v += [jac(grams(q, 1), grams(lab, 1)), jac(grams(q, 2), grams(lab, 2))]
    v += [jac([x for x in q if is_noun(x)], [x for x in lab if is_noun(x)])]
    v += list(sims(q, lab))
    return v


print("# qid\ttype_id\tf01..f25")
for qid, text in read_tsv("queries.tsv"):
    q = tokenize(text)
    for t in order:
        print("\t".join([qid, t] + [repr(float(x)) for x in row(q, t)]))
