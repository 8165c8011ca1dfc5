"""Writes the golden fixture and its expected values.

The expected values come from a straightforward re-implementation of the
scoring arithmetic (top-k selection, reference division, zero-filled
alignment, cosine distance, mean distance with exclusion, rankings, tau-b by
pair counting). Run from any directory; files land next to this script.
"""

import csv
import hashlib
import itertools
import json
import math
import os
import random

HERE = os.path.dirname(os.path.abspath(__file__))
FAMILY = "toy"
K = 3
FLOOR = 1e-12
SOURCES = ["alpha", "bravo", "charlie", "delta"]
TOPICS = {
    "energy": ["grid", "solar", "coal", "price", "wind", "plant", "power", "tax",
               "jobs", "climate", "oil", "gas", "nuclear", "policy", "cost"],
    "health": ["care", "insurance", "hospital", "vaccine", "doctor", "cost", "plan",
               "coverage", "patients", "drug", "mandate", "clinic", "nurse", "policy", "risk"],
}
POOLS = {
    "energy": ["clean", "cheap", "dirty", "reliable", "expensive", "green"],
    "health": ["affordable", "broken", "free", "costly", "universal", "failing"],
}
QA = ["Yes", "True", "Maybe", "No", "False"]
SINGLE = ["safe", "risky", "costly", "fair"]
NORMS = ["none", "general", "domain"]
LEANINGS = {"alpha": ("Left", -2), "bravo": ("Lean Left", -1),
            "charlie": ("Lean Right", 1), "delta": ("Right", 2)}
SURVEY_HEADER = ["outlet", "All U.S. adults", "Liberal", "Moderate", "Conservative"]
SURVEY = {
    "alpha": [20, 31, 22, 9],
    "bravo": [25, 30, 27, 17],
    "charlie": [18, 26, 19, 14],
    "delta": [12, 3, 10, 29],
}

rng = random.Random(20240607)


def write(rel, text):
    path = os.path.join(HERE, rel)
    os.makedirs(os.path.dirname(path), exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(text)


def write_jsonl(rel, rows):
    write(rel, "".join(json.dumps(r) + "\n" for r in rows))


def probs(n):
    """n distinct probabilities summing below one."""
    while True:
        raw = [rng.uniform(0.05, 1.0) for _ in range(n)]
        total = sum(raw) * rng.uniform(1.05, 1.6)
        p = [round(x / total, 6) for x in raw]
        if len(set(p)) == n and min(p) > 0:
            return p


# ---------------------------------------------------------------- corpus

def corpus():
    texts = {}
    for topic, words in TOPICS.items():
        for src in SOURCES:
            for art in ("a1", "a2"):
                paras = [" ".join(rng.choice(words) for _ in range(rng.randint(18, 30)))
                         for _ in range(3)]
                write(f"corpus/{topic}/{src}/{art}.txt", "\n\n".join(paras) + "\n")
                texts.setdefault((topic, src), []).extend(paras)
    return texts


# ---------------------------------------------------------------- prompts and stub

def prompts_for(topic):
    words = TOPICS[topic]
    bo = []
    for i in range(3):
        a, b = words[i], words[i + 3]
        bo.append({
            "id": f"{topic}/alpha/a1/{i}.0/bo/{i}",
            "text_with_mask": f"the {a} {b} is ___MASK___ today",
            "topic": topic,
            "origin": "bigram_outer",
            "anchor": f"{a} {b}",
            "candidates": None,
            "gold_token": "fine",
        })
    term = words[0]
    manual = [
        {
            "id": f"{topic}/manual/declarative/qa/{term}/0",
            "text_with_mask": f"The {term} is good. ___MASK___.",
            "topic": topic, "origin": "manual", "anchor": "declarative/qa",
            "candidates": QA, "gold_token": None,
        },
        {
            "id": f"{topic}/manual/interrogative/qa/{term}/0",
            "text_with_mask": f"Is the {term} good? ___MASK___.",
            "topic": topic, "origin": "manual", "anchor": "interrogative/qa",
            "candidates": QA, "gold_token": None,
        },
        {
            "id": f"{topic}/manual/declarative/single/{term}/0",
            "text_with_mask": f"The {term} is ___MASK___.",
            "topic": topic, "origin": "manual", "anchor": "declarative/single",
            "candidates": SINGLE, "gold_token": None,
        },
    ]
    return {"bigram_outer": bo, "manual": manual}


def build_stub(prompts, texts):
    table = {"models": [], "uniform": {}, "scores": [], "embeddings": [], "importance": []}
    source_dists = {}
    domain_dists = {}
    for topic, by_method in prompts.items():
        table["uniform"][f"base:{FAMILY}:{topic}"] = 0.001
        for method, ps in by_method.items():
            for p in ps:
                tokens = POOLS[topic] if p["candidates"] is None else p["candidates"]
                for src in SOURCES:
                    if p["candidates"] is None:
                        chosen = rng.sample(tokens, 5)
                    else:
                        chosen = list(tokens)
                    dist = dict(zip(chosen, probs(len(chosen))))
                    if topic == "energy" and src == "delta" and p["candidates"] == SINGLE:
                        # answers only outside the candidate list: an all-zero row
                        dist = {"unrelated": 0.4}
                    source_dists[(src, p["id"])] = dist
                    table["scores"].append({
                        "model": f"source:{FAMILY}:{topic}:{src}",
                        "prompt_id": p["id"],
                        "distribution": dist,
                    })
                dom = dict(zip(tokens, probs(len(tokens))))
                domain_dists[p["id"]] = dom
                table["scores"].append({
                    "model": f"domain:{FAMILY}:{topic}",
                    "prompt_id": p["id"],
                    "distribution": dom,
                })
        table["models"].append(f"classifier:{FAMILY}:{topic}")
        for src in SOURCES:
            for text in texts[(topic, src)]:
                table["embeddings"].append({
                    "model": f"classifier:{FAMILY}:{topic}",
                    "text": text,
                    "vector": [round(rng.uniform(-1, 1), 6) for _ in range(4)],
                })
                table["embeddings"].append({
                    "model": f"source:{FAMILY}:{topic}:{src}",
                    "text": text,
                    "vector": [round(rng.uniform(-1, 1), 6) for _ in range(4)],
                })
    return table, source_dists, domain_dists


# ---------------------------------------------------------------- oracle

def top_k(dist, k):
    return sorted(dist.items(), key=lambda kv: (-kv[1], kv[0]))[:k]


def framing_matrix(p, norm, source_dists, domain_dists):
    raw = {}
    for src in SOURCES:
        d = source_dists[(src, p["id"])]
        if p["candidates"] is None:
            raw[src] = dict(top_k(d, K))
        else:
            raw[src] = {c: d.get(c, 0.0) for c in p["candidates"]}
    if p["candidates"] is None:
        vocab = sorted(set().union(*[set(r) for r in raw.values()]))
    else:
        vocab = list(p["candidates"])
    rows = {}
    for src in SOURCES:
        row = []
        for t in vocab:
            if t not in raw[src]:
                row.append(0.0)
                continue
            v = raw[src][t]
            if norm == "general":
                v = v / max(0.001, FLOOR)
            elif norm == "domain":
                v = v / max(domain_dists[p["id"]].get(t, 0.0), FLOOR)
            row.append(v)
        rows[src] = row
    return rows


def cosine(a, b):
    na = math.sqrt(sum(x * x for x in a))
    nb = math.sqrt(sum(x * x for x in b))
    if na == 0 or nb == 0:
        return None
    return min(2.0, max(0.0, 1.0 - sum(x * y for x, y in zip(a, b)) / (na * nb)))


def rankings(names, dist):
    out = {}
    for a in names:
        others = sorted((dist[a][b], b) for b in names if b != a)
        for (d1, _), (d2, _) in zip(others, others[1:]):
            assert d1 == d2 or abs(d1 - d2) > 1e-6, f"near tie for {a}: {d1} {d2}"
        out[a] = {b: d for d, b in others}
    return out


def tau_b(x, y):
    """x, y: item -> score (lower ranks first); ties where scores are equal."""
    items = sorted(x)
    conc = disc = tx = ty = 0
    for i, j in itertools.combinations(items, 2):
        dx = (x[i] > x[j]) - (x[i] < x[j])
        dy = (y[i] > y[j]) - (y[i] < y[j])
        if dx == 0 and dy == 0:
            continue
        if dx == 0:
            tx += 1
        elif dy == 0:
            ty += 1
        elif dx == dy:
            conc += 1
        else:
            disc += 1
    denom = math.sqrt((conc + disc + tx) * (conc + disc + ty))
    if denom == 0:
        return None
    return (conc - disc) / denom


def agreement(pred, truth):
    taus = {}
    for a in pred:
        t = tau_b(pred[a], truth[a])
        if t is not None:
            taus[a] = t
    if not taus:
        return None
    return taus


def truths():
    lean = {s: float(v) for s, (_, v) in LEANINGS.items()}
    lean_d = {a: {b: abs(lean[a] - lean[b]) for b in SOURCES} for a in SOURCES}
    prof = {s: [v / row[0] for v in row[1:]] for s, row in SURVEY.items()}
    soa_d = {a: {b: cosine(prof[a], prof[b]) for b in SOURCES} for a in SOURCES}
    return {"mbr": rankings(SOURCES, lean_d), "soa": rankings(SOURCES, soa_d)}


def expected(prompts, source_dists, domain_dists):
    gts = truths()
    cells = []
    for topic, by_method in prompts.items():
        for method, ps in by_method.items():
            for norm in NORMS:
                mats = {p["id"]: framing_matrix(p, norm, source_dists, domain_dists) for p in ps}
                dist = {a: {a: 0.0} for a in SOURCES}
                exclusions = []
                for a, b in itertools.combinations(SOURCES, 2):
                    ds, excl = [], []
                    for pid in sorted(mats):
                        d = cosine(mats[pid][a], mats[pid][b])
                        if d is None:
                            excl.append(pid)
                        else:
                            ds.append(d)
                    dist[a][b] = dist[b][a] = sum(ds) / len(ds)
                    if excl:
                        exclusions.append({"a": a, "b": b, "prompts": excl})
                pred = rankings(SOURCES, dist)
                cell = {
                    "topic": topic, "method": method, "normalization": norm,
                    "distances": [[dist[a][b] for b in SOURCES] for a in SOURCES],
                    "exclusions": exclusions,
                    "rankings": {a: list(pred[a]) for a in SOURCES},
                    "ground_truth": {},
                }
                for name, truth in gts.items():
                    taus = agreement(pred, truth)
                    records, skipped = {}, []
                    for pid in sorted(mats):
                        m = mats[pid]
                        pd = {a: {} for a in SOURCES}
                        ok = True
                        for a, b in itertools.combinations(SOURCES, 2):
                            d = cosine(m[a], m[b])
                            if d is None:
                                ok = False
                                break
                            pd[a][b] = pd[b][a] = d
                        t = agreement(rankings(SOURCES, pd), truth) if ok else None
                        if t is None:
                            skipped.append(pid)
                        else:
                            records[pid] = sum(t.values()) / len(t)
                    cell["ground_truth"][name] = {
                        "per_source_tau": taus,
                        "mean_tau": sum(taus.values()) / len(taus),
                        "instances": records,
                        "skipped": skipped,
                    }
                cells.append(cell)
    return {"sources": SOURCES, "k": K, "cells": cells}


def main():
    texts = corpus()
    prompts = {t: prompts_for(t) for t in TOPICS}
    for topic, by_method in prompts.items():
        for method, ps in by_method.items():
            write_jsonl(f"prompts/{topic}/{method}.jsonl", ps)
    table, source_dists, domain_dists = build_stub(prompts, texts)
    write("stub.json", json.dumps(table, indent=1, sort_keys=True) + "\n")

    rows = [["outlet", "leaning"]] + [[s, LEANINGS[s][0]] for s in SOURCES]
    write("mbr.csv", "".join(",".join(r) + "\n" for r in rows))
    lines = [",".join(SURVEY_HEADER)]
    lines += [",".join([s] + [f"{v}%" for v in SURVEY[s]]) for s in SOURCES]
    write("soa.csv", "\n".join(lines) + "\n")

    exp = expected(prompts, source_dists, domain_dists)
    write("expected.json", json.dumps(exp, indent=1, sort_keys=True) + "\n")
    digest = hashlib.sha256(json.dumps(exp, sort_keys=True).encode()).hexdigest()
    print(f"wrote fixture, expected digest {digest[:16]}")


if __name__ == "__main__":
    main()
