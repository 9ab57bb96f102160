#!/usr/bin/env python3
"""Recomputes metrics.json from raw.jsonl using only the metric definitions.

Every z score is rebuilt from its green/scored/gamma counts, and every
aggregate (AUC, best F1, TPR at the FPR budgets, rates at the threshold, z
summaries) is recomputed by brute force. Exits non-zero on any mismatch.

usage: recompute_metrics.py RAW_JSONL METRICS_JSON [--fpr-levels 0.01,0.1]
"""

import argparse
import json
import math
import statistics
import sys
from collections import defaultdict

TOL = 1e-9
MIN_TOKENS = 10


def as_float(v):
    if isinstance(v, str):
        return {"inf": math.inf, "-inf": -math.inf, "nan": math.nan}[v]
    return float(v)


def close(a, b):
    if math.isinf(a) or math.isinf(b):
        return a == b
    return abs(a - b) <= TOL * max(1.0, abs(b))


def auc(docs):
    pos = [s for s, w in docs if w]
    neg = [s for s, w in docs if not w]
    hits = sum(1.0 if p > n else 0.5 if p == n else 0.0 for p in pos for n in neg)
    return hits / (len(pos) * len(neg))


def confusion(docs, t):
    tp = sum(1 for s, w in docs if w and s > t)
    fp = sum(1 for s, w in docs if not w and s > t)
    p = sum(1 for _, w in docs if w)
    return tp, fp, p - tp, len(docs) - p - fp


def best_f1(docs):
    u = sorted({s for s, _ in docs})
    cands = [-math.inf] + [a + (b - a) / 2.0 for a, b in zip(u, u[1:])] + [math.inf]
    best = (-1.0, 0.0)
    for t in cands:
        tp, fp, fn, _ = confusion(docs, t)
        d = 2 * tp + fp + fn
        f1 = 0.0 if d == 0 else 2 * tp / d
        if f1 > best[0]:
            best = (f1, t)
    return best


def tpr_conservative(docs, level):
    best_t = math.inf
    for t in [math.inf] + [s for s, _ in docs]:
        _, fp, _, tn = confusion(docs, t)
        if fp / (fp + tn) <= level and t < best_t:
            best_t = t
    tp, _, fn, _ = confusion(docs, best_t)
    return tp / (tp + fn)


def tpr_interpolated(docs, level):
    p = sum(1 for _, w in docs if w)
    n = len(docs) - p
    roc = [(0.0, 0.0)]
    for s in sorted({s for s, _ in docs}, reverse=True):
        roc.append((sum(1 for x, w in docs if not w and x >= s) / n, sum(1 for x, w in docs if w and x >= s) / p))
    for (f0, t0), (f1, t1) in zip(roc, roc[1:]):
        if f1 >= level:
            return t1 if f1 == f0 else t0 + (t1 - t0) * (level - f0) / (f1 - f0)
    return 1.0


def summary(xs):
    return {"mean": statistics.fmean(xs) if xs else 0.0,
            "sd": statistics.stdev(xs) if len(xs) > 1 else 0.0,
            "count": len(xs)}


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("raw")
    ap.add_argument("metrics")
    ap.add_argument("--convention", default="conservative", choices=["conservative", "interpolate"])
    args = ap.parse_args()

    errors = []
    groups = defaultdict(list)
    with open(args.raw) as f:
        for line_no, line in enumerate(f, 1):
            r = json.loads(line)
            n, g, gamma = r["scored"], r["green"], r["gamma"]
            if n >= MIN_TOKENS:
                z = (g - gamma * n) / math.sqrt(n * gamma * (1 - gamma))
                if not close(r["z"], z):
                    errors.append(f"raw line {line_no}: z {r['z']} != {z}")
            groups[f"{r['group']}/{r['detector']}"].append((r["z"], r["label"] == "watermarked", r["verdict"]))

    with open(args.metrics) as f:
        reports = json.load(f)["reports"]
    if sorted(groups) != sorted(r["group"] for r in reports):
        errors.append(f"report groups {sorted(r['group'] for r in reports)} != raw groups {sorted(groups)}")

    def expect(name, got, want):
        if not close(as_float(got), float(want)):
            errors.append(f"{name}: reported {got}, recomputed {want}")

    for rep in reports:
        rows = groups.get(rep["group"], [])
        docs = [(z, w) for z, w, _ in rows]
        tag = rep["group"]
        thr = as_float(rep["threshold"])
        for z, _, verdict in rows:
            if verdict != (z > thr):
                errors.append(f"{tag}: verdict {verdict} for z={z} at threshold {thr}")
        expect(f"{tag} n_watermarked", rep["n_watermarked"], sum(1 for _, w in docs if w))
        expect(f"{tag} n_clean", rep["n_clean"], sum(1 for _, w in docs if not w))
        expect(f"{tag} roc_auc", rep["roc_auc"], auc(docs))
        f1, t = best_f1(docs)
        expect(f"{tag} best_f1", rep["best_f1"], f1)
        expect(f"{tag} best_f1_threshold", rep["best_f1_threshold"], t)
        tpr = tpr_conservative if args.convention == "conservative" else tpr_interpolated
        for level, value in rep["tpr_at_fpr"].items():
            expect(f"{tag} tpr@{level}", value, tpr(docs, float(level)))
        tp, fp, fn, tn = confusion(docs, thr)
        expect(f"{tag} tpr_at_threshold", rep["tpr_at_threshold"], tp / (tp + fn))
        expect(f"{tag} fpr_at_threshold", rep["fpr_at_threshold"], fp / (fp + tn))
        for key, want in (("z_watermarked", True), ("z_clean", False)):
            s = summary([z for z, w in docs if w == want])
            for k in ("mean", "sd", "count"):
                expect(f"{tag} {key}.{k}", rep[key][k], s[k])

    for e in errors:
        print("MISMATCH", e)
    print(f"checked {len(reports)} reports over {sum(len(v) for v in groups.values())} raw records: "
          f"{'OK' if not errors else str(len(errors)) + ' mismatch(es)'}")
    return 1 if errors else 0


if __name__ == "__main__":
    sys.exit(main())
