"""Plain-Python reference implementations used as test oracles.

Nothing here imports the package under test: each routine is written out
directly from the formulas, one scalar at a time.
"""
import math

import numpy as np

UNL = 0


def f(r, g):
    if r * g > 1:
        return 1.0
    if r * g < 0:
        return 0.0
    return r * g


def gfmm(V, W, lo, up, gammas):
    out = 1.0
    for v, w, a, b, g in zip(V, W, lo, up, gammas):
        if v > w or math.isnan(a):
            continue
        out = min(out, 1 - f(b - w, g), 1 - f(v - a, g))
    return out


def fmnn(V, W, x, g):
    n = len(V)
    total = 0.0
    for v, w, xi in zip(V, W, x):
        total += max(0.0, 1 - max(0.0, g * min(1.0, xi - w)))
        total += max(0.0, 1 - max(0.0, g * min(1.0, v - xi)))
    return total / (2 * n)


def dims_overlap(V, W, P, Q):
    """Interior intersection with the unset-dimension rules."""
    any_set = False
    for v, w, p, q in zip(V, W, P, Q):
        a_unset, b_unset = v > w, p > q
        if a_unset and b_unset:
            continue
        if a_unset or b_unset:
            return False
        any_set = True
        if not (v < q and p < w):
            return False
    return any_set


def clash(la, lb):
    return la != UNL and lb != UNL and la != lb


def overlap(a, b):
    if not dims_overlap(a["V"], a["W"], b["V"], b["W"]):
        return None
    best = None
    for j in range(len(a["V"])):
        v, w, p, q = a["V"][j], a["W"][j], b["V"][j], b["W"][j]
        if v > w:
            continue
        if v < p < w < q:
            case, d = 1, w - p
        elif p < v < q < w:
            case, d = 2, q - v
        elif v <= p and q <= w:
            case, d = 3, min(q - v, w - p)
        else:
            case, d = 4, min(q - v, w - p)
        if best is None or d < best[1]:
            best = (j, d, case)
    return best


def contract(a, b, j, case):
    v, w, p, q = a["V"][j], a["W"][j], b["V"][j], b["W"][j]
    if case == 1:
        m = (w + p) / 2
        a["W"][j] = m
        b["V"][j] = m
    elif case == 2:
        m = (q + v) / 2
        b["W"][j] = m
        a["V"][j] = m
    elif case == 3:
        if q - v < w - p:
            a["V"][j] = q
        else:
            a["W"][j] = p
    else:
        if q - v < w - p:
            b["W"][j] = v
        else:
            b["V"][j] = w


def replay(samples, theta, gamma, algorithm):
    """Step-by-step Onln-GFMM / IOL-GFMM replay over ``[(lower, upper, label), ...]``."""
    boxes = []
    for lo, up, label in samples:
        n = len(lo)
        gammas = [gamma] * n
        cands = [
            b for b in boxes
            if label == UNL or b["label"] == UNL or b["label"] == label
        ]
        cands.sort(key=lambda b: (-gfmm(b["V"], b["W"], lo, up, gammas), b["id"]))
        placed = False
        for b in cands:
            ok = True
            for j in range(n):
                if b["V"][j] > b["W"][j] or math.isnan(lo[j]):
                    continue
                if max(b["W"][j], up[j]) - min(b["V"][j], lo[j]) > theta:
                    ok = False
            if not ok:
                continue
            newV, newW = list(b["V"]), list(b["W"])
            for j in range(n):
                if math.isnan(lo[j]):
                    continue
                if b["V"][j] > b["W"][j]:
                    newV[j], newW[j] = lo[j], up[j]
                else:
                    newV[j], newW[j] = min(b["V"][j], lo[j]), max(b["W"][j], up[j])
            new_label = b["label"] if b["label"] != UNL else label
            if algorithm == "iol-gfmm":
                if any(
                    o is not b and clash(new_label, o["label"]) and dims_overlap(newV, newW, o["V"], o["W"])
                    for o in boxes
                ):
                    continue
            b["V"], b["W"], b["label"] = newV, newW, new_label
            b["count"] += 1
            if algorithm == "onln-gfmm":
                for o in boxes:
                    if o is b or not clash(b["label"], o["label"]):
                        continue
                    found = overlap(b, o)
                    if found is not None:
                        contract(b, o, found[0], found[2])
            placed = True
            break
        if not placed:
            V = [1.0 if math.isnan(a) else a for a in lo]
            W = [0.0 if math.isnan(a) else a for a in up]
            boxes.append({"V": V, "W": W, "label": label, "count": 1, "id": len(boxes)})
    return boxes


def pairwise_violations(V, W, labels):
    """Count inter-class box pairs sharing positive interior volume.

    Vectorised and independent of the package. A box that is degenerate on a
    compared dimension has no interior there, so it never counts.
    """
    V = np.asarray(V, dtype=float)
    W = np.asarray(W, dtype=float)
    labels = np.asarray(labels)
    if len(labels) < 2:
        return 0
    Vi, Wi, Vj, Wj = V[:, None], W[:, None], V[None], W[None]
    a_unset, b_unset = Vi > Wi, Vj > Wj
    both = a_unset & b_unset
    one = a_unset ^ b_unset
    inter = np.maximum(Vi, Vj) < np.minimum(Wi, Wj)
    ok = np.where(both, True, inter & ~one).all(axis=-1) & (~both).any(axis=-1)
    li, lj = labels[:, None], labels[None]
    conflict = (li != UNL) & (lj != UNL) & (li != lj)
    hits = ok & conflict
    return int(np.triu(hits, 1).sum())
