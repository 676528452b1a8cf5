"""Independent reference implementations used as test oracles.

Nothing here imports routing, entropy or metric code from the package.
"""

import math


def entropy(p):
    return -sum(x * math.log(x + 1e-12) for x in p)


def sign(x):
    return (x > 0) - (x < 0)


def route(rec, tau1, tau2, eps=1e-8):
    """Decision tree over one replay record -> (outcome, final)."""
    y_s = rec["small_score"]
    u_s = max(entropy(rec["small_probs"]), 0.0)
    if u_s <= tau1:
        return "Stage1Fast", y_s
    y_l = rec["large_score"]
    hs = [max(entropy(t), 0.0) for t in rec["large_token_probs"]]
    u_l = sum(hs) / len(hs)
    if u_l <= tau2:
        return "Stage2LargeAccepted", y_l
    if sign(y_s) == sign(y_l):
        a, b = 1 / (u_s + eps), 1 / (u_l + eps)
        w = a / (a + b)
        return "Stage3WeightedAvg", w * y_s + (1 - w) * y_l
    return "Stage3CrossVerify", rec["large_cv_score"]


def mae(p, t):
    return sum(abs(a - b) for a, b in zip(p, t)) / len(p)


def pearson(p, t):
    n = len(p)
    mp_, mt = sum(p) / n, sum(t) / n
    cov = sum((a - mp_) * (b - mt) for a, b in zip(p, t))
    vp = sum((a - mp_) ** 2 for a in p)
    vt = sum((b - mt) ** 2 for b in t)
    return cov / math.sqrt(vp * vt)


def _round_half_away(x):
    return math.floor(abs(x) + 0.5) * (1 if x >= 0 else -1)


def acc7(p, t):
    c = lambda x: _round_half_away(min(3.0, max(-3.0, x)))  # noqa: E731
    return sum(c(a) == c(b) for a, b in zip(p, t)) / len(p)


def binary_labels(p, t, convention):
    if convention == "negpos":
        pairs = [(a >= 0, b > 0) for a, b in zip(p, t) if b != 0]
    else:
        pairs = [(a >= 0, b >= 0) for a, b in zip(p, t)]
    return pairs


def acc2(p, t, convention):
    pairs = binary_labels(p, t, convention)
    return sum(a == b for a, b in pairs) / len(pairs)


def f1_weighted(p, t, convention):
    pairs = binary_labels(p, t, convention)
    total = 0.0
    for cls in (False, True):
        tp = sum(1 for a, b in pairs if a == cls and b == cls)
        fp = sum(1 for a, b in pairs if a == cls and b != cls)
        fn = sum(1 for a, b in pairs if a != cls and b == cls)
        support = tp + fn
        prec = tp / (tp + fp) if tp + fp else 0.0
        rec = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2 * prec * rec / (prec + rec) if prec + rec else 0.0
        total += f1 * support
    return total / len(pairs)
