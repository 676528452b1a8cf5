"""Regenerate the replay fixtures shipped in src/ucascade/data/.

Distributions are solved so their entropies hit the target values:
the calibration fixture's partition means come out at (0.34, 0.84) for
the small model and (0.22, 0.74) for the MLLM, which puts the default
thresholds at tau1 = 0.59 and tau2 = 0.48.
"""

import math
from pathlib import Path

from scipy.optimize import brentq

from ucascade.backends.replay import write_replay

DATA = Path(__file__).resolve().parents[1] / "src" / "ucascade" / "data"


def entropy(p):
    return -sum(x * math.log(x) for x in p if x > 0)


def dist_with_entropy(h):
    """(1 - a, a/2, a/2) with entropy h; a in (0, 2/3] spans (0, ln 3]."""
    if h == 0:
        return [1.0, 0.0, 0.0]
    a = brentq(lambda a: entropy([1 - a, a / 2, a / 2]) - h, 1e-15, 2 / 3, xtol=1e-16, rtol=1e-15)
    return [1 - a, a / 2, a / 2]


def case_study():
    return [{
        "schema_version": 1,
        "id": "sims_case_study",
        "text": "I feel that my career has already hit its ceiling here.",
        "scale": "sims",
        "ground_truth": -0.4,
        "small_score": 0.0,
        "small_probs": [1 / 3, 1 / 3, 1 / 3],
        "large_score": -0.2,
        "large_token_probs": [dist_with_entropy(0.51)],
        "large_cv_score": -0.5,
    }]


def mosi_calibration():
    small_same = [0.14, 0.24, 0.34, 0.44, 0.54]
    small_opp = [0.64, 0.74, 0.84, 0.94, 1.04]
    large_same = [0.02, 0.12, 0.22, 0.32, 0.42]
    large_opp = [0.54, 0.64, 0.74, 0.84, 0.94]
    small_u = small_same + small_opp
    large_u = [None] * 10
    large_u[0::2] = large_same
    large_u[1::2] = large_opp
    recs = []
    for i in range(10):
        truth = 1.2 if i % 3 else -1.8
        small = truth * 0.8 if i < 5 else -truth * 0.5
        large = truth * 0.9 if i % 2 == 0 else -truth * 0.4
        recs.append({
            "schema_version": 1,
            "id": f"mosi_val_{i}",
            "text": f"validation utterance {i}",
            "scale": "mosi",
            "ground_truth": truth,
            "small_score": round(small, 4),
            "small_probs": dist_with_entropy(small_u[i]),
            "large_score": round(large, 4),
            "large_token_probs": [dist_with_entropy(large_u[i])],
            "large_cv_score": truth,
        })
    return recs


if __name__ == "__main__":
    DATA.mkdir(parents=True, exist_ok=True)
    write_replay(case_study(), DATA / "case_study.jsonl")
    write_replay(mosi_calibration(), DATA / "mosi_calibration.jsonl")
    print("fixtures written to", DATA)
