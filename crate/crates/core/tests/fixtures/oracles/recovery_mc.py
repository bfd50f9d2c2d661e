"""Monte-Carlo best-match accuracy of uniform random labels against fixed truth.

n = 1000 points, k = 5, 1000 labelings; the best label permutation comes from
scipy's linear_sum_assignment on the confusion matrix.
"""
from pathlib import Path

import numpy as np
from scipy.optimize import linear_sum_assignment

HERE = Path(__file__).resolve().parent.parent
N, K, TRIALS = 1000, 5, 1000
rng = np.random.default_rng(20240601)
truth = np.arange(N) % K
scores = []
for _ in range(TRIALS):
    pred = rng.integers(0, K, N)
    conf = np.zeros((K, K), dtype=int)
    np.add.at(conf, (truth, pred), 1)
    r, c = linear_sum_assignment(-conf)
    scores.append(conf[r, c].sum() / N)
scores = np.array(scores)
(HERE / "recovery_random.expected.txt").write_text(
    f"mean {float(scores.mean())!r}\nsd {float(scores.std(ddof=1))!r}\n"
)
