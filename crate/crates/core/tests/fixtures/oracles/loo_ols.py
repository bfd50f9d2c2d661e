"""Leave-one-out OLS on ols_5.csv: R² over the five held-out predictions."""
import csv
from pathlib import Path

import numpy as np

HERE = Path(__file__).resolve().parent.parent
rows = list(csv.reader(open(HERE / "ols_5.csv")))[1:]
X = np.array([[float(v) for v in r[:8]] for r in rows])
y = np.array([float(r[8]) for r in rows])
active = [j for j in range(8) if np.any(X[:, j] != 0)]

pred = np.empty(len(y))
for i in range(len(y)):
    keep = [j for j in range(len(y)) if j != i]
    A = np.column_stack([np.ones(len(keep)), X[keep][:, active]])
    beta = np.linalg.solve(A.T @ A, A.T @ y[keep])
    pred[i] = beta[0] + X[i, active] @ beta[1:]

r2 = 1 - np.sum((y - pred) ** 2) / np.sum((y - y.mean()) ** 2)
(HERE / "ols_5.expected.txt").write_text(f"{float(r2)!r}\n" + "\n".join(repr(float(p)) for p in pred) + "\n")
