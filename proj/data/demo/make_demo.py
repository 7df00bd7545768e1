"""Writes the small demo panel used by `dimm fit --config data/demo/fit.json`."""
import json

import numpy as np

rng = np.random.default_rng(20240601)
n, sizes = 120, [4, 3, 5]
m = sum(sizes)
beta = np.array([0.5, 1.0, -0.7])
ar1 = 4.0 * 0.5 ** np.abs(np.subtract.outer(np.arange(m), np.arange(m)))
chol = np.linalg.cholesky(ar1)

x1 = rng.standard_normal(n)
x2 = rng.binomial(1, 0.4, n).astype(float)
with open("covariates.csv", "w") as fx, open("response.csv", "w") as fy:
    fx.write("subject_id,position,age,treated\n")
    fy.write("subject_id," + ",".join(f"y{r + 1}" for r in range(m)) + "\n")
    for i in range(n):
        mu = beta[0] + beta[1] * x1[i] + beta[2] * x2[i]
        y = mu + chol @ rng.standard_normal(m)
        fy.write(f"s{i + 1:03d}," + ",".join(f"{v:.10g}" for v in y) + "\n")
        for r in range(m):
            fx.write(f"s{i + 1:03d},{r + 1},{x1[i]:.10g},{x2[i]:.0f}\n")

config = {
    "schema_version": 1,
    "response_path": "response.csv",
    "covariate_path": "covariates.csv",
    "blocks": [
        {"name": "frontal", "size": 4, "structure": "AR1"},
        {"name": "central", "size": 3, "structure": "CS"},
        {"name": "parietal", "size": 5, "structure": "AR1"},
    ],
    "intercept": True,
    "workers": 2,
}
with open("fit.json", "w") as f:
    json.dump(config, f, indent=2)
    f.write("\n")
