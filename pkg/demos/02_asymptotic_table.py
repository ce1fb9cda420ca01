"""
The asymptotic table at the true parameters
===========================================

Compare the predicted standard deviation and bias of the global
estimators with a small Monte Carlo run.
"""

import numpy as np

from p1tdre.asymptotics import variance_table
from p1tdre.estimator import estimate_rho, estimate_theta
from p1tdre.model import dyad_probs, linear_design, sample_graph, tally

n, reps = 200, 300
truth = linear_design(n, rho=0.5, theta=-0.5)
table = variance_table(dyad_probs(truth))

rng = np.random.default_rng(7)
theta_hat, rho_hat = [], []
for seed in rng.integers(0, 2**32, reps):
    t = tally(sample_graph(truth, int(seed)))
    theta, _ = estimate_theta(t)
    theta_hat.append(theta)
    rho_hat.append(estimate_rho(t, theta))

for name, est, sd, bias, true in (
    ("theta", theta_hat, table.sigma_theta, table.theta_star, truth.theta),
    ("rho", rho_hat, table.sigma_rho, table.rho_star, truth.rho),
):
    est = np.asarray(est)
    print(f"{name:>5}: sd {est.std(ddof=1):.4f} (predicted {sd:.4f}), "
          f"bias {est.mean() - true:+.4f} (predicted {bias:+.4f})")
