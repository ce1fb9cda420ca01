"""
Estimating a p1 model from one graph
====================================

Simulate a directed graph with degree heterogeneity, recover the
parameters with the triple-dyad ratio estimators, and test for
reciprocity.  Run with ``python demos/01_estimate_and_test.py``.
"""

import numpy as np

from p1tdre import inference as inf
from p1tdre.mle import fit_mle
from p1tdre.model import linear_design, sample_graph, tally
from p1tdre.estimator import estimate_all

# The linear design spreads the node effects evenly over [-1, 1] (after
# centering) and fixes the global parameters.
n = 400
truth = linear_design(n, rho=0.5, theta=0.0)
g = sample_graph(truth, seed=1)
print(f"{g.n} nodes, {g.num_edges} edges, density {g.density():.3f}")

# Everything the estimators need comes from the dyad tally.
report = estimate_all(tally(g))
print(f"theta: true {truth.theta:+.3f}  estimated {report.theta:+.3f}")
print(f"rho:   true {truth.rho:+.3f}  estimated {report.rho:+.3f}")
print(f"largest alpha error {np.max(np.abs(report.alpha - truth.alpha)):.3f}")

# A fit bundles the estimates with the plug-in asymptotic table, so the
# tests below reuse one evaluation.
f = inf.fit(g)
recip = inf.test_reciprocity(g, fitted=f)
print(f"reciprocity: z={recip.statistic:.2f}, p={recip.p_value:.2e}, "
      f"95% interval {recip.ci[0]:.3f}..{recip.ci[1]:.3f}")

# Are the first and last nodes equally outgoing?  They should not be.
diff = inf.ci_alpha_diff(g, 0, n - 1, fitted=f)
print(f"alpha_0 - alpha_{n - 1}: {diff.estimate:.3f} in {diff.ci[0]:.3f}..{diff.ci[1]:.3f}")

# The maximum likelihood fit is the slower reference point.
mle = fit_mle(g)
print(f"MLE rho {mle.theta_tilde.rho:+.3f} after {mle.iterations} Newton steps")
