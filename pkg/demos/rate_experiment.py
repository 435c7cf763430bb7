"""A reduced commutative rate experiment with a log-log plot.

Uses the Brownian covariance with the cubic kernel, a smoother slope than
the shipped preset and fewer replicates, so it runs in a few seconds.  The
fitted slope, the theoretical exponent and the verdict are printed, and the
plot is written to ``rate_demo.svg`` in the working directory.  With only
20 replicates on a short grid the fitted slope is noisy, and the verdict can
go either way.

Run with ``python demos/rate_experiment.py``.
"""
from spectral_flr.rates import run_rate_experiment, write_report_svg
from spectral_flr.simulate import Scenario

scenario = Scenario(M=64, alpha=1.0, sigma=1.0, seed=0)
reports = run_rate_experiment(scenario, n_grid=[128, 256, 512, 1024, 2048], replicates=20, metrics=["l2"])
rep = reports["commutative-estimation"]
for row in rep.per_n:
    print(f"n={row['n']:5d}  lambda={row['lambda']:.3e}  median L2={row['median']:.4e}")
print(f"slope {rep.fitted_slope:.3f} (theory {-rep.theory_exponent:.3f}, tolerance {rep.tolerance}) -> {rep.verdict}")
write_report_svg(rep, "rate_demo.svg")
print("plot written to rate_demo.svg")
