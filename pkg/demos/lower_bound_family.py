"""Build a packing of slope hypotheses and check the testing budget.

A Varshamov-Gilbert codebook indexes hypotheses that are well separated in
L2 yet hard to tell apart from n samples, because their pairwise
Kullback-Leibler divergence stays below ``u log N``.  The script prints the
codebook size, its minimum Hamming distance, the smallest separation and the
KL budget.

Run with ``python demos/lower_bound_family.py``.
"""
from spectral_flr.kernels import BROWNIAN_COV, CUBIC_KERNEL
from spectral_flr.lower_bounds import build_family, separation_report, varshamov_gilbert
from spectral_flr.seeding import derive_stream

M, n = 16, 1000
T, C = CUBIC_KERNEL.operator(2 * M), BROWNIAN_COV.operator(2 * M)
book = varshamov_gilbert(M, derive_stream(0, [0]))
family = build_family(book, 0.5, T, C)
report = separation_report(family, T, C, n, sigma2=1.0, u=0.1)

print(f"codebook: N={book.N} words of length M={book.M}, min Hamming {report['min_hamming']}")
print(f"verified: {report['codebook_verified']}")
for metric, value in sorted(report["min_distance"].items()):
    print(f"smallest pairwise {metric} separation: {value:.4e}")
print(f"largest pairwise KL: {report['max_pairwise_kl']:.4e}")
budget = report["budget"]
print(f"mean KL {budget['mean_kl']:.4e} <= u log N = {budget['bound']:.4e}: {budget['holds']}")
