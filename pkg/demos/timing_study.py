"""A small version of the fitting-time comparison between CNcDir and NcDir.

Each stratum simulates series from both models and times the ML fit of
the matching model; a one-tailed Z test asks whether CNcDir is faster.
The full grid is `cncdir bench`; this keeps to one stratum.

Run with `python demos/timing_study.py`.
"""

from cncdir.bench import BenchStratum, results_to_markdown, run_stratum

stratum = BenchStratum((1.8, 1.2, 1.5), (0.7, 1.0, 0.9), N=25, n=5)
res = run_stratum(stratum, seed=1)
print(results_to_markdown([res]))
