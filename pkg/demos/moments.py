"""Mixed raw moments E[X1^r1 X2^r2] of the bivariate CNcDir law.

The closed form is a finite sum of 0F1 ratios; it is compared with a
series oracle over the Mixture Weight law, and the product moment is
shown in its three-term and reduced two-term forms.

Run with `python demos/moments.py`.
"""

from cncdir.models import CNcDirParams, DirParams, dir_mixed_moment
from cncdir.moments import cncdir_mixed_moment, cncdir_moment_11, cncdir_moment_series_oracle
from cncdir.specfun import SeriesControl

p = CNcDirParams([1.0, 1.0, 1.0], [42.7802, 48.7569, 44.1538])

for r in [(1, 0), (0, 1), (1, 1), (2, 1), (3, 2)]:
    closed = cncdir_mixed_moment(p, r)
    oracle, tail = cncdir_moment_series_oracle(p, r)
    print(f"r={r}: closed {closed:.12f}  oracle {oracle:.12f}  tail {tail:.1e}")

A, B = cncdir_moment_11(p, SeriesControl(tol=0))
print(f"E[X1 X2]: three-term {A:.15f}, reduced {B:.15f}")

# with zero non-centrality the moments are the Dirichlet ones
a = [0.7, 1.9, 1.2]
print("central:", cncdir_mixed_moment(CNcDirParams(a, [0, 0, 0]), (2, 1)), dir_mixed_moment(DirParams(a), 2, 1))
