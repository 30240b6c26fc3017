"""Drawing from the simplex laws.

The CNcDir sampler has two independent routes: a Mixture Weight draw
followed by a Dirichlet draw, and a composition of non-central
chi-squared variables conditioned on their total.  Both should give the
same law.

Run with `python demos/sampling.py`.
"""

import numpy as np
from scipy import stats

from cncdir.models import CNcDirParams, DirParams, NcDirParams
from cncdir.moments import cncdir_mixed_moment
from cncdir.sampling import make_rng, sample_cncdir, sample_dirichlet, sample_ncdir, spawn_rngs

p = CNcDirParams([1.4, 0.8, 1.1], [10.0, 3.0, 6.0])
n = 50_000

# independent streams derived from one seed
r1, r2 = spawn_rngs(7, 2)
a = sample_cncdir(p, r1, n, "mixture")
b = sample_cncdir(p, r2, n, "composition")
for i in range(2):
    print(f"x{i + 1}: two-sample KS p-value {stats.ks_2samp(a[:, i], b[:, i]).pvalue:.3f}")

# product moment against the closed form
prod = a[:, 0] * a[:, 1]
print(f"E[X1 X2]: sample {prod.mean():.5f} +- {prod.std() / np.sqrt(n):.5f}, closed form {cncdir_mixed_moment(p, (1, 1)):.5f}")

# the unconditional NcDir and the Dirichlet for comparison
x = sample_ncdir(NcDirParams(p.alpha, p.lam), make_rng(3), n)
y = sample_dirichlet(DirParams(p.alpha), make_rng(4), n)
print("mean of X under CNcDir:", a.mean(axis=0))
print("mean of X under NcDir: ", x.mean(axis=0))
print("mean of X under Dir:   ", y.mean(axis=0))
