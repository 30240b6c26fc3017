"""The Mixture Weight counting law behind the conditional non-central Dirichlet.

Shows the joint pmf, its closure under marginals and sums, the
multinomial split given the total, and a sampler check.

Run with `python demos/mixture_weight.py`.
"""

import numpy as np

from cncdir.mixture_weight import (
    MwParams,
    mw_conditional_multinomial,
    mw_logpmf,
    mw_marginal_logpmf,
    mw_sample,
    mw_sum_logpmf,
)
from cncdir.sampling import make_rng

p = MwParams(2.5, (3.0, 1.2, 6.0))

# joint pmf on a box of counts; the mass beyond 30 per index is negligible
g = np.meshgrid(*[np.arange(30)] * 3, indexing="ij")
J = np.stack([v.ravel() for v in g], axis=1)
pm = np.exp(mw_logpmf(p, J, strict=False))
print("total mass on the box:", pm.sum())

# marginal of the first two counts, compared with summing out the third
j = np.array([2, 1])
summed = pm[(J[:, 0] == 2) & (J[:, 1] == 1)].sum()
print("P(N1=2, N2=1):", np.exp(mw_marginal_logpmf(p, 2, j)), "by summation:", summed)

# the total N+ is again MW with one component
s = J.sum(axis=1)
print("P(N+=4):", np.exp(mw_sum_logpmf(p, 4)), "by summation:", pm[s == 4].sum())

# given N+ the counts split multinomially with probabilities lambda / lambda+
print("split given N+=4:", mw_conditional_multinomial(p, 4))

# sampler: empirical means against the pmf means
draws = mw_sample(p, make_rng(1), 50_000)
print("empirical means:", draws.mean(axis=0))
print("pmf means:      ", (pm[:, None] * J).sum(axis=0))
