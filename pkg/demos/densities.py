"""The four bivariate laws on the simplex, evaluated two ways.

Closed forms are checked against their mixture representations, the
central case is shown to collapse to the Dirichlet, and the densities
near the vertices are compared with their limiting values.

Run with `python demos/densities.py`.
"""

import numpy as np

from cncdir.models import (
    CNcDirParams,
    DirParams,
    Kb2Params,
    NcDirParams,
    cncdir_logpdf,
    cncdir_logpdf_mixture,
    cncdir_vertex_limits,
    dir_logpdf,
    kb2_logpdf,
    ncdir_logpdf,
    ncdir_logpdf_mixture,
)

alpha = [1.0, 1.0, 1.0]
lam = [42.7802, 48.7569, 44.1538]
x = np.array([[0.2, 0.3], [0.45, 0.45], [0.05, 0.9], [0.33, 0.33]])

print("points:\n", x)
print("Dir    ", np.round(np.exp(dir_logpdf(DirParams([1.27, 1.36, 1.28]), x)), 6))
print("KB2    ", np.round(np.exp(kb2_logpdf(Kb2Params([1.28, 1.37, 1.25], 0.19), x)), 6))
print("NcDir  ", np.round(np.exp(ncdir_logpdf(NcDirParams(alpha, [3.05, 3.46, 3.11]), x)), 6))
print("CNcDir ", np.round(np.exp(cncdir_logpdf(CNcDirParams(alpha, lam), x)), 6))

# closed form vs mixture representation
pc = CNcDirParams([0.8, 1.7, 2.2], [12.0, 3.0, 25.0])
closed = cncdir_logpdf(pc, x)
mixture, tail = cncdir_logpdf_mixture(pc, x, trunc=60, return_tail=True)
print("CNcDir closed vs mixture, max |diff| of logs:", np.abs(closed - mixture).max(), "tail", tail.max())

pn = NcDirParams([0.8, 1.7, 2.2], [12.0, 3.0, 25.0])
closed = ncdir_logpdf(pn, x)
mixture = ncdir_logpdf_mixture(pn, x, trunc=[40, 25, 50])
print("NcDir  closed vs Poisson mixture, max |diff| of logs:", np.abs(closed - mixture).max())

# lambda = 0 gives back the Dirichlet
a = [0.6, 2.0, 1.4]
d = np.abs(cncdir_logpdf(CNcDirParams(a, [0, 0, 0]), x) - dir_logpdf(DirParams(a), x)).max()
print("central CNcDir vs Dirichlet:", d)

# the density approaches a finite value at each vertex when all shapes are 1
p = CNcDirParams(alpha, lam)
h = 1e-6
near = np.array([[1 - 2 * h, h], [h, 1 - 2 * h], [h, h]])
for k, (lim, f) in enumerate(zip(cncdir_vertex_limits(p), np.exp(cncdir_logpdf(p, near)))):
    print(f"vertex {k + 1}: density {f:.6f}, limit {lim.value:.6f}")
