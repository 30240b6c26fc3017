"""Hypergeometric building blocks: series, identities and the Humbert function.

Run with `python demos/special_functions.py`.
"""

import numpy as np

from cncdir.specfun import (
    SeriesControl,
    f01_recurrence_check,
    genhypergeo,
    hyp0f1,
    hyp1f1,
    kummer_transform_check,
    log_psi2_3,
    pochhammer,
    poch_sum_split,
    psi2_3,
)

# Pochhammer symbols: (a)_l = a (a+1) ... (a+l-1), and the split rule
# (a)_{l1+l2} = (a)_{l1} (a+l1)_{l2}
print("(2.5)_4        =", pochhammer(2.5, 4))
print("(2.5)_1 (3.5)_3 =", poch_sum_split(2.5, 1, 3))

# A generic pFq partial sum carries its own convergence report
res = genhypergeo([1.5, 2.0], [3.0], 0.4)
print(f"2F1(1.5, 2; 3; 0.4) = {res.value:.12f} after {res.terms_used} terms, converged={res.converged}")

# 0F1 and 1F1 are the two special cases the densities lean on
print("0F1(; 2.0; 10.0) =", hyp0f1(2.0, 10.0))
print("1F1(1.2; 3.0; -4.0) =", hyp1f1(1.2, 3.0, -4.0))

# Kummer's first theorem, both sides summed directly
lhs, rhs = kummer_transform_check(1.2, 3.0, -2.0)
print(f"Kummer: {lhs:.15f} vs {rhs:.15f}")

# consecutive-denominator recurrence of 0F1
f0, f1, f2 = f01_recurrence_check(1.5, 6.0)
print(f"0F1 recurrence: {f0:.12f} = {f1 + 6.0 / (1.5 * 2.5) * f2:.12f}")

# Humbert Psi_2 in three variables: scalar nested routine with a trace of
# the outer partial contributions, and the vectorised log version
r = psi2_3(3.0, 1.0, 1.2, 0.8, 1.0, 2.0, 0.5, debug=True)
print(f"Psi2(3; 1, 1.2, 0.8; 1, 2, 0.5) = {r.value:.12f} ({len(r.trace)} outer terms)")
x = np.linspace(0.1, 5.0, 5)
print("log Psi2 along a ray:", np.round(log_psi2_3(3.0, 1.0, 1.2, 0.8, x, x, x), 6))

# a tighter tolerance is a SeriesControl away
exact = SeriesControl(tol=0)
print("1F1 at machine precision:", hyp1f1(1.2, 3.0, -4.0, exact))
