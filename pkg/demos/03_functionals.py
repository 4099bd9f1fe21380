"""Instance-dependent picture: M(eps) is the best exploration rate the groups
can sustain on arms still in contention at scale eps; T(eps) and R(eps)
integrate it into the time and regret needed to resolve everything above eps.

    python demos/03_functionals.py
"""
import numpy as np

from colucb import analysis as an
from colucb.core import GroupStructure, gaussian_instance, members

s = GroupStructure.from_lists(4, [[0, 1, 2], [1, 2, 3], [0, 3]])
inst = gaussian_instance(s, [0.9, 0.8, 0.5, 0.7])
F = an.Functionals(inst)
print("gaps per group:\n", np.nan_to_num(inst.gap).round(2))
print(f"\n{'eps':>8} {'C*':>14} {'M':>10} {'T':>12} {'R':>10}")
for eps in np.geomspace(0.01, 1, 9):
    print(f"{eps:8.3f} {str(members(an.contention_star(inst, eps))):>14} {F.M(eps):10.3f} "
          f"{F.T_of(eps):12.1f} {F.R_of(eps):10.2f}")
for T in (1e3, 1e5):
    print(f"\nT = {T:.0e}: eps_T = {an.eps_T(inst, None, T, functionals=F):.4f}, "
          f"eps* = {an.eps_star(inst, T):.4f}, R(eps_T) = {F.R_of(an.eps_T(inst, None, T, functionals=F)):.1f}")
print("condition (C1=2, alpha=1):", an.condition_check(inst, 2.0, 1.0))
