"""How much can groups help each other? The sharing quantities H1, H2-, H2+
measure it per arm subset; bar_ht takes the worst subset and drives the
minimax regret envelope T^(2/3) / bar_ht^(1/3).

    python demos/02_sharing.py
"""
from colucb import analysis as an
from colucb.core import GroupStructure, all_shared, disjoint, k_subsets, members

T = 1024
structures = {
    "one group, 4 arms": k_subsets(4, 4),
    "8 arms, every 4-subset is a group": k_subsets(8, 4),
    "8 groups share 8 arms": all_shared(8, 8),
    "4 disjoint pairs": disjoint([2] * 4),
    "chain of 4 pairs": GroupStructure.from_lists(5, [[0, 1], [1, 2], [2, 3], [3, 4]]),
}
for name, s in structures.items():
    minus, S_minus = an.bar_ht(s, T, "-")
    plus, S_plus = an.bar_ht(s, T, "+")
    lo, hi = an.theorem2_envelope(s, T)
    print(f"{name}")
    print(f"  bar_ht-  = {minus:7.3f} at S = {members(S_minus)}")
    print(f"  bar_ht+  = {plus:7.3f} at S = {members(S_plus)}")
    print(f"  envelope   [{lo:.1f}, {hi:.1f}]")
    print(f"  collaboration suffices (alpha=1): {an.sufficient_improvement(s, T, 1)}\n")
