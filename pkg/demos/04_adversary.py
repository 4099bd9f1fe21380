"""Lower-bound adversary: find the contention arm a pilot run of Col-UCB
explores least, then move its mean just above (J+) or below (J-) the best
alternative in its group by z_T. An algorithm that under-explores that arm
cannot tell the two apart.

    python demos/04_adversary.py
"""
from colucb.algo import run
from colucb.core import AlgoConfig, all_shared, gaussian_instance
from colucb.lowerbound import theorem4_adversary

T = 2000
base = gaussian_instance(all_shared(3, 4), [0.5, 0.5, 0.4, 0.2])
scale = 2.0 / (60.0 * AlgoConfig.for_structure(base.structure, T).c_G)
pair = theorem4_adversary(base, T, pilot_seeds=5, const_scale=scale)
print(f"z_T = {pair.z_T:.4f}; pilot of {pair.pilot_rounds} rounds, mean pulls {({a: float(v) for a, v in pair.pilot_pulls.items()})}")
print(f"target arm {pair.spec_plus.target_arm} in group {pair.spec_plus.group}, anchor {pair.spec_plus.anchor}")
cfg = AlgoConfig.for_structure(base.structure, T, scale)
for name, inst in (("base", base), ("J+", pair.plus), ("J-", pair.minus)):
    regrets = [run("ColUCB", inst, cfg, seed=s).collaborative_regret() for s in range(5)]
    print(f"{name:5} means {[round(float(m), 4) for m in inst.mu]}  ColUCB regret {sum(regrets) / 5:.1f}")
