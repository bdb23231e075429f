"""NSGA-II mechanics on synthetic objectives: fronts, crowding, selection."""

import numpy as np

from evoarch import (
    EvolutionParams,
    ObjectiveVector,
    RankedIndividual,
    crowding_distance,
    non_dominated_sort,
    normalize_objectives,
    survive,
    tournament_select,
)

rng = np.random.default_rng(4)
objs = [ObjectiveVector(reward=float(r), params_m=float(p), flops_g=float(f))
        for r, p, f in rng.random((12, 3)) * np.array([100, 2, 1])]

fronts = non_dominated_sort(objs)
print("== fronts (minimizing -reward, params, flops) ==")
for k, front in enumerate(fronts):
    print(f"front {k}: {front}")

ranked = []
for k, front in enumerate(fronts):
    dists = crowding_distance([objs[i] for i in front])
    for i, d in zip(front, dists):
        ranked.append(RankedIndividual(f"i{i:02d}", objs[i], k, d))
ranked.sort(key=lambda r: r.id)

print("\n== crowding inside front 0 ==")
for r in ranked:
    if r.front == 0:
        print(f"{r.id}: reward={r.objectives.reward:6.2f} "
              f"params={r.objectives.params_m:.3f} crowding={r.crowding}")

print("\n== normalized scores (reporting only) ==")
_, scores = normalize_objectives(objs)
best = int(np.argmin(scores))
print(f"best scalarized individual: i{best:02d} score={scores[best]:.3f}")

print("\n== tournament selection, 200 draws ==")
params = EvolutionParams()
picks = tournament_select(ranked, 200, rng, params)
counts = {i: picks.count(i) for i in sorted(set(picks))}
for ind, n in counts.items():
    print(f"{ind}: selected {n} times")

print("\n== survivors ==")
print(survive(ranked, len(ranked), params))
