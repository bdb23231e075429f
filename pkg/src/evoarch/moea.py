"""NSGA-II ranking and the genetic operators driving the search.

Objectives are always compared in minimization form: (-reward, params_m,
flops_g).  Vector x dominates y when x is <= y in every minimized
coordinate and < in at least one.  All comparators are made total by
breaking ties on ascending individual id, so runs are reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .arch_metrics import FidelityConfig, arch_stats
from .search_space import (
    ALL_OPERATORS,
    CellGenome,
    Chromosome,
    Lineage,
    OperatorKind,
    random_chromosome,
)


@dataclass(frozen=True)
class ObjectiveVector:
    """One evaluated individual's objectives; reward is higher-better."""

    reward: float
    params_m: float
    flops_g: float

    def minimized(self) -> tuple[float, float, float]:
        return (-self.reward, self.params_m, self.flops_g)

    def is_finite(self) -> bool:
        return all(math.isfinite(v) for v in (self.reward, self.params_m, self.flops_g))


@dataclass(frozen=True)
class RankedIndividual:
    id: str
    objectives: ObjectiveVector
    front: int
    crowding: float


@dataclass(frozen=True)
class EvolutionParams:
    """Genetic-operator settings."""

    mutation_prob: float = 0.1
    crossover_prob_range: tuple[float, float] = (0.5, 0.9)
    survival_prob: float = 0.2
    tournament_size: int = 2
    beta_m: float = 5.0
    eepi_max_attempts: int = 1000

    def __post_init__(self) -> None:
        for name in ("mutation_prob", "survival_prob"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {v}")
        lo, hi = self.crossover_prob_range
        if not (0.0 <= lo <= hi <= 1.0):
            raise ValueError(f"crossover_prob_range must be a sub-interval of [0, 1]")
        if self.beta_m <= 0:
            raise ValueError("beta_m must be positive")
        if self.tournament_size < 1 or self.eepi_max_attempts < 1:
            raise ValueError("tournament_size and eepi_max_attempts must be >= 1")


class EepiUnsatisfiableError(RuntimeError):
    """Raised when rejection sampling cannot meet the parameter threshold."""

    def __init__(self, beta_m: float, smallest_seen: float, attempts: int):
        self.beta_m = beta_m
        self.smallest_seen = smallest_seen
        super().__init__(
            f"could not sample an architecture with params_m <= {beta_m} in "
            f"{attempts} attempts; smallest params_m seen was {smallest_seen:.6f}")


def _minimized_matrix(objectives: Sequence[ObjectiveVector]) -> np.ndarray:
    pts = np.array([o.minimized() for o in objectives], dtype=float)
    if pts.size and not np.all(np.isfinite(pts)):
        raise ValueError("objectives must be finite")
    return pts


def non_dominated_sort(objectives: Sequence[ObjectiveVector]) -> list[list[int]]:
    """Partition indices into Pareto fronts (front 0 = non-dominated set).

    Uses the domination-count bookkeeping of the fast non-dominated sort,
    vectorized over a pairwise dominance matrix.
    """
    n = len(objectives)
    if n == 0:
        return []
    pts = _minimized_matrix(objectives)
    le = np.all(pts[:, None, :] <= pts[None, :, :], axis=2)
    lt = np.any(pts[:, None, :] < pts[None, :, :], axis=2)
    dominates = le & lt  # dominates[i, j]: i dominates j
    dom_count = dominates.sum(axis=0).astype(int)

    fronts: list[list[int]] = []
    assigned = np.zeros(n, dtype=bool)
    current = np.flatnonzero((dom_count == 0) & ~assigned)
    while current.size:
        fronts.append([int(i) for i in current])
        assigned[current] = True
        dom_count -= dominates[current].sum(axis=0)
        current = np.flatnonzero((dom_count == 0) & ~assigned)
    return fronts


def crowding_distance(front_objectives: Sequence[ObjectiveVector]) -> list[float]:
    """NSGA-II crowding distance within one front.

    Fronts of size <= 2 are all extremes and get +inf.  For each objective
    with max > min, the sorted boundary members get +inf and interior
    members accumulate (next - prev) / (max - min); degenerate objectives
    (max == min) contribute nothing.
    """
    n = len(front_objectives)
    if n == 0:
        raise ValueError("front must be non-empty")
    if n <= 2:
        return [math.inf] * n
    pts = _minimized_matrix(front_objectives)
    dist = np.zeros(n)
    for d in range(pts.shape[1]):
        vals = pts[:, d]
        span = vals.max() - vals.min()
        if span == 0:
            continue
        order = np.argsort(vals, kind="stable")
        dist[order[0]] = dist[order[-1]] = math.inf
        interior = order[1:-1]
        dist[interior] += (vals[order[2:]] - vals[order[:-2]]) / span
    return [float(v) for v in dist]


def _rank_key(ind: RankedIndividual) -> tuple[int, float, str]:
    # front ascending, crowding descending, id ascending
    return (ind.front, -ind.crowding, ind.id)


def tournament_select(ranked: Sequence[RankedIndividual], n_parents: int,
                      rng: np.random.Generator,
                      params: EvolutionParams) -> list[str]:
    """Pareto-front tournament selection.

    Each pass shuffles the population and partitions it into subsets of
    ``tournament_size`` (the last subset may be smaller); each subset's
    winner is its best by (front, crowding, id).  Fresh passes run until
    ``n_parents`` winners are collected.
    """
    if not ranked:
        raise ValueError("ranked population must be non-empty")
    size = params.tournament_size
    winners: list[str] = []
    while len(winners) < n_parents:
        perm = rng.permutation(len(ranked))
        for start in range(0, len(perm), size):
            subset = perm[start:start + size]
            best = min(subset, key=lambda i: _rank_key(ranked[i]))
            winners.append(ranked[best].id)
            if len(winners) == n_parents:
                break
    return winners


def _splice(a: CellGenome, b: CellGenome, cut: int) -> CellGenome:
    return CellGenome(a.blocks[:cut] + b.blocks[cut:])


def crossover(p1: Chromosome, p2: Chromosome, rng: np.random.Generator,
              params: EvolutionParams,
              child_ids: tuple[str, str] | None = None) -> tuple[Chromosome, Chromosome]:
    """One-point crossover at a block boundary, independently per cell.

    The crossover probability is drawn uniformly from
    ``crossover_prob_range``; when the event does not fire (or there is
    only one block, leaving no interior boundary) the children are clones.
    Draw order: p_c, gate, then normal cut and reduction cut when firing.
    """
    blocks = len(p1.normal.blocks)
    if len(p2.normal.blocks) != blocks or len(p1.reduction.blocks) != len(p2.reduction.blocks):
        raise ValueError("parents must have matching block counts")
    if child_ids is None:
        child_ids = (f"{p1.id}x{p2.id}.a", f"{p1.id}x{p2.id}.b")
    lineage = Lineage("crossover", (p1.id, p2.id))

    lo, hi = params.crossover_prob_range
    p_c = float(rng.uniform(lo, hi))
    fire = bool(rng.random() < p_c)
    if fire and blocks >= 2:
        cut_n = 1 + int(rng.integers(blocks - 1))
        cut_r = 1 + int(rng.integers(blocks - 1))
        n1, n2 = _splice(p1.normal, p2.normal, cut_n), _splice(p2.normal, p1.normal, cut_n)
        r1, r2 = _splice(p1.reduction, p2.reduction, cut_r), _splice(p2.reduction, p1.reduction, cut_r)
    else:
        n1, n2, r1, r2 = p1.normal, p2.normal, p1.reduction, p2.reduction
    return (Chromosome(n1, r1, child_ids[0], lineage),
            Chromosome(n2, r2, child_ids[1], lineage))


def mutate(c: Chromosome, rng: np.random.Generator, params: EvolutionParams,
           ops: tuple[OperatorKind, ...] = ALL_OPERATORS,
           new_id: str | None = None) -> Chromosome:
    """Per-gene mutation.

    Walks genes in (normal then reduction, block-major, slot) order; each
    gene independently mutates with ``mutation_prob``.  A triggered gene
    flips a fair coin to pick the field: the operator resamples uniformly
    among the other allowed operators, the input resamples uniformly over
    its positional range excluding the current value.  Fields with no
    alternative value are left unchanged without consuming a draw.
    """
    if new_id is None:
        new_id = f"{c.id}.m"
    cells = []
    for cell in (c.normal, c.reduction):
        new_blocks = []
        for k, block in enumerate(cell.blocks):
            pair = []
            for gene in block:
                op, inp = gene.op, gene.input
                if rng.random() < params.mutation_prob:
                    if int(rng.integers(2)) == 0:
                        alts = [o for o in ops if o != op]
                        if alts:
                            op = alts[int(rng.integers(len(alts)))]
                    else:
                        choices = [v for v in range(k + 2) if v != inp]
                        if choices:
                            inp = choices[int(rng.integers(len(choices)))]
                pair.append(type(gene)(op, inp))
            new_blocks.append((pair[0], pair[1]))
        cells.append(CellGenome(tuple(new_blocks)))
    return Chromosome(cells[0], cells[1], new_id, Lineage("mutation", (c.id,)))


def eepi_init(pop_size: int, f: FidelityConfig, params: EvolutionParams,
              rng: np.random.Generator,
              ops: tuple[OperatorKind, ...] = ALL_OPERATORS,
              make_id: Callable[[int], str] | None = None) -> list[Chromosome]:
    """Early-exit initialization: rejection-sample until every individual
    decodes below the ``beta_m`` parameter threshold (in millions)."""
    if pop_size < 1:
        raise ValueError("pop_size must be >= 1")
    if make_id is None:
        make_id = lambda i: f"0_{i}"
    population: list[Chromosome] = []
    smallest = math.inf
    for i in range(pop_size):
        for attempt in range(params.eepi_max_attempts):
            candidate = random_chromosome(f.blocks, rng, ops, chrom_id=make_id(i))
            params_m = arch_stats(candidate, f).params_m
            smallest = min(smallest, params_m)
            if params_m <= params.beta_m:
                population.append(candidate)
                break
        else:
            raise EepiUnsatisfiableError(params.beta_m, smallest,
                                         params.eepi_max_attempts)
    return population


def normalize_objectives(
        objectives: Sequence[ObjectiveVector]) -> tuple[list[tuple[float, float, float]], list[float]]:
    """Per-generation min-max normalization of the minimized objectives.

    Returns (normalized vectors in [0,1]^3, scalarized scores).  The score
    is the equal-weight mean of the normalized minimized values (lower is
    better); a degenerate objective (max == min) normalizes to 0.5.  Used
    for reporting and final tie-breaks only, never for NSGA-II ranking.
    """
    if not objectives:
        raise ValueError("need at least one objective vector")
    pts = _minimized_matrix(objectives)
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    span = hi - lo
    normalized = np.where(span == 0, 0.5, (pts - lo) / np.where(span == 0, 1.0, span))
    scores = normalized.mean(axis=1)
    return ([tuple(float(v) for v in row) for row in normalized],
            [float(s) for s in scores])


def best_by_reward(ranked: Sequence[RankedIndividual]) -> RankedIndividual:
    """Max raw reward, ties broken by smaller params_m then ascending id."""
    return min(ranked, key=lambda r: (-r.objectives.reward, r.objectives.params_m, r.id))


def survive(ranked: Sequence[RankedIndividual], pop_size: int,
            params: EvolutionParams) -> list[str]:
    """Survivor ids: clamp(round(survival_prob * pop_size), 1, 4) many,
    ordered by (front, crowding, id).

    The generation's best-by-reward individual always survives (it is the
    transfer teacher and rides into the next generation unchanged); when
    the comparator alone would drop it, it replaces the last slot.
    """
    n = max(1, min(4, int(params.survival_prob * pop_size + 0.5)))
    n = min(n, len(ranked))
    order = sorted(ranked, key=_rank_key)
    chosen = [ind.id for ind in order[:n]]
    champion = best_by_reward(ranked).id
    if champion not in chosen:
        chosen[-1] = champion
    return chosen
