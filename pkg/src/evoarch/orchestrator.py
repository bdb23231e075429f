"""The full search loop: initialize, evaluate in parallel, rank, hand off
the champion, vary, repeat; plus run logs, checkpointing, and exports.

Determinism contract: generation and evaluation records are a pure function
of the config (including run_seed), independent of the worker count and of
evaluation completion order.  Two named randomness sources exist per run:
the init/evolution stream (a PCG64 generator whose state is checkpointed)
and the per-individual evaluation seeds, derived statelessly as
hash(run_seed, generation, index).  All variation draws for a generation
happen before any of its evaluations are dispatched, in a fixed order:
tournament shuffles, then per parent pair the crossover draws followed by
the two mutation passes.

Run directory layout: run.jsonl (header + one record per evaluation + one
per generation + a final report record), checkpoint.json (atomic via
rename), report.json, evolution.csv (on export).
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
import queue
import threading
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import moea, transfer
from .arch_metrics import ArchStats, FidelityConfig, arch_stats
from .evaluation import (
    AnalyticSurrogate,
    EvaluationError,
    EvaluationRequest,
    EvaluationResult,
    NoisySurrogate,
    SurrogateParams,
    TableSurrogate,
    TransferContext,
    WorkerClient,
    WorkerExitError,
    canonical_json,
    genome_from_wire,
    genome_to_wire,
)
from .indicators import hypervolume_3d
from .moea import EvolutionParams, ObjectiveVector, RankedIndividual
from .search_space import (
    ALL_OPERATORS,
    Chromosome,
    Lineage,
    OPERATOR_BY_MNEMONIC,
    OperatorKind,
)

PENALTY_REWARD = -1.0e6
CHECKPOINT_VERSION = 1
FAILURE_POLICIES = ("penalize", "retry-once", "abort")
EVALUATOR_KINDS = ("analytic", "noisy", "table", "external")


class ConfigError(ValueError):
    """Invalid configuration; ``violations`` lists every problem found."""

    def __init__(self, violations: list[str]):
        self.violations = violations
        super().__init__("; ".join(violations))


class RunAbortedError(RuntimeError):
    pass


class CheckpointError(RuntimeError):
    pass


@dataclass(frozen=True)
class EvaluatorSpec:
    kind: str = "analytic"
    sigma: float | None = None
    table_path: str | None = None
    command: tuple[str, ...] = ()
    timeout_s: float = 120.0


@dataclass(frozen=True)
class SearchConfig:
    generations: int = 10
    pop_size: int = 10
    evolution: EvolutionParams = field(default_factory=EvolutionParams)
    fidelity: FidelityConfig = field(default_factory=FidelityConfig)
    evaluator: EvaluatorSpec = field(default_factory=EvaluatorSpec)
    surrogate: SurrogateParams = field(default_factory=SurrogateParams)
    workers: int = 4
    otl_enabled: bool = False
    hyperparams: dict[str, float] = field(
        default_factory=lambda: dict(transfer.DEFAULT_HYPERPARAMS))
    decay_factors: dict[str, float] = field(
        default_factory=lambda: dict(transfer.DEFAULT_DECAY_FACTORS))
    expert_pairs: int = 12000
    run_seed: int = 0
    out_dir: str = "runs/search"
    failure_policy: str = "penalize"
    op_subset: tuple[str, ...] | None = None

    def operators(self) -> tuple[OperatorKind, ...]:
        if self.op_subset is None:
            return ALL_OPERATORS
        return tuple(OPERATOR_BY_MNEMONIC[m] for m in self.op_subset)


def stable_hash64(*parts) -> int:
    data = "|".join(str(p) for p in parts).encode()
    return int.from_bytes(hashlib.sha256(data).digest()[:8], "big") & ((1 << 63) - 1)


def evaluation_seed(run_seed: int, generation: int, index: int) -> int:
    return stable_hash64(run_seed, "evaluation", generation, index)


# ---------------------------------------------------------------------------
# config <-> JSON

def config_to_dict(c: SearchConfig) -> dict:
    return {
        "generations": c.generations,
        "pop_size": c.pop_size,
        "evolution": {
            "mutation_prob": c.evolution.mutation_prob,
            "crossover_prob_range": list(c.evolution.crossover_prob_range),
            "survival_prob": c.evolution.survival_prob,
            "tournament_size": c.evolution.tournament_size,
            "beta_m": c.evolution.beta_m,
            "eepi_max_attempts": c.evolution.eepi_max_attempts,
        },
        "fidelity": {
            "input_hw": list(c.fidelity.input_hw),
            "input_channels": c.fidelity.input_channels,
            "cells": c.fidelity.cells,
            "blocks": c.fidelity.blocks,
            "init_channels": c.fidelity.init_channels,
            "epochs": c.fidelity.epochs,
            "head_output_dim": c.fidelity.head_output_dim,
            "inv_expansion": c.fidelity.inv_expansion,
        },
        "evaluator": {
            "kind": c.evaluator.kind,
            "sigma": c.evaluator.sigma,
            "table_path": c.evaluator.table_path,
            "command": list(c.evaluator.command),
            "timeout_s": c.evaluator.timeout_s,
        },
        "surrogate": {
            "r0": c.surrogate.r0, "alpha": c.surrogate.alpha,
            "p_star": c.surrogate.p_star, "gamma": c.surrogate.gamma,
            "delta": c.surrogate.delta, "tau": c.surrogate.tau,
            "sigma": c.surrogate.sigma,
        },
        "workers": c.workers,
        "otl_enabled": c.otl_enabled,
        "hyperparams": dict(c.hyperparams),
        "decay_factors": dict(c.decay_factors),
        "expert_pairs": c.expert_pairs,
        "run_seed": c.run_seed,
        "out_dir": str(c.out_dir),
        "failure_policy": c.failure_policy,
        "op_subset": list(c.op_subset) if c.op_subset is not None else None,
    }


def _take(d: dict, known: dict, section: str, violations: list[str]) -> dict:
    out = {}
    for key, value in d.items():
        if key not in known:
            violations.append(f"unknown key {section}{key!r}")
        else:
            out[key] = value
    return out


_TOP_KEYS = {"generations", "pop_size", "evolution", "fidelity", "evaluator",
             "surrogate", "workers", "otl_enabled", "hyperparams",
             "decay_factors", "expert_pairs", "run_seed", "out_dir",
             "failure_policy", "op_subset"}


def config_from_dict(d: dict) -> SearchConfig:
    """Build a config from a JSON document, collecting every violation."""
    violations: list[str] = []
    d = _take(d, {k: None for k in _TOP_KEYS}, "", violations)

    def build(cls, sub: dict, known: tuple[str, ...], section: str, convert=None):
        sub = _take(sub, {k: None for k in known}, section + ".", violations)
        if convert:
            sub = convert(sub)
        try:
            return cls(**sub)
        except (TypeError, ValueError) as e:
            violations.append(f"{section}: {e}")
            return cls()

    evolution = build(
        EvolutionParams, d.get("evolution", {}),
        ("mutation_prob", "crossover_prob_range", "survival_prob",
         "tournament_size", "beta_m", "eepi_max_attempts"), "evolution",
        convert=lambda s: {**s, **({"crossover_prob_range": tuple(s["crossover_prob_range"])}
                                   if "crossover_prob_range" in s else {})})
    fidelity = build(
        FidelityConfig, d.get("fidelity", {}),
        ("input_hw", "input_channels", "cells", "blocks", "init_channels",
         "epochs", "head_output_dim", "inv_expansion"), "fidelity",
        convert=lambda s: {**s, **({"input_hw": tuple(s["input_hw"])}
                                   if "input_hw" in s else {})})
    evaluator = build(
        EvaluatorSpec, d.get("evaluator", {}),
        ("kind", "sigma", "table_path", "command", "timeout_s"), "evaluator",
        convert=lambda s: {**s, **({"command": tuple(s["command"])}
                                   if "command" in s else {})})
    surrogate = build(
        SurrogateParams, d.get("surrogate", {}),
        ("r0", "alpha", "p_star", "gamma", "delta", "tau", "sigma"), "surrogate")

    op_subset = d.get("op_subset")
    if op_subset is not None:
        unknown = [m for m in op_subset if m not in OPERATOR_BY_MNEMONIC]
        if unknown:
            violations.append(f"op_subset: unknown mnemonics {unknown}")
            op_subset = None
        elif not op_subset:
            violations.append("op_subset: must be non-empty when given")
            op_subset = None
        else:
            op_subset = tuple(op_subset)

    config = SearchConfig(
        generations=int(d.get("generations", 10)),
        pop_size=int(d.get("pop_size", 10)),
        evolution=evolution, fidelity=fidelity, evaluator=evaluator,
        surrogate=surrogate,
        workers=int(d.get("workers", 4)),
        otl_enabled=bool(d.get("otl_enabled", False)),
        hyperparams=dict(d.get("hyperparams", transfer.DEFAULT_HYPERPARAMS)),
        decay_factors=dict(d.get("decay_factors", transfer.DEFAULT_DECAY_FACTORS)),
        expert_pairs=int(d.get("expert_pairs", 12000)),
        run_seed=int(d.get("run_seed", 0)),
        out_dir=str(d.get("out_dir", "runs/search")),
        failure_policy=str(d.get("failure_policy", "penalize")),
        op_subset=op_subset,
    )
    violations.extend(validate_config(config))
    if violations:
        raise ConfigError(violations)
    return config


def validate_config(c: SearchConfig) -> list[str]:
    violations = []
    if c.generations < 1:
        violations.append("generations must be >= 1")
    if c.pop_size < 2:
        violations.append("pop_size must be >= 2")
    if c.workers < 1:
        violations.append("workers must be >= 1")
    if c.failure_policy not in FAILURE_POLICIES:
        violations.append(f"failure_policy must be one of {FAILURE_POLICIES}")
    if c.evaluator.kind not in EVALUATOR_KINDS:
        violations.append(f"evaluator.kind must be one of {EVALUATOR_KINDS}")
    if c.evaluator.kind == "table" and not c.evaluator.table_path:
        violations.append("evaluator.table_path required for the table evaluator")
    if c.evaluator.kind == "external" and not c.evaluator.command:
        violations.append("evaluator.command required for the external evaluator")
    if c.expert_pairs < 1:
        violations.append("expert_pairs must be >= 1")
    for name, mapping in (("hyperparams", c.hyperparams),
                          ("decay_factors", c.decay_factors)):
        for k, v in mapping.items():
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                violations.append(f"{name}.{k} must be a positive number")
    return violations


def config_hash(c: SearchConfig) -> str:
    """Hash of the semantic fields; workers and out_dir are execution
    details a resume may legitimately change."""
    d = config_to_dict(c)
    d.pop("workers")
    d.pop("out_dir")
    return hashlib.sha256(canonical_json(d).encode()).hexdigest()[:16]


# ---------------------------------------------------------------------------
# evaluation dispatch

def _penalty_result(chrom_id: str, cause: str) -> tuple[EvaluationResult, str]:
    return (EvaluationResult(id=chrom_id, reward=PENALTY_REWARD,
                             expert_handle=None, metrics={}, wall_seconds=0.0),
            cause)


class _Dispatcher:
    """Runs up to ``workers`` evaluations concurrently, committing results
    in index order regardless of completion order."""

    def __init__(self, config: SearchConfig):
        self.config = config
        self._evaluator = None
        self._pool: list[WorkerClient] = []

    def _built_in(self):
        spec, c = self.config.evaluator, self.config
        if spec.kind == "analytic":
            return AnalyticSurrogate(c.surrogate)
        if spec.kind == "noisy":
            return NoisySurrogate(spec.sigma, c.surrogate)
        if spec.kind == "table":
            return TableSurrogate.from_file(spec.table_path)
        raise AssertionError(spec.kind)

    def _spawn_worker(self) -> WorkerClient:
        client = WorkerClient(list(self.config.evaluator.command),
                              timeout_s=self.config.evaluator.timeout_s)
        client.start(self.config.fidelity, self.config.run_seed)
        return client

    def evaluate_all(self, requests: list[EvaluationRequest]
                     ) -> list[tuple[EvaluationResult, str | None]]:
        if self.config.evaluator.kind == "external":
            return self._run_external(requests)
        if self._evaluator is None:
            self._evaluator = self._built_in()
        return self._run_built_in(requests)

    def _guard(self, fn, request) -> tuple[EvaluationResult, str | None]:
        policy = self.config.failure_policy
        try:
            return fn(request), None
        except EvaluationError as first:
            if policy == "abort":
                raise RunAbortedError(f"evaluation {request.id} failed: {first}") from first
            if policy == "retry-once":
                try:
                    return fn(request), None
                except EvaluationError as second:
                    return _penalty_result(request.id, f"{first}; retry: {second}")
            return _penalty_result(request.id, str(first))

    def _run_built_in(self, requests):
        results: list = [None] * len(requests)
        if self.config.workers == 1 or len(requests) == 1:
            for i, req in enumerate(requests):
                results[i] = self._guard(self._evaluator.evaluate, req)
            return results
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=self.config.workers) as pool:
            futures = [pool.submit(self._guard, self._evaluator.evaluate, req)
                       for req in requests]
            for i, fut in enumerate(futures):
                results[i] = fut.result()
        return results

    def _run_external(self, requests):
        n_workers = min(self.config.workers, len(requests))
        while len(self._pool) < n_workers:
            self._pool.append(self._spawn_worker())

        results: list = [None] * len(requests)
        tasks: queue.Queue = queue.Queue()
        for item in enumerate(requests):
            tasks.put(item)
        errors: list[BaseException] = []

        def drain(client_index: int) -> None:
            while True:
                try:
                    i, req = tasks.get_nowait()
                except queue.Empty:
                    return
                try:
                    results[i] = self._evaluate_on(client_index, req)
                except BaseException as e:  # noqa: BLE001 - surfaced below
                    errors.append(e)
                    return

        threads = [threading.Thread(target=drain, args=(w,))
                   for w in range(len(self._pool))]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        if errors:
            raise errors[0]
        return results

    def _evaluate_on(self, client_index: int, request: EvaluationRequest):
        policy = self.config.failure_policy

        def attempt():
            try:
                return self._pool[client_index].evaluate(request), None
            except WorkerExitError:
                # dead worker: replace it so later requests are not doomed
                self._pool[client_index] = self._spawn_worker()
                raise

        try:
            return attempt()
        except EvaluationError as first:
            if policy == "abort":
                raise RunAbortedError(f"evaluation {request.id} failed: {first}") from first
            if policy == "retry-once":
                try:
                    return attempt()
                except EvaluationError as second:
                    return _penalty_result(request.id, f"{first}; retry: {second}")
            return _penalty_result(request.id, str(first))

    def close(self) -> None:
        for client in self._pool:
            client.shutdown()
        self._pool.clear()


# ---------------------------------------------------------------------------
# run state and files

@dataclass
class _ArchiveEntry:
    id: str
    generation: int
    reward: float
    params_m: float
    flops_g: float


@dataclass
class _RunState:
    config: SearchConfig
    rng: np.random.Generator
    population: list[Chromosome]
    next_generation: int
    hyper: transfer.HyperparamRecord
    transfer_ctx: TransferContext | None
    archive: list[_ArchiveEntry]
    best_score: tuple[float, str, int] | None  # (score, id, generation)
    complete: bool = False


def _out_paths(out_dir) -> dict[str, Path]:
    base = Path(out_dir)
    return {"dir": base, "log": base / "run.jsonl",
            "checkpoint": base / "checkpoint.json",
            "report": base / "report.json"}


def _hv_reference(c: SearchConfig) -> tuple[float, float, float]:
    beta = c.evolution.beta_m
    return (0.0, beta, 2.0 * beta)


def _append_record(log_path: Path, record: dict) -> None:
    with open(log_path, "a", encoding="utf-8") as fh:
        fh.write(json.dumps(record, sort_keys=True) + "\n")


def _write_checkpoint(paths: dict, state: _RunState) -> None:
    doc = {
        "record": "checkpoint",
        "version": CHECKPOINT_VERSION,
        "config": config_to_dict(state.config),
        "config_hash": config_hash(state.config),
        "next_generation": state.next_generation,
        "complete": state.complete,
        "population": [
            {"id": c.id, "genome": genome_to_wire(c),
             "lineage": {"genesis": c.lineage.genesis, "parents": list(c.lineage.parents)}
             if c.lineage else None}
            for c in state.population],
        "rng_state": state.rng.bit_generator.state,
        "hyperparams": {"generation": state.hyper.generation,
                        "values": state.hyper.values,
                        "decay_factors": state.hyper.decay_factors,
                        "base_values": state.hyper.base()},
        "transfer": state.transfer_ctx.to_wire() if state.transfer_ctx else None,
        "archive": [[e.id, e.generation, e.reward, e.params_m, e.flops_g]
                    for e in state.archive],
        "best_score": list(state.best_score) if state.best_score else None,
    }
    tmp = paths["checkpoint"].with_suffix(".json.tmp")
    tmp.write_text(json.dumps(doc, sort_keys=True), encoding="utf-8")
    os.replace(tmp, paths["checkpoint"])


def _load_checkpoint(out_dir) -> _RunState:
    paths = _out_paths(out_dir)
    if not paths["checkpoint"].exists():
        raise CheckpointError(f"no checkpoint in {out_dir}")
    try:
        doc = json.loads(paths["checkpoint"].read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise CheckpointError(f"corrupt checkpoint: {e}") from None
    if doc.get("version") != CHECKPOINT_VERSION:
        raise CheckpointError(
            f"checkpoint version {doc.get('version')} != {CHECKPOINT_VERSION}")
    try:
        config = config_from_dict(doc["config"])
    except ConfigError as e:
        raise CheckpointError(f"checkpoint config invalid: {e}") from None
    stored_hash = doc.get("config_hash")
    if config_hash(config) != stored_hash:
        raise CheckpointError(
            f"config hash mismatch: checkpoint says {stored_hash}, "
            f"stored config hashes to {config_hash(config)}")
    header = _read_header(paths["log"])
    if header is not None and header.get("config_hash") != stored_hash:
        raise CheckpointError(
            f"config hash mismatch: run log header says "
            f"{header.get('config_hash')}, checkpoint says {stored_hash}")

    rng = np.random.Generator(np.random.PCG64())
    rng.bit_generator.state = doc["rng_state"]
    population = []
    for entry in doc["population"]:
        lineage = None
        if entry.get("lineage"):
            lineage = Lineage(entry["lineage"]["genesis"],
                              tuple(entry["lineage"]["parents"]))
        chrom = genome_from_wire(entry["genome"], entry["id"])
        population.append(Chromosome(chrom.normal, chrom.reduction, entry["id"], lineage))
    hp = doc["hyperparams"]
    ctx = None
    if doc.get("transfer"):
        t = doc["transfer"]
        ctx = TransferContext(teacher=t["teacher"], expert_handle=t["expert_handle"],
                              expert_pairs=t["expert_pairs"],
                              hyperparams=dict(t["hyperparams"]))
    return _RunState(
        config=config, rng=rng, population=population,
        next_generation=int(doc["next_generation"]),
        hyper=transfer.HyperparamRecord(hp["generation"], dict(hp["values"]),
                                        dict(hp["decay_factors"]),
                                        dict(hp.get("base_values") or hp["values"])),
        transfer_ctx=ctx,
        archive=[_ArchiveEntry(*row) for row in doc["archive"]],
        best_score=tuple(doc["best_score"]) if doc.get("best_score") else None,
        complete=bool(doc.get("complete", False)),
    )


def _read_header(log_path: Path) -> dict | None:
    if not log_path.exists():
        return None
    with open(log_path, encoding="utf-8") as fh:
        first = fh.readline()
    return json.loads(first) if first.strip() else None


def read_log(out_dir) -> list[dict]:
    paths = _out_paths(out_dir)
    if not paths["log"].exists():
        return []
    with open(paths["log"], encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


def _truncate_log(paths: dict, next_generation: int) -> None:
    """Drop records of generations >= next_generation (partial work written
    after the last checkpoint) so a resumed log matches an uninterrupted one."""
    if not paths["log"].exists():
        return
    kept = []
    for record in read_log(paths["dir"]):
        kind = record.get("record")
        if kind in ("evaluation", "generation") and record["generation"] >= next_generation:
            continue
        if kind == "report":
            continue
        kept.append(record)
    tmp = paths["log"].with_suffix(".jsonl.tmp")
    with open(tmp, "w", encoding="utf-8") as fh:
        for record in kept:
            fh.write(json.dumps(record, sort_keys=True) + "\n")
    os.replace(tmp, paths["log"])


# ---------------------------------------------------------------------------
# the search itself

def _make_requests(state: _RunState, generation: int) -> list[EvaluationRequest]:
    ctx = state.transfer_ctx if generation > 0 else None
    return [EvaluationRequest(
                chromosome=chrom, fidelity=state.config.fidelity,
                seed=evaluation_seed(state.config.run_seed, generation, i),
                transfer=ctx)
            for i, chrom in enumerate(state.population)]


def _next_population(state: _RunState, ranked: list[RankedIndividual],
                     generation: int) -> list[Chromosome]:
    config = state.config
    by_id = {c.id: c for c in state.population}
    survivor_ids = moea.survive(ranked, config.pop_size, config.evolution)
    nxt = generation + 1
    new_pop: list[Chromosome] = [
        by_id[sid].with_identity(f"{nxt}_{j}", Lineage("survivor", (sid,)))
        for j, sid in enumerate(survivor_ids)]

    needed = config.pop_size - len(new_pop)
    if needed <= 0:
        return new_pop[:config.pop_size]
    n_parents = 2 * ((needed + 1) // 2)
    parent_ids = moea.tournament_select(ranked, n_parents, state.rng, config.evolution)
    ops = config.operators()
    child_index = len(new_pop)
    for a, b in zip(parent_ids[0::2], parent_ids[1::2]):
        p1, p2 = by_id[a], by_id[b]
        kids = moea.crossover(p1, p2, state.rng, config.evolution)
        for kid in kids:
            if child_index >= config.pop_size:
                break
            mutated = moea.mutate(kid, state.rng, config.evolution, ops,
                                  new_id=f"{nxt}_{child_index}")
            new_pop.append(Chromosome(mutated.normal, mutated.reduction,
                                      mutated.id, Lineage("mutation", (a, b))))
            child_index += 1
    return new_pop


def _percentiles(rewards: list[float]) -> dict[str, float]:
    arr = np.asarray(rewards, dtype=float)
    p25, p50, p75 = np.percentile(arr, [25, 50, 75], method="linear")
    return {"reward_p25": float(p25), "reward_median": float(p50),
            "reward_p75": float(p75), "reward_max": float(arr.max())}


def _archive_front(archive: list[_ArchiveEntry]) -> list[_ArchiveEntry]:
    if not archive:
        return []
    vectors = [ObjectiveVector(e.reward, e.params_m, e.flops_g) for e in archive]
    fronts = moea.non_dominated_sort(vectors)
    front = [archive[i] for i in fronts[0]]
    front.sort(key=lambda e: (-e.reward, e.params_m, e.id))
    return front


def _run_one_generation(state: _RunState, dispatcher: _Dispatcher,
                        paths: dict, generation: int) -> None:
    config = state.config
    requests = _make_requests(state, generation)
    stats: list[ArchStats] = [arch_stats(c, config.fidelity) for c in state.population]
    outcomes = dispatcher.evaluate_all(requests)
    results = [r for r, _ in outcomes]
    failures = [cause for _, cause in outcomes]

    objectives = [ObjectiveVector(res.reward, st.params_m, st.flops_g)
                  for res, st in zip(results, stats)]
    fronts = moea.non_dominated_sort(objectives)
    front_of = {}
    crowding_of = {}
    for front_index, members in enumerate(fronts):
        dists = moea.crowding_distance([objectives[i] for i in members])
        for i, dist in zip(members, dists):
            front_of[i] = front_index
            crowding_of[i] = dist
    normalized, scores = moea.normalize_objectives(objectives)
    ranked = [RankedIndividual(state.population[i].id, objectives[i],
                               front_of[i], crowding_of[i])
              for i in range(len(state.population))]

    champion_id = transfer.select_champion(list(zip(results, stats)))
    champion_result = next(r for r in results if r.id == champion_id)
    survivor_ids = moea.survive(ranked, config.pop_size, config.evolution)

    for i, chrom in enumerate(state.population):
        state.archive.append(_ArchiveEntry(
            chrom.id, generation, results[i].reward,
            stats[i].params_m, stats[i].flops_g))
        score = scores[i]
        if state.best_score is None or (score, chrom.id) < (state.best_score[0],
                                                            state.best_score[1]):
            state.best_score = (score, chrom.id, generation)

    hv = hypervolume_3d(
        [(-e.reward, e.params_m, e.flops_g) for e in state.archive],
        _hv_reference(config))

    for i, chrom in enumerate(state.population):
        _append_record(paths["log"], {
            "record": "evaluation", "generation": generation, "index": i,
            "id": chrom.id, "genome": genome_to_wire(chrom),
            "lineage": {"genesis": chrom.lineage.genesis,
                        "parents": list(chrom.lineage.parents)}
                       if chrom.lineage else None,
            "seed": requests[i].seed,
            "transfer": requests[i].transfer.to_wire() if requests[i].transfer else None,
            "reward": results[i].reward,
            "params_m": stats[i].params_m, "flops_g": stats[i].flops_g,
            "front": front_of[i], "crowding": crowding_of[i],
            "normalized": list(normalized[i]), "score": scores[i],
            "expert_handle": results[i].expert_handle,
            "metrics": results[i].metrics,
            "wall_seconds": results[i].wall_seconds,
            "failure": failures[i],
        })
    _append_record(paths["log"], {
        "record": "generation", "generation": generation,
        "pop_size": len(state.population),
        "champion": champion_id, "survivors": survivor_ids,
        "front0_size": len(fronts[0]),
        "hypervolume": hv,
        "wall_seconds": sum(r.wall_seconds for r in results),
        **_percentiles([r.reward for r in results]),
    })

    # prepare the next generation (or mark completion)
    if generation + 1 < config.generations:
        state.population = _next_population(state, ranked, generation)
        state.hyper = transfer.decay_hyperparams(state.hyper)
        if config.otl_enabled:
            state.transfer_ctx = transfer.make_transfer_context(
                champion_result, state.hyper, config.expert_pairs)
        else:
            state.transfer_ctx = None
        state.next_generation = generation + 1
    else:
        state.next_generation = config.generations
        state.complete = True
    _write_checkpoint(paths, state)


def _final_report(state: _RunState, paths: dict) -> dict:
    archive = state.archive
    front = _archive_front(archive)
    best = min(archive, key=lambda e: (-e.reward, e.params_m, e.id))
    report = {
        "generations": state.config.generations,
        "evaluations": len(archive),
        **_percentiles([e.reward for e in archive]),
        "pareto_front": [
            {"id": e.id, "generation": e.generation, "reward": e.reward,
             "params_m": e.params_m, "flops_g": e.flops_g}
            for e in front],
        "best_by_reward": {"id": best.id, "generation": best.generation,
                           "reward": best.reward, "params_m": best.params_m,
                           "flops_g": best.flops_g},
        "best_by_score": {"id": state.best_score[1], "score": state.best_score[0],
                          "generation": state.best_score[2]}
                         if state.best_score else None,
    }
    _append_record(paths["log"], {"record": "report", **report})
    paths["report"].write_text(json.dumps(report, indent=2, sort_keys=True),
                               encoding="utf-8")
    return report


def _drive(state: _RunState, paths: dict, stop_after: int | None) -> dict:
    dispatcher = _Dispatcher(state.config)
    try:
        for generation in range(state.next_generation, state.config.generations):
            if stop_after is not None and generation >= stop_after:
                return {"status": "stopped", "next_generation": generation}
            _run_one_generation(state, dispatcher, paths, generation)
    finally:
        dispatcher.close()
    report = _final_report(state, paths)
    report["status"] = "complete"
    return report


def run(config: SearchConfig, stop_after: int | None = None) -> dict:
    """Execute a fresh search; returns the final report dict.

    ``stop_after`` halts cleanly once that many generations are recorded
    (checkpoint in place), mainly for interrupt/resume testing.
    """
    violations = validate_config(config)
    if violations:
        raise ConfigError(violations)
    paths = _out_paths(config.out_dir)
    paths["dir"].mkdir(parents=True, exist_ok=True)
    if paths["log"].exists():
        paths["log"].unlink()

    _append_record(paths["log"], {
        "record": "header", "version": CHECKPOINT_VERSION,
        "config": config_to_dict(config), "config_hash": config_hash(config),
        "hv_reference": list(_hv_reference(config)),
    })
    rng = np.random.Generator(np.random.PCG64(
        stable_hash64(config.run_seed, "init-evolution")))
    population = moea.eepi_init(
        config.pop_size, config.fidelity, config.evolution, rng,
        config.operators(), make_id=lambda i: f"0_{i}")
    state = _RunState(
        config=config, rng=rng, population=population, next_generation=0,
        hyper=transfer.HyperparamRecord(0, dict(config.hyperparams),
                                        dict(config.decay_factors)),
        transfer_ctx=None, archive=[], best_score=None)
    _write_checkpoint(paths, state)
    return _drive(state, paths, stop_after)


def resume(out_dir, stop_after: int | None = None) -> dict:
    """Continue an interrupted run from its checkpoint; the completed log
    is byte-identical to an uninterrupted run's."""
    state = _load_checkpoint(out_dir)
    paths = _out_paths(out_dir)
    if state.complete:
        report = json.loads(paths["report"].read_text(encoding="utf-8")) \
            if paths["report"].exists() else _final_report(state, paths)
        report["status"] = "already-complete"
        return report
    _truncate_log(paths, state.next_generation)
    return _drive(state, paths, stop_after)


# ---------------------------------------------------------------------------
# exports and reporting

CSV_COLUMNS = ("generation", "normalized_generation", "id", "reward",
               "params_m", "flops_g", "front", "crowding")


def export_evolution_csv(out_dir, csv_path=None) -> str:
    """One row per evaluation; normalized_generation spans [0, 1]."""
    records = read_log(out_dir)
    if not records or records[0].get("record") != "header":
        raise ValueError(f"no run log in {out_dir}")
    generations = records[0]["config"]["generations"]
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(CSV_COLUMNS)
    for rec in records:
        if rec.get("record") != "evaluation":
            continue
        g = rec["generation"]
        norm = 0.0 if generations == 1 else g / (generations - 1)
        writer.writerow([g, norm, rec["id"], rec["reward"], rec["params_m"],
                         rec["flops_g"], rec["front"], rec["crowding"]])
    text = buf.getvalue()
    if csv_path is not None:
        Path(csv_path).write_text(text, encoding="utf-8")
    return text


def run_report(out_dir, top: int | None = None) -> dict:
    """Reward statistics and the archive Pareto front, recomputed from the
    raw evaluation records."""
    records = read_log(out_dir)
    evals = [r for r in records if r.get("record") == "evaluation"]
    if not evals:
        raise ValueError(f"no generations found in {out_dir}")
    archive = [_ArchiveEntry(r["id"], r["generation"], r["reward"],
                             r["params_m"], r["flops_g"]) for r in evals]
    front = _archive_front(archive)
    if top is not None:
        front = front[:top]
    best = min(archive, key=lambda e: (-e.reward, e.params_m, e.id))
    return {
        "evaluations": len(archive),
        **_percentiles([e.reward for e in archive]),
        "pareto_front": [{"id": e.id, "generation": e.generation,
                          "reward": e.reward, "params_m": e.params_m,
                          "flops_g": e.flops_g} for e in front],
        "best_by_reward": {"id": best.id, "generation": best.generation,
                           "reward": best.reward, "params_m": best.params_m,
                           "flops_g": best.flops_g},
    }
