"""Evaluators: built-in surrogates and the external-worker wire protocol.

An evaluator turns one :class:`EvaluationRequest` (genome + fidelity +
optional transfer context + seed) into an :class:`EvaluationResult` carrying
a finite reward.  Built-in surrogates are pure functions of the request and
exist for desk-scale testing; real trainers live behind the newline-delimited
JSON protocol spoken over a worker process's stdin/stdout:

    engine -> worker  {"type": "init", "protocol_version": 1, "fidelity": {...}, "run_seed": N}
    engine -> worker  {"type": "evaluate", "id": "...", "seed": N, "genome": {...}, "transfer": {...} | null}
    worker -> engine  {"type": "result", "id": "...", "reward": N, "expert_handle": "..." | null,
                       "metrics": {...}, "wall_seconds": N}
    worker -> engine  {"type": "error", "id": "...", "message": "..."}
    engine -> worker  {"type": "shutdown"}

The genome wire form is {"normal": [[[op, input], [op, input]], ...],
"reduction": [...]} with integer operator codes.
"""

from __future__ import annotations

import json
import math
import queue
import subprocess
import threading
from dataclasses import dataclass, field

import numpy as np

from .arch_metrics import ArchStats, FidelityConfig, arch_stats
from .search_space import CellGenome, Chromosome, Gene, OperatorKind, encode_text

PROTOCOL_VERSION = 1


class EvaluationError(RuntimeError):
    """Base class for everything that can go wrong while evaluating."""


class WorkerTimeoutError(EvaluationError):
    pass


class ProtocolViolationError(EvaluationError):
    pass


class WorkerExitError(EvaluationError):
    pass


class WorkerErrorReply(EvaluationError):
    """The worker answered with an explicit error message."""


class UnknownGenomeError(EvaluationError):
    """Table evaluator has no entry for the requested genome."""


@dataclass(frozen=True)
class TransferContext:
    """Champion handoff applied to every request of the next generation."""

    teacher: str
    expert_handle: str
    expert_pairs: int = 12000
    hyperparams: dict[str, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.expert_pairs < 1:
            raise ValueError("expert_pairs must be >= 1")
        for k, v in self.hyperparams.items():
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"hyperparameter {k} must be positive, got {v}")

    def to_wire(self) -> dict:
        return {"teacher": self.teacher, "expert_handle": self.expert_handle,
                "expert_pairs": self.expert_pairs, "hyperparams": dict(self.hyperparams)}


@dataclass(frozen=True)
class EvaluationRequest:
    chromosome: Chromosome
    fidelity: FidelityConfig
    seed: int
    transfer: TransferContext | None = None

    @property
    def id(self) -> str:
        return self.chromosome.id


@dataclass(frozen=True)
class EvaluationResult:
    id: str
    reward: float
    expert_handle: str | None = None
    metrics: dict[str, float] = field(default_factory=dict)
    wall_seconds: float = 0.0

    def __post_init__(self) -> None:
        if not math.isfinite(self.reward):
            raise ValueError(f"reward must be finite, got {self.reward}")


# ---------------------------------------------------------------------------
# wire helpers

def canonical_json(obj) -> str:
    """Canonical message form: sorted keys, no whitespace."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def genome_to_wire(c: Chromosome) -> dict:
    return {
        "normal": [[[int(g.op), g.input] for g in block] for block in c.normal.blocks],
        "reduction": [[[int(g.op), g.input] for g in block] for block in c.reduction.blocks],
    }


def genome_from_wire(d: dict, chrom_id: str = "c0") -> Chromosome:
    def cell(blocks) -> CellGenome:
        return CellGenome(tuple(
            (Gene(OperatorKind(b[0][0]), int(b[0][1])),
             Gene(OperatorKind(b[1][0]), int(b[1][1])))
            for b in blocks))
    return Chromosome(cell(d["normal"]), cell(d["reduction"]), chrom_id)


def fidelity_to_wire(f: FidelityConfig) -> dict:
    return {"epochs": f.epochs,
            "input": [f.input_hw[0], f.input_hw[1], f.input_channels],
            "cells": f.cells, "blocks": f.blocks,
            "init_channels": f.init_channels,
            "head_output_dim": f.head_output_dim}


def init_message(f: FidelityConfig, run_seed: int) -> dict:
    return {"type": "init", "protocol_version": PROTOCOL_VERSION,
            "fidelity": fidelity_to_wire(f), "run_seed": run_seed}


def evaluate_message(request: EvaluationRequest) -> dict:
    transfer = request.transfer.to_wire() if request.transfer is not None else None
    return {"type": "evaluate", "id": request.id, "seed": request.seed,
            "genome": genome_to_wire(request.chromosome), "transfer": transfer}


def shutdown_message() -> dict:
    return {"type": "shutdown"}


def parse_message(line: str) -> dict:
    try:
        msg = json.loads(line)
    except json.JSONDecodeError as e:
        raise ProtocolViolationError(f"not valid JSON: {e}") from None
    if not isinstance(msg, dict) or "type" not in msg:
        raise ProtocolViolationError(f"message without a type field: {line!r}")
    return msg


# ---------------------------------------------------------------------------
# built-in surrogates

@dataclass(frozen=True)
class SurrogateParams:
    """Constants of the analytic reward stand-in.

    reward = r0 - alpha * |params_m - p_star| - gamma * flops_g
             + delta * (number of distinct operators in the genome),
    plus ``tau`` when a transfer context is present (a deterministic
    stand-in for the warm-start benefit).
    """

    r0: float = 500.0
    alpha: float = 100.0
    p_star: float = 0.9
    gamma: float = 50.0
    delta: float = 5.0
    tau: float = 20.0
    sigma: float = 25.0


def analytic_reward(params_m: float, flops_g: float, n_distinct_ops: int,
                    has_transfer: bool, sp: SurrogateParams = SurrogateParams()) -> float:
    reward = (sp.r0 - sp.alpha * abs(params_m - sp.p_star) - sp.gamma * flops_g
              + sp.delta * n_distinct_ops)
    if has_transfer:
        reward += sp.tau
    return reward


def _surrogate_result(request: EvaluationRequest, reward: float,
                      stats: ArchStats) -> EvaluationResult:
    # synthetic opaque handle so transfer plumbing can be exercised end to end
    return EvaluationResult(
        id=request.id, reward=reward,
        expert_handle=f"surrogate://{request.id}",
        metrics={"params_m": stats.params_m, "flops_g": stats.flops_g},
        wall_seconds=0.0)


class AnalyticSurrogate:
    """Deterministic, seed-independent reward from architecture statistics."""

    def __init__(self, params: SurrogateParams = SurrogateParams()):
        self.params = params

    def evaluate(self, request: EvaluationRequest) -> EvaluationResult:
        stats = arch_stats(request.chromosome, request.fidelity)
        reward = analytic_reward(stats.params_m, stats.flops_g,
                                 len(request.chromosome.distinct_ops()),
                                 request.transfer is not None, self.params)
        return _surrogate_result(request, reward, stats)


class NoisySurrogate:
    """Analytic surrogate plus seeded Gaussian noise (ranking-stability tests)."""

    def __init__(self, sigma: float | None = None,
                 params: SurrogateParams = SurrogateParams()):
        self.params = params
        self.sigma = params.sigma if sigma is None else sigma

    def evaluate(self, request: EvaluationRequest) -> EvaluationResult:
        stats = arch_stats(request.chromosome, request.fidelity)
        reward = analytic_reward(stats.params_m, stats.flops_g,
                                 len(request.chromosome.distinct_ops()),
                                 request.transfer is not None, self.params)
        if self.sigma > 0:
            noise_rng = np.random.Generator(np.random.PCG64(request.seed))
            reward += float(noise_rng.normal(0.0, self.sigma))
        return _surrogate_result(request, reward, stats)


class TableSurrogate:
    """Tabular rewards keyed by the canonical genome text.

    File format: UTF-8 lines of '"<canonical genome text>"<TAB><reward>'.
    """

    def __init__(self, table: dict[str, float]):
        self.table = dict(table)

    @classmethod
    def from_file(cls, path) -> "TableSurrogate":
        table: dict[str, float] = {}
        with open(path, encoding="utf-8") as fh:
            for lineno, raw in enumerate(fh, start=1):
                line = raw.rstrip("\n")
                if not line:
                    continue
                key_part, sep, value_part = line.rpartition("\t")
                if not sep or len(key_part) < 2 or not (
                        key_part.startswith('"') and key_part.endswith('"')):
                    raise ValueError(f"{path}:{lineno}: malformed table line {line!r}")
                table[key_part[1:-1]] = float(value_part)
        return cls(table)

    @staticmethod
    def write_file(path, table: dict[str, float]) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for key, reward in table.items():
                fh.write(f'"{key}"\t{reward}\n')

    def evaluate(self, request: EvaluationRequest) -> EvaluationResult:
        key = encode_text(request.chromosome)
        if key not in self.table:
            raise UnknownGenomeError(f"unknown genome {key!r}")
        stats = arch_stats(request.chromosome, request.fidelity)
        return _surrogate_result(request, self.table[key], stats)


# ---------------------------------------------------------------------------
# external worker client

_EXIT = object()


class WorkerClient:
    """One external worker process; exactly one evaluation in flight."""

    def __init__(self, command: list[str], timeout_s: float = 120.0, cwd=None):
        self.command = list(command)
        self.timeout_s = timeout_s
        self.cwd = cwd
        self.proc: subprocess.Popen | None = None
        self._lines: queue.Queue = queue.Queue()

    def start(self, f: FidelityConfig, run_seed: int) -> None:
        self.proc = subprocess.Popen(
            self.command, cwd=self.cwd, text=True, bufsize=1,
            stdin=subprocess.PIPE, stdout=subprocess.PIPE)
        threading.Thread(target=self._read_loop, daemon=True).start()
        self._send(init_message(f, run_seed))

    def _read_loop(self) -> None:
        assert self.proc is not None and self.proc.stdout is not None
        for line in self.proc.stdout:
            self._lines.put(line)
        self._lines.put(_EXIT)

    def _send(self, msg: dict) -> None:
        if self.proc is None or self.proc.stdin is None:
            raise WorkerExitError("worker is not running")
        try:
            self.proc.stdin.write(canonical_json(msg) + "\n")
            self.proc.stdin.flush()
        except (BrokenPipeError, OSError) as e:
            raise WorkerExitError(f"worker pipe closed: {e}") from None

    def evaluate(self, request: EvaluationRequest) -> EvaluationResult:
        self._send(evaluate_message(request))
        try:
            line = self._lines.get(timeout=self.timeout_s)
        except queue.Empty:
            raise WorkerTimeoutError(
                f"no reply for {request.id} within {self.timeout_s}s") from None
        if line is _EXIT:
            code = self.proc.poll() if self.proc else None
            raise WorkerExitError(f"worker exited (code {code}) awaiting {request.id}")
        msg = parse_message(line)
        if msg["type"] == "error":
            if msg.get("id") != request.id:
                raise ProtocolViolationError(
                    f"error reply for {msg.get('id')!r}, expected {request.id!r}")
            raise WorkerErrorReply(str(msg.get("message", "unspecified worker error")))
        if msg["type"] != "result":
            raise ProtocolViolationError(f"unexpected message type {msg['type']!r}")
        if msg.get("id") != request.id:
            raise ProtocolViolationError(
                f"result for {msg.get('id')!r}, expected {request.id!r}")
        reward = msg.get("reward")
        if not isinstance(reward, (int, float)) or not math.isfinite(reward):
            raise ProtocolViolationError(f"non-finite or missing reward in {msg!r}")
        handle = msg.get("expert_handle")
        if handle is not None and not isinstance(handle, str):
            raise ProtocolViolationError("expert_handle must be a string or null")
        return EvaluationResult(
            id=request.id, reward=float(reward), expert_handle=handle,
            metrics=dict(msg.get("metrics") or {}),
            wall_seconds=float(msg.get("wall_seconds", 0.0)))

    def shutdown(self, grace_s: float = 5.0) -> None:
        if self.proc is None:
            return
        try:
            self._send(shutdown_message())
        except WorkerExitError:
            pass
        try:
            self.proc.wait(timeout=grace_s)
        except subprocess.TimeoutExpired:
            self.proc.kill()
            self.proc.wait()
