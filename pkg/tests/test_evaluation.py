import json
import math
import sys
from pathlib import Path

import numpy as np
import pytest

from evoarch.arch_metrics import FidelityConfig, arch_stats
from evoarch.evaluation import (
    AnalyticSurrogate,
    EvaluationRequest,
    EvaluationResult,
    NoisySurrogate,
    ProtocolViolationError,
    SurrogateParams,
    TableSurrogate,
    TransferContext,
    UnknownGenomeError,
    WorkerClient,
    WorkerErrorReply,
    WorkerExitError,
    WorkerTimeoutError,
    analytic_reward,
    canonical_json,
    evaluate_message,
    fidelity_to_wire,
    genome_from_wire,
    genome_to_wire,
    init_message,
    parse_message,
    shutdown_message,
)
from evoarch.search_space import encode_text, random_chromosome

FIXTURES = Path(__file__).parent / "fixtures"


def fixture_cmd(name):
    return [sys.executable, str(FIXTURES / f"{name}.py")]


def make_request(seed=0, transfer=None, chrom_seed=0, fidelity=None):
    c = random_chromosome(4, np.random.default_rng(chrom_seed), chrom_id=f"0_{seed}")
    return EvaluationRequest(chromosome=c, fidelity=fidelity or FidelityConfig(),
                             seed=seed, transfer=transfer)


SAMPLE_TRANSFER = TransferContext(
    teacher="0_1", expert_handle="surrogate://0_1", expert_pairs=12000,
    hyperparams={"lr": 3e-4, "ppo_clip": 0.2, "entropy": 0.01})


# ---------------------------------------------------------------------------
# analytic surrogate

def test_analytic_reward_spot_value():
    # params at the sweet spot, no flops, one distinct op, no transfer:
    # 500 - 100*|0.9 - 0.9| - 50*0 + 5*1
    assert analytic_reward(0.9, 0.0, 1, False) == 505.0


def test_analytic_deterministic_and_seed_independent():
    s = AnalyticSurrogate()
    a = s.evaluate(make_request(seed=1))
    b = s.evaluate(make_request(seed=99, chrom_seed=0))
    assert a.reward == b.reward


def test_analytic_transfer_adds_exactly_tau():
    s = AnalyticSurrogate()
    plain = s.evaluate(make_request())
    warm = s.evaluate(make_request(transfer=SAMPLE_TRANSFER))
    assert warm.reward - plain.reward == SurrogateParams().tau


def test_analytic_reports_expert_handle_and_stats():
    res = AnalyticSurrogate().evaluate(make_request())
    assert res.expert_handle == "surrogate://0_0"
    assert res.wall_seconds == 0.0
    stats = arch_stats(make_request().chromosome, FidelityConfig())
    assert res.metrics["params_m"] == stats.params_m


# ---------------------------------------------------------------------------
# noisy surrogate

def test_noisy_sigma_zero_equals_analytic():
    req = make_request()
    assert NoisySurrogate(sigma=0.0).evaluate(req).reward == \
        AnalyticSurrogate().evaluate(req).reward


def test_noisy_deterministic_per_seed():
    s = NoisySurrogate()
    assert s.evaluate(make_request(seed=5)).reward == s.evaluate(make_request(seed=5)).reward
    assert s.evaluate(make_request(seed=5)).reward != s.evaluate(make_request(seed=6)).reward


def test_noisy_empirical_mean_near_analytic():
    sigma = 25.0
    base = AnalyticSurrogate().evaluate(make_request()).reward
    noisy = NoisySurrogate(sigma=sigma)
    rewards = [noisy.evaluate(make_request(seed=s)).reward for s in range(1000)]
    assert abs(np.mean(rewards) - base) < 3 * sigma / math.sqrt(1000)


# ---------------------------------------------------------------------------
# table surrogate

def test_table_hit_and_miss(tmp_path):
    c = random_chromosome(4, np.random.default_rng(3), chrom_id="0_0")
    key = encode_text(c)
    path = tmp_path / "rewards.tsv"
    TableSurrogate.write_file(path, {key: 123.5})
    s = TableSurrogate.from_file(path)
    req = EvaluationRequest(chromosome=c, fidelity=FidelityConfig(), seed=0)
    assert s.evaluate(req).reward == 123.5
    other = EvaluationRequest(chromosome=random_chromosome(4, np.random.default_rng(4)),
                              fidelity=FidelityConfig(), seed=0)
    with pytest.raises(UnknownGenomeError, match="unknown genome"):
        s.evaluate(other)


def test_table_ignores_fidelity(tmp_path):
    c = random_chromosome(4, np.random.default_rng(5), chrom_id="x")
    s = TableSurrogate({encode_text(c): 7.0})
    for fidelity in (FidelityConfig(), FidelityConfig(init_channels=32)):
        req = EvaluationRequest(chromosome=c, fidelity=fidelity, seed=0)
        assert s.evaluate(req).reward == 7.0


def test_table_file_format_is_quoted_tsv(tmp_path):
    path = tmp_path / "t.tsv"
    TableSurrogate.write_file(path, {"normal|skip@0+skip@1  reduction|skip@0+skip@1": 5.0})
    line = path.read_text().strip()
    assert line.startswith('"normal|') and "\t5.0" in line
    assert TableSurrogate.from_file(path).table == {
        "normal|skip@0+skip@1  reduction|skip@0+skip@1": 5.0}


def test_table_rejects_malformed_line(tmp_path):
    path = tmp_path / "bad.tsv"
    path.write_text("no quotes here\t3\n", encoding="utf-8")
    with pytest.raises(ValueError, match="malformed table line"):
        TableSurrogate.from_file(path)


# ---------------------------------------------------------------------------
# protocol

def test_message_round_trip_byte_exact():
    req = make_request(seed=17, transfer=SAMPLE_TRANSFER)
    for msg in (init_message(FidelityConfig(), 42), evaluate_message(req),
                shutdown_message(),
                {"type": "result", "id": "0_1", "reward": 1.5,
                 "expert_handle": None, "metrics": {}, "wall_seconds": 0.25},
                {"type": "error", "id": "0_1", "message": "boom"}):
        line = canonical_json(msg)
        assert canonical_json(parse_message(line)) == line


def test_init_message_field_names():
    msg = init_message(FidelityConfig(), 7)
    assert msg == {"type": "init", "protocol_version": 1, "run_seed": 7,
                   "fidelity": {"epochs": 20, "input": [84, 84, 3], "cells": 4,
                                "blocks": 4, "init_channels": 16,
                                "head_output_dim": 64}}


def test_evaluate_message_shape():
    req = make_request(seed=3, transfer=SAMPLE_TRANSFER)
    msg = evaluate_message(req)
    assert set(msg) == {"type", "id", "seed", "genome", "transfer"}
    assert msg["transfer"]["expert_pairs"] == 12000
    assert set(msg["transfer"]["hyperparams"]) == {"lr", "ppo_clip", "entropy"}
    genome = msg["genome"]
    assert set(genome) == {"normal", "reduction"}
    assert len(genome["normal"]) == 4 and len(genome["normal"][0]) == 2
    assert all(len(gene) == 2 for block in genome["normal"] for gene in block)
    no_transfer = evaluate_message(make_request())
    assert no_transfer["transfer"] is None


def test_genome_wire_round_trip():
    c = random_chromosome(4, np.random.default_rng(6), chrom_id="w")
    back = genome_from_wire(genome_to_wire(c), "w")
    assert back.normal == c.normal and back.reduction == c.reduction


def test_parse_rejects_garbage():
    with pytest.raises(ProtocolViolationError):
        parse_message("not json")
    with pytest.raises(ProtocolViolationError):
        parse_message('{"no_type": 1}')


def test_result_requires_finite_reward():
    with pytest.raises(ValueError):
        EvaluationResult(id="x", reward=math.nan)


def test_transfer_context_validation():
    with pytest.raises(ValueError):
        TransferContext(teacher="t", expert_handle="h", expert_pairs=0)
    with pytest.raises(ValueError):
        TransferContext(teacher="t", expert_handle="h", hyperparams={"lr": -1.0})


# ---------------------------------------------------------------------------
# worker client against the fixture processes

def run_client(name, timeout_s=10.0):
    client = WorkerClient(fixture_cmd(name), timeout_s=timeout_s)
    client.start(FidelityConfig(), run_seed=0)
    return client


def test_echo_worker_round_trip():
    client = run_client("echo_worker")
    try:
        res = client.evaluate(make_request())
        assert res.reward == 0.0
        assert res.id == "0_0"
        assert res.metrics == {"echo": 1}
    finally:
        client.shutdown()
    assert client.proc.returncode == 0


def test_wrong_id_is_protocol_violation():
    client = run_client("wrong_id_worker")
    try:
        with pytest.raises(ProtocolViolationError, match="expected"):
            client.evaluate(make_request())
    finally:
        client.shutdown()


def test_silent_worker_times_out():
    client = run_client("silent_worker", timeout_s=0.5)
    try:
        with pytest.raises(WorkerTimeoutError):
            client.evaluate(make_request())
    finally:
        client.shutdown()


def test_crashed_worker_reports_exit():
    client = run_client("crash_worker")
    try:
        with pytest.raises(WorkerExitError, match="exited"):
            client.evaluate(make_request())
    finally:
        client.shutdown()


def test_error_reply_surfaces_message():
    client = run_client("error_worker")
    try:
        with pytest.raises(WorkerErrorReply, match="synthetic failure"):
            client.evaluate(make_request())
    finally:
        client.shutdown()
