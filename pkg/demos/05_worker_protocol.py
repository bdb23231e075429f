"""The external-worker wire protocol, message by message.

Prints the exact NDJSON frames, then talks to a tiny inline worker over a
real pipe.  Point EXTERNAL_COMMAND at any conformant trainer (for example
the reference worker: ["node", "worker/dist/worker.js"]) to drive it the
same way.
"""

import sys

import numpy as np

from evoarch import FidelityConfig, WorkerClient, random_chromosome
from evoarch.evaluation import (
    EvaluationRequest,
    TransferContext,
    canonical_json,
    evaluate_message,
    init_message,
    shutdown_message,
)

fidelity = FidelityConfig()
chrom = random_chromosome(4, np.random.default_rng(3), chrom_id="0_0")
transfer = TransferContext(teacher="0_2", expert_handle="file:///tmp/expert.bin",
                           expert_pairs=12000,
                           hyperparams={"lr": 3e-4, "ppo_clip": 0.2, "entropy": 0.01})
request = EvaluationRequest(chromosome=chrom, fidelity=fidelity, seed=42,
                            transfer=transfer)

print("== engine -> worker frames ==")
for msg in (init_message(fidelity, run_seed=7), evaluate_message(request),
            shutdown_message()):
    frame = canonical_json(msg)
    print(frame if len(frame) <= 160 else frame[:157] + "...")

INLINE_WORKER = r"""
import json, sys
for line in sys.stdin:
    msg = json.loads(line)
    if msg["type"] == "shutdown":
        break
    if msg["type"] == "evaluate":
        n_genes = sum(len(b) for b in msg["genome"]["normal"])
        reply = {"type": "result", "id": msg["id"], "reward": 10.0 * n_genes,
                 "expert_handle": None, "metrics": {"genes": n_genes},
                 "wall_seconds": 0.0}
        print(json.dumps(reply), flush=True)
"""

EXTERNAL_COMMAND = [sys.executable, "-c", INLINE_WORKER]

print("\n== live round trip ==")
client = WorkerClient(EXTERNAL_COMMAND, timeout_s=10.0)
client.start(fidelity, run_seed=7)
result = client.evaluate(request)
client.shutdown()
print(f"worker replied: reward={result.reward} metrics={result.metrics}")
print(f"worker exit code: {client.proc.returncode}")
