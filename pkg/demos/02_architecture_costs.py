"""What each operator costs: exact parameter and FLOP counts by decode."""

import numpy as np

from evoarch import FidelityConfig, arch_stats, random_chromosome
from evoarch.arch_metrics import build_graph
from evoarch.search_space import (
    ALL_OPERATORS,
    CellGenome,
    Chromosome,
    Gene,
    MNEMONIC,
    OperatorKind,
)


def uniform(op, blocks=4):
    cell = CellGenome(tuple((Gene(op, 0), Gene(op, 1)) for _ in range(blocks)))
    return Chromosome(cell, cell, MNEMONIC[op])


f = FidelityConfig()
print(f"fidelity: {f.input_hw[0]}x{f.input_hw[1]}x{f.input_channels}, "
      f"{f.cells} cells, {f.blocks} blocks, {f.init_channels} channels")

print("\n== cost of a network built from a single operator ==")
print(f"{'operator':>8} {'params(M)':>10} {'flops(G)':>10}")
for op in ALL_OPERATORS:
    stats = arch_stats(uniform(op), f)
    print(f"{MNEMONIC[op]:>8} {stats.params_m:>10.4f} {stats.flops_g:>10.4f}")

print("\n== where a random architecture spends its budget ==")
rng = np.random.default_rng(1)
c = random_chromosome(4, rng, chrom_id="sample")
g = build_graph(c, f)
print("cell widths:   ", g.cell_widths)
print("cell hw:       ", [hw[0] for hw in g.cell_out_hw])
stats = arch_stats(c, f)
print(f"total: {stats.params:,} params, {stats.flops:,} flops "
      f"({stats.params_m:.4f} M / {stats.flops_g:.4f} G)")

print("\n== parameters are resolution-independent, flops are not ==")
for hw in (42, 84, 168):
    s = arch_stats(c, FidelityConfig(input_hw=(hw, hw)))
    print(f"  input {hw}x{hw}: params_m={s.params_m:.4f} flops_g={s.flops_g:.4f}")
