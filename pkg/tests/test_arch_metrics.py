import numpy as np
import pytest

from evoarch.arch_metrics import FidelityConfig, arch_stats, build_graph, count_flops, count_params
from evoarch.search_space import (
    ALL_OPERATORS,
    CellGenome,
    Chromosome,
    Gene,
    OperatorKind,
    random_chromosome,
)

from oracles import oracle_counts


def uniform_cell(op, blocks=4, inp=0):
    return CellGenome(tuple((Gene(op, inp), Gene(op, inp)) for _ in range(blocks)))


def uniform_chromosome(op, blocks=4):
    return Chromosome(uniform_cell(op, blocks), uniform_cell(op, blocks), "u")


ALL_SKIP = uniform_chromosome(OperatorKind.SKIP_CONNECT)


def test_default_spatial_sizes_and_widths():
    g = build_graph(ALL_SKIP, FidelityConfig())
    assert [hw[0] for hw in g.cell_out_hw] == [84, 42, 21, 21]
    assert g.cell_widths == [16, 32, 64, 64]


def test_reduction_placement():
    assert FidelityConfig(cells=4).reduction_indices() == {1, 2}
    assert FidelityConfig(cells=20).reduction_indices() == {6, 13}
    assert FidelityConfig(cells=3).reduction_indices() == {1, 2}
    assert FidelityConfig(cells=2).reduction_indices() == set()
    assert FidelityConfig(cells=1).reduction_indices() == set()


def test_stem_spot_values():
    g = build_graph(ALL_SKIP, FidelityConfig())
    stem = [l for l in g.layers if l.tag == "stem"]
    assert count_params(type(g)(layers=stem)) == 464
    assert count_flops(type(g)(layers=stem)) == 6_096_384


@pytest.mark.parametrize("op,delta", [
    (OperatorKind.SEP_CONV_3X3, 864),       # 2 * (9*16 + 16^2 + 2*16)
    (OperatorKind.INV_CONV_3X3, 2192),      # 2*3*16^2 + 3*9*16 + 4*3*16 + 2*16
    (OperatorKind.CONV_7X7, 49 * 256 + 32),
    (OperatorKind.DIL_CONV_3X3, 9 * 16 + 256 + 32),
    (OperatorKind.MAX_POOL_3X3, 0),
])
def test_single_op_param_delta_at_c16(op, delta):
    f = FidelityConfig(cells=1, blocks=1)
    base = Chromosome(uniform_cell(OperatorKind.SKIP_CONNECT, 1),
                      uniform_cell(OperatorKind.SKIP_CONNECT, 1), "b")
    probe = Chromosome(
        CellGenome(((Gene(op, 0), Gene(OperatorKind.SKIP_CONNECT, 1)),)),
        base.reduction, "p")
    assert arch_stats(probe, f).params - arch_stats(base, f).params == delta


def test_skip_in_normal_cell_is_free():
    f = FidelityConfig(cells=1, blocks=1)
    only_skip = Chromosome(uniform_cell(OperatorKind.SKIP_CONNECT, 1),
                           uniform_cell(OperatorKind.SKIP_CONNECT, 1), "s")
    only_pool = Chromosome(uniform_cell(OperatorKind.MAX_POOL_3X3, 1),
                           uniform_cell(OperatorKind.MAX_POOL_3X3, 1), "p")
    assert arch_stats(only_skip, f).params == arch_stats(only_pool, f).params


def test_pool_contributes_zero_flops():
    f = FidelityConfig()
    skip = arch_stats(uniform_chromosome(OperatorKind.SKIP_CONNECT), f)
    pool = arch_stats(uniform_chromosome(OperatorKind.AVG_POOL_3X3), f)
    # pools replace stride-2 skip projections in reduction cells, so pooling
    # everywhere costs no FLOPs beyond the shared stem/preprocess/head
    assert pool.flops < skip.flops
    assert pool.params < skip.params


def test_matches_oracle_on_random_chromosomes():
    rng = np.random.default_rng(9)
    f = FidelityConfig()
    for _ in range(25):
        c = random_chromosome(4, rng)
        stats = arch_stats(c, f)
        params, flops = oracle_counts(c, f)
        assert stats.params == params
        assert stats.flops == flops


def test_matches_oracle_on_odd_fidelities():
    rng = np.random.default_rng(10)
    for f in (FidelityConfig(cells=1, blocks=2), FidelityConfig(cells=2, blocks=3),
              FidelityConfig(cells=5, blocks=2, init_channels=8),
              FidelityConfig(cells=6, blocks=4, input_hw=(65, 47)),
              FidelityConfig(cells=3, blocks=1, inv_expansion=5)):
        for _ in range(5):
            c = random_chromosome(f.blocks, rng)
            stats = arch_stats(c, f)
            assert (stats.params, stats.flops) == oracle_counts(c, f)


def test_conv_genes_never_cheaper_than_skip_or_pool():
    rng = np.random.default_rng(11)
    f = FidelityConfig()
    convs = [op for op in ALL_OPERATORS
             if op not in (OperatorKind.SKIP_CONNECT, OperatorKind.MAX_POOL_3X3,
                           OperatorKind.AVG_POOL_3X3)]
    for _ in range(10):
        c = random_chromosome(4, rng)
        base = arch_stats(c, f)
        cell_i = int(rng.integers(2))
        block_i = int(rng.integers(4))
        slot_i = int(rng.integers(2))
        cells = [c.normal, c.reduction]
        gene = cells[cell_i].blocks[block_i][slot_i]
        if gene.op not in (OperatorKind.SKIP_CONNECT, OperatorKind.MAX_POOL_3X3,
                           OperatorKind.AVG_POOL_3X3):
            continue
        for conv in convs:
            blocks = list(cells[cell_i].blocks)
            pair = list(blocks[block_i])
            pair[slot_i] = Gene(conv, gene.input)
            blocks[block_i] = (pair[0], pair[1])
            mutated_cells = list(cells)
            mutated_cells[cell_i] = CellGenome(tuple(blocks))
            mutated = Chromosome(mutated_cells[0], mutated_cells[1], "m")
            upgraded = arch_stats(mutated, f)
            assert upgraded.params >= base.params
            assert upgraded.flops >= base.flops


def test_params_independent_of_resolution_flops_scale():
    c = random_chromosome(4, np.random.default_rng(12))
    small = FidelityConfig(input_hw=(84, 84))
    big = FidelityConfig(input_hw=(168, 168))
    ss, sb = arch_stats(c, small), arch_stats(c, big)
    assert ss.params == sb.params
    head_flops = 2 * (4 * 64) * 64  # constant linear head, excluded from scaling
    assert (sb.flops - head_flops) == 4 * (ss.flops - head_flops)


def test_params_monotone_in_init_channels():
    c = random_chromosome(4, np.random.default_rng(13))
    a = arch_stats(c, FidelityConfig(init_channels=16))
    b = arch_stats(c, FidelityConfig(init_channels=32))
    assert b.params > a.params


def test_random_arch_lands_in_sanity_band():
    # discovered models in this regime sit around one million parameters;
    # random samples should be within an order of magnitude, not absurd
    rng = np.random.default_rng(14)
    for _ in range(10):
        stats = arch_stats(random_chromosome(4, rng), FidelityConfig())
        assert 0.005 < stats.params_m < 10.0


def test_rejects_invalid_chromosome():
    bad = Chromosome(
        CellGenome(((Gene(OperatorKind.SKIP_CONNECT, 9), Gene(OperatorKind.SKIP_CONNECT, 0)),)),
        CellGenome(((Gene(OperatorKind.SKIP_CONNECT, 0), Gene(OperatorKind.SKIP_CONNECT, 0)),)),
        "bad")
    with pytest.raises(ValueError, match="invalid chromosome"):
        build_graph(bad, FidelityConfig(cells=1, blocks=1))


def test_stats_deterministic():
    c = random_chromosome(4, np.random.default_rng(15))
    f = FidelityConfig()
    assert arch_stats(c, f) == arch_stats(c, f)
