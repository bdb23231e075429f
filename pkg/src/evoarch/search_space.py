"""Operator vocabulary and cell-genome encoding.

A candidate architecture is a :class:`Chromosome`: two cell genomes (normal
and reduction), each an ordered list of blocks, each block a pair of
(operator, input) genes.  Input index 0 and 1 address the outputs of the two
preceding cells; index 2+j addresses the output of block j of the same cell,
so a gene in block k may connect to any of {0, 1, ..., k+1}.

Everything here is a pure value type; randomness enters only through
explicitly passed numpy generators.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum

import numpy as np


class OperatorKind(IntEnum):
    """The ten candidate operators, with stable integer codes."""

    SKIP_CONNECT = 0
    MAX_POOL_3X3 = 1
    AVG_POOL_3X3 = 2
    SEP_CONV_3X3 = 3
    SEP_CONV_5X5 = 4
    DIL_CONV_3X3 = 5
    DIL_CONV_5X5 = 6
    INV_CONV_3X3 = 7
    INV_CONV_5X5 = 8
    CONV_7X7 = 9


ALL_OPERATORS: tuple[OperatorKind, ...] = tuple(OperatorKind)

MNEMONIC: dict[OperatorKind, str] = {
    OperatorKind.SKIP_CONNECT: "skip",
    OperatorKind.MAX_POOL_3X3: "max3",
    OperatorKind.AVG_POOL_3X3: "avg3",
    OperatorKind.SEP_CONV_3X3: "sep3",
    OperatorKind.SEP_CONV_5X5: "sep5",
    OperatorKind.DIL_CONV_3X3: "dil3",
    OperatorKind.DIL_CONV_5X5: "dil5",
    OperatorKind.INV_CONV_3X3: "inv3",
    OperatorKind.INV_CONV_5X5: "inv5",
    OperatorKind.CONV_7X7: "conv7",
}

OPERATOR_BY_MNEMONIC: dict[str, OperatorKind] = {m: op for op, m in MNEMONIC.items()}


def input_range(block_index: int) -> range:
    """Legal input indices for a gene sitting in block ``block_index``."""
    return range(block_index + 2)


@dataclass(frozen=True)
class Gene:
    """One (operator, input) pair."""

    op: OperatorKind
    input: int


@dataclass(frozen=True)
class CellGenome:
    """Ordered blocks of a single cell; each block holds exactly two genes."""

    blocks: tuple[tuple[Gene, Gene], ...]

    def genes(self) -> list[Gene]:
        """All genes in block-major, slot order."""
        return [g for block in self.blocks for g in block]


@dataclass(frozen=True)
class Lineage:
    """How an individual came to exist."""

    genesis: str  # one of: init, crossover, mutation, survivor
    parents: tuple[str, ...] = ()


@dataclass(frozen=True)
class Chromosome:
    """A full candidate: normal cell genome + reduction cell genome."""

    normal: CellGenome
    reduction: CellGenome
    id: str
    lineage: Lineage | None = None

    def with_identity(self, new_id: str, lineage: Lineage | None = None) -> "Chromosome":
        return Chromosome(self.normal, self.reduction, new_id, lineage)

    def distinct_ops(self) -> set[OperatorKind]:
        """Distinct operator kinds used anywhere in the genome."""
        return {g.op for cell in (self.normal, self.reduction) for g in cell.genes()}


@dataclass(frozen=True)
class Violation:
    """One validity failure, located by (cell, block, slot)."""

    cell: str
    block: int
    slot: str
    reason: str


def _random_cell(blocks: int, rng: np.random.Generator,
                 ops: tuple[OperatorKind, ...]) -> CellGenome:
    out = []
    for k in range(blocks):
        pair = []
        for _ in range(2):
            # draw order is fixed: op, then input; 2 draws per gene
            op = ops[int(rng.integers(len(ops)))]
            inp = int(rng.integers(k + 2))
            pair.append(Gene(op, inp))
        out.append((pair[0], pair[1]))
    return CellGenome(tuple(out))


def random_chromosome(blocks: int, rng: np.random.Generator,
                      ops: tuple[OperatorKind, ...] = ALL_OPERATORS,
                      chrom_id: str = "c0",
                      lineage: Lineage | None = None) -> Chromosome:
    """Sample a uniformly random chromosome.

    Consumes exactly 2 * blocks * 2 draws per cell from ``rng`` (op then
    input, block-major), normal cell first.  ``ops`` restricts the operator
    vocabulary; the default is all ten operators.
    """
    if blocks < 1:
        raise ValueError("blocks must be >= 1")
    if not ops:
        raise ValueError("ops must be non-empty")
    normal = _random_cell(blocks, rng, ops)
    reduction = _random_cell(blocks, rng, ops)
    return Chromosome(normal, reduction, chrom_id,
                      lineage if lineage is not None else Lineage("init"))


def validate(c: Chromosome, blocks: int) -> list[Violation]:
    """Check positional input ranges and block counts.

    Returns an empty list when the chromosome is valid; otherwise one
    :class:`Violation` per failure.
    """
    violations: list[Violation] = []
    for cell_name, cell in (("normal", c.normal), ("reduction", c.reduction)):
        if len(cell.blocks) != blocks:
            violations.append(Violation(
                cell_name, -1, "-",
                f"block count mismatch: expected {blocks}, got {len(cell.blocks)}"))
            continue
        for k, block in enumerate(cell.blocks):
            for slot, gene in zip("ab", block):
                if gene.op not in MNEMONIC:
                    violations.append(Violation(
                        cell_name, k, slot, f"unknown operator code {gene.op}"))
                if not (0 <= gene.input <= k + 1):
                    violations.append(Violation(
                        cell_name, k, slot,
                        f"input out of range: {gene.input} not in 0..{k + 1}"))
    return violations


class GenomeFormatError(ValueError):
    """Raised by :func:`decode_text` on malformed input."""


def _encode_block(block: tuple[Gene, Gene]) -> str:
    return "+".join(f"{MNEMONIC[g.op]}@{g.input}" for g in block)


def encode_text(c: Chromosome) -> str:
    """Canonical human-readable form.

    Blocks are ``mnemonic@input+mnemonic@input`` joined by ``;`` per cell,
    with the two cells written as ``normal|...  reduction|...`` (two spaces
    between the sections).
    """
    normal = ";".join(_encode_block(b) for b in c.normal.blocks)
    reduction = ";".join(_encode_block(b) for b in c.reduction.blocks)
    return f"normal|{normal}  reduction|{reduction}"


def _decode_gene(token: str, cell: str, block: int, slot: str) -> Gene:
    where = f"{cell} cell, block {block}, gene {slot}"
    if token.count("@") != 1:
        raise GenomeFormatError(f"{where}: expected 'mnemonic@input', got {token!r}")
    mnem, _, raw_input = token.partition("@")
    if mnem not in OPERATOR_BY_MNEMONIC:
        raise GenomeFormatError(f"{where}: unknown mnemonic {mnem!r}")
    try:
        inp = int(raw_input)
    except ValueError:
        raise GenomeFormatError(f"{where}: input {raw_input!r} is not an integer") from None
    if not (0 <= inp <= block + 1):
        raise GenomeFormatError(
            f"{where}: input out of range: {inp} not in 0..{block + 1}")
    return Gene(OPERATOR_BY_MNEMONIC[mnem], inp)


def _decode_cell(body: str, cell: str, blocks: int) -> CellGenome:
    raw_blocks = body.split(";")
    if len(raw_blocks) != blocks:
        raise GenomeFormatError(
            f"{cell} cell: expected {blocks} blocks, got {len(raw_blocks)}")
    decoded = []
    for k, raw in enumerate(raw_blocks):
        genes = raw.split("+")
        if len(genes) != 2:
            raise GenomeFormatError(
                f"{cell} cell, block {k}: expected 2 genes joined by '+', got {raw!r}")
        decoded.append((_decode_gene(genes[0], cell, k, "a"),
                        _decode_gene(genes[1], cell, k, "b")))
    return CellGenome(tuple(decoded))


def decode_text(s: str, blocks: int, chrom_id: str = "c0") -> Chromosome:
    """Inverse of :func:`encode_text`; raises :class:`GenomeFormatError`
    with a position-annotated message on any malformed input."""
    parts = s.split("  ")
    if len(parts) != 2:
        raise GenomeFormatError(
            "expected 'normal|...  reduction|...' separated by two spaces")
    sections = {}
    for part in parts:
        name, sep, body = part.partition("|")
        if not sep or name not in ("normal", "reduction"):
            raise GenomeFormatError(f"malformed section {part!r}")
        sections[name] = body
    if set(sections) != {"normal", "reduction"}:
        raise GenomeFormatError("need exactly one normal and one reduction section")
    return Chromosome(
        _decode_cell(sections["normal"], "normal", blocks),
        _decode_cell(sections["reduction"], "reduction", blocks),
        chrom_id,
    )
