"""Decode a chromosome into a concrete layer graph and count params / FLOPs.

The network is: stem (3x3 conv + BN) -> N stacked cells -> global average
pool -> linear head.  Reduction cells sit at indices floor(N/3) and
floor(2N/3) for N >= 3 (all cells are normal below that); channel width
starts at ``init_channels`` and doubles entering each reduction cell.

Counting conventions (applied identically by the layer enumeration here and
by any closed-form cross-check):

* convolutions are bias-free and followed by batchnorm with 2*C affine
  parameters; pools have no trailing batchnorm,
* FLOPs = 2 * MACs with conv MACs = K^2*C_in*C_out*H_out*W_out, depthwise
  MACs = K^2*C*H_out*W_out, linear MACs = in*out; batchnorm, pooling,
  additions and concatenations are MAC-free,
* the linear head is bias-free (in*out parameters),
* spatial halving is ceil(H/2), which is what a stride-2 convolution with
  its size-preserving padding produces,
* in reduction cells, stride 2 applies only to operators reading the
  cell-level inputs (indices 0 and 1); operators reading intra-cell block
  outputs run at stride 1 on the already-reduced tensors.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .search_space import Chromosome, Gene, OperatorKind, validate

SEP_KERNEL = {OperatorKind.SEP_CONV_3X3: 3, OperatorKind.SEP_CONV_5X5: 5}
DIL_KERNEL = {OperatorKind.DIL_CONV_3X3: 3, OperatorKind.DIL_CONV_5X5: 5}
INV_KERNEL = {OperatorKind.INV_CONV_3X3: 3, OperatorKind.INV_CONV_5X5: 5}
POOLS = (OperatorKind.MAX_POOL_3X3, OperatorKind.AVG_POOL_3X3)


@dataclass(frozen=True)
class FidelityConfig:
    """Decode-time settings: resolution, depth, width, and ranking budget."""

    input_hw: tuple[int, int] = (84, 84)
    input_channels: int = 3
    cells: int = 4
    blocks: int = 4
    init_channels: int = 16
    epochs: int = 20
    head_output_dim: int = 64
    inv_expansion: int = 3

    def __post_init__(self) -> None:
        counts = (self.input_hw[0], self.input_hw[1], self.input_channels,
                  self.cells, self.blocks, self.init_channels, self.epochs,
                  self.head_output_dim, self.inv_expansion)
        if any(v < 1 for v in counts):
            raise ValueError("all fidelity counts must be >= 1")

    def reduction_indices(self) -> set[int]:
        if self.cells < 3:
            return set()
        return {self.cells // 3, (2 * self.cells) // 3}


@dataclass(frozen=True)
class Layer:
    """One primitive layer of the decoded graph."""

    kind: str  # conv | depthwise_conv | batchnorm | pool | identity | add | concat | global_avg_pool | linear
    c_in: int
    c_out: int
    out_hw: tuple[int, int]
    kernel: int = 1
    stride: int = 1
    dilation: int = 1
    tag: str = ""


@dataclass
class LayerGraph:
    """Ordered primitive layers; consistent by construction."""

    layers: list[Layer] = field(default_factory=list)
    cell_widths: list[int] = field(default_factory=list)
    cell_out_hw: list[tuple[int, int]] = field(default_factory=list)

    def add(self, layer: Layer) -> None:
        self.layers.append(layer)


@dataclass(frozen=True)
class ArchStats:
    """Exact parameter and FLOP counts for one decoded architecture."""

    params: int
    flops: int

    @property
    def params_m(self) -> float:
        return self.params / 1e6

    @property
    def flops_g(self) -> float:
        return self.flops / 1e9


def _halve(hw: tuple[int, int]) -> tuple[int, int]:
    return ((hw[0] + 1) // 2, (hw[1] + 1) // 2)


def _emit_op(g: LayerGraph, gene: Gene, c: int, hw: tuple[int, int],
             stride: int, expansion: int, tag: str) -> None:
    """Append the primitive layers realizing one operator at width ``c``."""
    out_hw = _halve(hw) if stride == 2 else hw
    op = gene.op
    if op == OperatorKind.SKIP_CONNECT:
        if stride == 2:
            g.add(Layer("conv", c, c, out_hw, kernel=1, stride=2, tag=tag))
            g.add(Layer("batchnorm", c, c, out_hw, tag=tag))
        else:
            g.add(Layer("identity", c, c, out_hw, tag=tag))
    elif op in POOLS:
        g.add(Layer("pool", c, c, out_hw, kernel=3, stride=stride, tag=tag))
    elif op in SEP_KERNEL:
        k = SEP_KERNEL[op]
        for s in (stride, 1):  # two stacked units; only the first may downsample
            g.add(Layer("depthwise_conv", c, c, out_hw, kernel=k, stride=s, tag=tag))
            g.add(Layer("conv", c, c, out_hw, kernel=1, tag=tag))
            g.add(Layer("batchnorm", c, c, out_hw, tag=tag))
    elif op in DIL_KERNEL:
        k = DIL_KERNEL[op]
        g.add(Layer("depthwise_conv", c, c, out_hw, kernel=k, stride=stride,
                    dilation=2, tag=tag))
        g.add(Layer("conv", c, c, out_hw, kernel=1, tag=tag))
        g.add(Layer("batchnorm", c, c, out_hw, tag=tag))
    elif op in INV_KERNEL:
        k, t = INV_KERNEL[op], expansion
        g.add(Layer("conv", c, t * c, hw, kernel=1, tag=tag))
        g.add(Layer("batchnorm", t * c, t * c, hw, tag=tag))
        g.add(Layer("depthwise_conv", t * c, t * c, out_hw, kernel=k,
                    stride=stride, tag=tag))
        g.add(Layer("batchnorm", t * c, t * c, out_hw, tag=tag))
        g.add(Layer("conv", t * c, c, out_hw, kernel=1, tag=tag))
        g.add(Layer("batchnorm", c, c, out_hw, tag=tag))
    elif op == OperatorKind.CONV_7X7:
        g.add(Layer("conv", c, c, out_hw, kernel=7, stride=stride, tag=tag))
        g.add(Layer("batchnorm", c, c, out_hw, tag=tag))
    else:
        raise ValueError(f"unhandled operator {op!r}")


def build_graph(c: Chromosome, f: FidelityConfig) -> LayerGraph:
    """Decode ``c`` at fidelity ``f`` into an ordered list of primitive layers."""
    violations = validate(c, f.blocks)
    if violations:
        raise ValueError(f"invalid chromosome: {violations}")

    g = LayerGraph()
    hw = f.input_hw
    g.add(Layer("conv", f.input_channels, f.init_channels, hw, kernel=3, tag="stem"))
    g.add(Layer("batchnorm", f.init_channels, f.init_channels, hw, tag="stem"))

    reductions = f.reduction_indices()
    # (channels, spatial) of the two cell-level inputs, prev-prev and prev
    s0 = s1 = (f.init_channels, hw)
    width = f.init_channels
    for i in range(f.cells):
        is_reduction = i in reductions
        if is_reduction:
            width *= 2
        genome = c.reduction if is_reduction else c.normal
        cell_tag = f"cell{i}"
        (c0, hw0), (c1, hw1) = s0, s1
        if hw0[0] < 1 or hw1[0] < 1:
            raise ValueError(f"spatial size collapsed to zero before cell {i}")

        for src_idx, (cs, hws) in enumerate(((c0, hw0), (c1, hw1))):
            stride = 2 if hws[0] > hw1[0] else 1
            out = _halve(hws) if stride == 2 else hws
            g.add(Layer("conv", cs, width, out, kernel=1, stride=stride,
                        tag=f"{cell_tag}/pre{src_idx}"))
            g.add(Layer("batchnorm", width, width, out, tag=f"{cell_tag}/pre{src_idx}"))

        out_hw = _halve(hw1) if is_reduction else hw1
        for k, block in enumerate(genome.blocks):
            for slot, gene in zip("ab", block):
                source_is_cell_input = gene.input < 2
                stride = 2 if (is_reduction and source_is_cell_input) else 1
                src_hw = hw1 if source_is_cell_input else out_hw
                _emit_op(g, gene, width, src_hw, stride, f.inv_expansion,
                         f"{cell_tag}/block{k}/{slot}")
            g.add(Layer("add", width, width, out_hw, tag=f"{cell_tag}/block{k}"))
        concat_ch = f.blocks * width
        g.add(Layer("concat", width, concat_ch, out_hw, tag=cell_tag))
        g.cell_widths.append(width)
        g.cell_out_hw.append(out_hw)
        s0, s1 = s1, (concat_ch, out_hw)

    final_ch = s1[0]
    g.add(Layer("global_avg_pool", final_ch, final_ch, (1, 1), tag="head"))
    g.add(Layer("linear", final_ch, f.head_output_dim, (1, 1), tag="head"))
    return g


def count_params(g: LayerGraph) -> int:
    """Exact parameter count of the graph."""
    total = 0
    for layer in g.layers:
        if layer.kind == "conv":
            total += layer.kernel * layer.kernel * layer.c_in * layer.c_out
        elif layer.kind == "depthwise_conv":
            total += layer.kernel * layer.kernel * layer.c_out
        elif layer.kind == "batchnorm":
            total += 2 * layer.c_out
        elif layer.kind == "linear":
            total += layer.c_in * layer.c_out
    return total


def count_flops(g: LayerGraph) -> int:
    """Exact FLOP count (2 * MACs) of the graph."""
    macs = 0
    for layer in g.layers:
        h, w = layer.out_hw
        if layer.kind == "conv":
            macs += layer.kernel * layer.kernel * layer.c_in * layer.c_out * h * w
        elif layer.kind == "depthwise_conv":
            macs += layer.kernel * layer.kernel * layer.c_out * h * w
        elif layer.kind == "linear":
            macs += layer.c_in * layer.c_out
    return 2 * macs


def arch_stats(c: Chromosome, f: FidelityConfig) -> ArchStats:
    """Params and FLOPs of ``c`` decoded at fidelity ``f``."""
    g = build_graph(c, f)
    return ArchStats(params=count_params(g), flops=count_flops(g))
