"""Two-phase feedforward inference over genome tensors.

Phase one (transform) computes a topological order of node rows and a dense
node-row x node-row expanded connection tensor with NaN marking absent or
disabled connections.  Phase two (forward) sweeps the order, gathering each
node's incoming weights and updating a value vector.

Both phases are written against a leading population axis; the single-genome
entry points run the same kernels with a population of one.  Elementwise
numpy operations are position-independent, so a genome's results are bitwise
identical whether it is evaluated alone, inside a batch, or inside a chunk of
a batch.  That is what makes batched and per-genome evaluation agree exactly
and lets callers parallelize over population chunks without changing results.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CycleDetected, InvalidInput
from .functions import DEFAULT_REGISTRY, FunctionRegistry
from .genome import (CONN_ENABLED, CONN_IN, CONN_OUT, CONN_WEIGHT, NODE_ACT,
                     NODE_AGG, NODE_BIAS, NODE_KEY, NODE_RESPONSE,
                     GenomeTensors, PopulationTensors)
from .search import rows_of_io_keys


@dataclass(frozen=True, eq=False)
class TransformedNetwork:
    """Inference-ready form of one genome.

    ``order`` lists live node ROW indices in topological order, NaN padded.
    ``conns_expanded[i, j, 0]`` is the weight of the enabled connection from
    the node in row i to the node in row j, else NaN.  Rows are the key map:
    keys are unbounded, row positions are bounded by max_nodes.
    """
    nodes: np.ndarray           # (max_nodes, 5), the genome's node tensor
    order: np.ndarray           # (max_nodes,) float64 row indices, NaN padded
    conns_expanded: np.ndarray  # (max_nodes, max_nodes, 1) weight channel
    input_rows: np.ndarray      # (I,) int64 row positions of keys 0..I-1
    output_rows: np.ndarray     # (O,) int64 row positions of keys I..I+O-1


@dataclass(eq=False)
class StackedNetworks:
    """Population of transformed networks as stacked arrays (one per genome).

    ``incoming`` stores the expanded connections incoming-major:
    ``incoming[p, k, j]`` is the weight of the enabled edge from node row j
    into node row k, so one node's incoming weights are a contiguous row.
    """
    nodes: np.ndarray        # (P, n, 5)
    order: np.ndarray        # (P, n)
    incoming: np.ndarray     # (P, n, n) weight of enabled edge row j -> row k
    input_rows: np.ndarray   # (P, I)
    output_rows: np.ndarray  # (P, O)

    @property
    def size(self) -> int:
        return self.order.shape[0]

    def genome_view(self, i: int) -> TransformedNetwork:
        return TransformedNetwork(self.nodes[i], self.order[i],
                                  self.incoming[i].T[:, :, None],
                                  self.input_rows[i], self.output_rows[i])

    @classmethod
    def from_networks(cls, networks: list[TransformedNetwork]) -> "StackedNetworks":
        return cls(nodes=np.stack([t.nodes for t in networks]),
                   order=np.stack([t.order for t in networks]),
                   incoming=np.stack([t.conns_expanded[:, :, 0].T for t in networks]),
                   input_rows=np.stack([t.input_rows for t in networks]),
                   output_rows=np.stack([t.output_rows for t in networks]))


# ---------------------------------------------------------------------------
# transform
# ---------------------------------------------------------------------------

def transform_arrays(nodes: np.ndarray, conns: np.ndarray,
                     num_inputs: int, num_outputs: int) -> tuple[StackedNetworks, np.ndarray]:
    """Kahn's algorithm over every genome at once.

    Ties break toward the smallest node row index, which makes the order (and
    therefore every later floating-point sweep) deterministic.  Returns the
    stacked networks plus the indices of genomes whose enabled connections
    contain a cycle (their order is left incomplete).
    """
    pop, n, _ = nodes.shape
    keys = nodes[:, :, NODE_KEY]
    live_node = ~np.isnan(keys)
    live_conn = ~np.isnan(conns[:, :, CONN_IN])
    enabled = live_conn & (conns[:, :, CONN_ENABLED] == 1.0)

    # endpoint keys and fixed input/output keys -> node row positions
    c = conns.shape[1]
    io = num_inputs + num_outputs
    queries = np.concatenate(
        [conns[:, :, CONN_IN], conns[:, :, CONN_OUT],
         np.broadcast_to(np.arange(io, dtype=np.float64), (pop, io))], axis=1)
    resolved, _ = rows_of_io_keys(queries, keys, io)
    in_row = resolved[:, :c]
    out_row = resolved[:, c:2 * c]
    io_rows = resolved[:, 2 * c:]

    incoming = np.full((pop, n, n), np.nan)
    pm, rm = np.nonzero(enabled)
    src_sel = in_row[pm, rm]
    dst_sel = out_row[pm, rm]
    incoming[pm, dst_sel, src_sel] = conns[pm, rm, CONN_WEIGHT]

    indegree = np.zeros((pop, n), dtype=np.int64)
    np.add.at(indegree, (pm, dst_sel), 1)
    use_bitmasks = n <= 64
    if use_bitmasks:
        # successor sets as bitmasks so Kahn's decrement is two shifts per step
        successors = np.zeros((pop, n), dtype=np.uint64)
        np.bitwise_or.at(successors, (pm, src_sel),
                         np.uint64(1) << dst_sel.astype(np.uint64))
        bit_positions = np.arange(n, dtype=np.uint64)

    genome_rows = np.arange(pop)
    order = np.full((pop, n), np.nan)
    remaining = live_node.copy()
    for step in range(n):
        ready = remaining & (indegree == 0)
        has_ready = ready.any(axis=1)
        if not has_ready.any():
            break
        pick = ready.argmax(axis=1)
        order[has_ready, step] = pick[has_ready]
        remaining[has_ready, pick[has_ready]] = False
        if use_bitmasks:
            picked_bits = np.where(has_ready, successors[genome_rows, pick], np.uint64(0))
            indegree -= ((picked_bits[:, None] >> bit_positions) & np.uint64(1)).astype(np.int64)
        else:
            out_edges = enabled & (in_row == pick[:, None]) & has_ready[:, None]
            em, ec = np.nonzero(out_edges)
            np.subtract.at(indegree, (em, out_row[em, ec]), 1)

    cyclic = np.nonzero(remaining.any(axis=1))[0]

    return StackedNetworks(nodes=nodes, order=order, incoming=incoming,
                           input_rows=io_rows[:, :num_inputs],
                           output_rows=io_rows[:, num_inputs:]), cyclic


def transform(genome: GenomeTensors) -> TransformedNetwork:
    """Transform one genome; raises CycleDetected on an enabled cycle."""
    stacked, cyclic = transform_arrays(genome.nodes[None], genome.conns[None],
                                       genome.num_inputs, genome.num_outputs)
    if cyclic.size:
        raise CycleDetected("enabled connections contain a directed cycle")
    view = stacked.genome_view(0)
    return TransformedNetwork(view.nodes, view.order, view.conns_expanded,
                              view.input_rows, view.output_rows)


def population_transform(pop: PopulationTensors) -> list[TransformedNetwork]:
    """Transform every genome; aggregates per-genome cycle failures."""
    stacked, cyclic = transform_arrays(pop.nodes, pop.conns, pop.num_inputs, pop.num_outputs)
    if cyclic.size:
        raise CycleDetected(
            f"enabled connections contain a directed cycle in genomes {cyclic.tolist()}",
            genome_indices=cyclic.tolist())
    return [stacked.genome_view(i) for i in range(stacked.size)]


def transform_population_stacked(pop: PopulationTensors) -> StackedNetworks:
    """Stacked-array variant used by the evolution loop and benchmarks."""
    stacked, cyclic = transform_arrays(pop.nodes, pop.conns, pop.num_inputs, pop.num_outputs)
    if cyclic.size:
        raise CycleDetected(
            f"enabled connections contain a directed cycle in genomes {cyclic.tolist()}",
            genome_indices=cyclic.tolist())
    return stacked


# ---------------------------------------------------------------------------
# forward
# ---------------------------------------------------------------------------

def forward_arrays(stacked: StackedNetworks, registry: FunctionRegistry,
                   inputs: np.ndarray) -> np.ndarray:
    """Batched node-value sweep: inputs (P, B, I) -> outputs (P, B, O).

    Node values live in a (P, B, max_nodes) tensor initialized to NaN; each
    step of the order gathers the active node's incoming weight column,
    multiplies by upstream values, aggregates with the node's aggregation
    function (empty aggregation is 0), and applies
    activation(bias + response * aggregated).
    """
    pop, n = stacked.order.shape
    batch = inputs.shape[1]
    rows = np.arange(pop)

    values = np.full((pop, batch, n), np.nan)
    in_idx = np.broadcast_to(stacked.input_rows[:, None, :], inputs.shape)
    np.put_along_axis(values, in_idx, inputs, axis=2)

    is_input_row = np.zeros((pop, n), dtype=bool)
    np.put_along_axis(is_input_row, stacked.input_rows, True, axis=1)

    weighted = np.empty((pop, batch, n))
    for step in range(n):
        row = stacked.order[:, step]
        active = ~np.isnan(row)
        if not active.any():
            break
        ki = np.where(active, row, 0.0).astype(np.int64)
        active &= ~is_input_row[rows, ki]
        if not active.any():
            continue

        node = stacked.nodes[rows, ki]                  # (P, 5)
        weights = stacked.incoming[rows, ki]            # (P, n), contiguous
        np.multiply(weights[:, None, :], values, out=weighted)

        node_agg = node[:, NODE_AGG]
        agg_codes = [code for code in sorted(registry.aggregations)
                     if (active & (node_agg == code)).any()]
        if agg_codes == [0]:
            # pure-sum step: weighted is NaN exactly where no edge exists, so
            # nansum equals the registry's masked sum bit for bit
            aggregated = np.nansum(weighted, axis=-1)
        else:
            mask3 = ~np.isnan(weights)[:, None, :]
            if len(agg_codes) == 1:
                aggregated = registry.aggregation(agg_codes[0])(weighted, mask3)
            else:
                aggregated = np.zeros((pop, batch))
                for code in agg_codes:
                    result = registry.aggregation(code)(weighted, mask3)
                    aggregated = np.where((active & (node_agg == code))[:, None],
                                          result, aggregated)
            # aggregation over the empty set is 0 regardless of the function
            aggregated = np.where((mask3[:, 0, :].sum(axis=1) == 0)[:, None],
                                  0.0, aggregated)

        pre = node[:, NODE_BIAS, None] + node[:, NODE_RESPONSE, None] * aggregated

        node_act = node[:, NODE_ACT]
        act_codes = [code for code in sorted(registry.activations)
                     if (active & (node_act == code)).any()]
        if len(act_codes) == 1:
            out = registry.activation(act_codes[0])(pre)
        else:
            out = np.zeros((pop, batch))
            for code in act_codes:
                out = np.where((active & (node_act == code))[:, None],
                               registry.activation(code)(pre), out)

        if active.all():
            values[rows, :, ki] = out
        else:
            values[rows, :, ki] = np.where(active[:, None], out, values[rows, :, ki])

    out_idx = np.broadcast_to(stacked.output_rows[:, None, :],
                              (pop, batch, stacked.output_rows.shape[1]))
    return np.take_along_axis(values, out_idx, axis=2)


def _check_inputs(arr: np.ndarray, num_inputs: int) -> None:
    if arr.shape[-1] != num_inputs:
        raise InvalidInput(f"expected input length {num_inputs}, got {arr.shape[-1]}")
    if np.isnan(arr).any():
        raise InvalidInput("input contains NaN")


def _as_stack_of_one(tn: TransformedNetwork) -> StackedNetworks:
    return StackedNetworks(nodes=tn.nodes[None], order=tn.order[None],
                           incoming=tn.conns_expanded[:, :, 0].T[None],
                           input_rows=tn.input_rows[None],
                           output_rows=tn.output_rows[None])


def forward(tn: TransformedNetwork, registry: FunctionRegistry | None = None,
            inputs=None) -> np.ndarray:
    """Single input vector (I,) -> output vector (O,)."""
    registry = registry or DEFAULT_REGISTRY
    arr = np.asarray(inputs, dtype=np.float64)
    if arr.ndim != 1:
        raise InvalidInput(f"expected a 1-D input vector, got shape {arr.shape}")
    _check_inputs(arr, tn.input_rows.shape[0])
    return forward_arrays(_as_stack_of_one(tn), registry, arr[None, None, :])[0, 0]


def forward_batch(tn: TransformedNetwork, registry: FunctionRegistry | None = None,
                  inputs=None) -> np.ndarray:
    """Input matrix (B, I) -> output matrix (B, O), vectorized over the batch."""
    registry = registry or DEFAULT_REGISTRY
    arr = np.asarray(inputs, dtype=np.float64)
    if arr.ndim != 2:
        raise InvalidInput(f"expected a (B, I) input matrix, got shape {arr.shape}")
    if arr.shape[0] < 1:
        raise InvalidInput("batch must contain at least one row")
    _check_inputs(arr, tn.input_rows.shape[0])
    return forward_arrays(_as_stack_of_one(tn), registry, arr[None])[0]


def population_forward(transformed, registry: FunctionRegistry | None = None,
                       inputs=None) -> np.ndarray:
    """Per-genome inputs (P, I) or (P, B, I) -> per-genome outputs.

    Elementwise equal (bitwise) to mapping forward over the genomes.
    """
    registry = registry or DEFAULT_REGISTRY
    stacked = transformed if isinstance(transformed, StackedNetworks) \
        else StackedNetworks.from_networks(list(transformed))
    arr = np.asarray(inputs, dtype=np.float64)
    if arr.ndim == 2:
        _check_inputs(arr, stacked.input_rows.shape[1])
        return forward_arrays(stacked, registry, arr[:, None, :])[:, 0, :]
    if arr.ndim == 3:
        _check_inputs(arr, stacked.input_rows.shape[1])
        return forward_arrays(stacked, registry, arr)
    raise InvalidInput(f"expected (P, I) or (P, B, I) inputs, got shape {arr.shape}")


# ---------------------------------------------------------------------------
# DOT export
# ---------------------------------------------------------------------------

def to_dot(genome: GenomeTensors, registry: FunctionRegistry | None = None) -> str:
    """Graphviz rendering: nodes labeled key/bias/activation, disabled edges dashed."""
    registry = registry or DEFAULT_REGISTRY
    lines = ["digraph genome {", "  rankdir=LR;"]
    n_in, n_out = genome.num_inputs, genome.num_outputs
    for row in genome.nodes:
        if np.isnan(row[NODE_KEY]):
            continue
        key = int(row[NODE_KEY])
        act_name = registry.activations.get(int(row[NODE_ACT]), ("?",))[0]
        shape = ("box" if key < n_in else
                 "doublecircle" if key < n_in + n_out else "circle")
        lines.append(f'  n{key} [shape={shape}, '
                     f'label="{key}\\nb={row[NODE_BIAS]:.3f}\\n{act_name}"];')
    for row in genome.conns:
        if np.isnan(row[CONN_IN]):
            continue
        style = ', style=dashed' if row[CONN_ENABLED] == 0.0 else ''
        lines.append(f'  n{int(row[CONN_IN])} -> n{int(row[CONN_OUT])} '
                     f'[label="{row[CONN_WEIGHT]:.3f}"{style}];')
    lines.append("}")
    return "\n".join(lines) + "\n"
