"""Instance data model: covering and minimax programs, sparsity statistics,
seeded generators, and the JSON wire format.

A covering instance is min c.x subject to A x >= b over nonnegative integer
vectors x, with A entries in [0, 1], demands b >= 1, and every cost vector
max-normalized to 1.  A minimax instance partitions its columns into groups,
picks exactly one column per group, and minimizes the maximum row load.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "InstanceError",
    "ParseError",
    "GenerationError",
    "CipInstance",
    "MipInstance",
    "FractionalSolution",
    "SparsityStats",
    "sparsity_stats",
    "row_cover",
    "gen_set_cover",
    "gen_facility_location",
    "gen_hypergraph_partition",
    "parse_instance",
    "serialize_instance",
]

DEMAND_INTEGRALITY_TOL = 1e-9


class InstanceError(ValueError):
    """An instance violates a structural invariant."""


class ParseError(ValueError):
    """A serialized instance document is malformed."""


class GenerationError(ValueError):
    """Generator parameters cannot yield a feasible instance."""


def _frozen(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


def _column_adjacency(a_matrix: np.ndarray) -> list[np.ndarray]:
    return [_frozen(np.flatnonzero(a_matrix[:, j] > 0.0)) for j in range(a_matrix.shape[1])]


def _row_adjacency(a_matrix: np.ndarray) -> list[np.ndarray]:
    return [_frozen(np.flatnonzero(a_matrix[i] > 0.0)) for i in range(a_matrix.shape[0])]


@dataclass(frozen=True, eq=False)
class CipInstance:
    """A covering program.  Build through :meth:`create`, which validates and
    normalizes; the raw constructor trusts its arguments."""

    a_matrix: np.ndarray  # (m, n), entries in [0, 1]
    demands: np.ndarray  # (m,), each >= 1
    costs: tuple[np.ndarray, ...]  # each max-normalized to 1
    cost_scales: tuple[float, ...]  # divisor applied to each raw cost vector
    col_rows: list[np.ndarray] = field(repr=False)
    row_cols: list[np.ndarray] = field(repr=False)

    @property
    def m(self) -> int:
        return self.a_matrix.shape[0]

    @property
    def n(self) -> int:
        return self.a_matrix.shape[1]

    @property
    def n_criteria(self) -> int:
        return len(self.costs)

    @classmethod
    def create(cls, a_matrix, demands, costs) -> "CipInstance":
        a_matrix = np.asarray(a_matrix, dtype=float)
        demands = np.asarray(demands, dtype=float)
        if a_matrix.ndim != 2:
            raise InstanceError("constraint matrix must be two-dimensional")
        m, n = a_matrix.shape
        if m < 1 or n < 1:
            raise InstanceError("instance needs at least one row and one column")
        if np.any(a_matrix < 0.0) or np.any(a_matrix > 1.0):
            raise InstanceError("constraint entries must lie in [0, 1]")
        if demands.shape != (m,):
            raise InstanceError(f"expected {m} demands, got shape {demands.shape}")
        if np.any(demands < 1.0):
            raise InstanceError("every demand must be at least 1")
        if not all(np.any(a_matrix[i] > 0.0) for i in range(m)):
            raise InstanceError("every row must have a positive entry")
        if np.all((a_matrix == 0.0) | (a_matrix == 1.0)):
            rounded = np.rint(demands)
            if np.any(np.abs(demands - rounded) > DEMAND_INTEGRALITY_TOL):
                raise InstanceError(
                    "demands must be integral when the constraint matrix is 0/1"
                )
            demands = rounded
        normalized: list[np.ndarray] = []
        scales: list[float] = []
        for idx, cost in enumerate(costs):
            cost = np.asarray(cost, dtype=float)
            if cost.shape != (n,):
                raise InstanceError(f"cost vector {idx} must have length {n}")
            if np.any(cost < 0.0):
                raise InstanceError(f"cost vector {idx} has negative entries")
            top = float(cost.max())
            if top <= 0.0:
                raise InstanceError(f"cost vector {idx} must have a positive entry")
            normalized.append(_frozen(cost / top))
            scales.append(top)
        if not normalized:
            raise InstanceError("at least one cost vector is required")
        return cls(
            a_matrix=_frozen(a_matrix),
            demands=_frozen(demands),
            costs=tuple(normalized),
            cost_scales=tuple(scales),
            col_rows=_column_adjacency(a_matrix),
            row_cols=_row_adjacency(a_matrix),
        )


@dataclass(frozen=True, eq=False)
class MipInstance:
    """A minimax program: one column per group is selected."""

    a_matrix: np.ndarray  # (m, N), entries in [0, 1]
    group_sizes: tuple[int, ...]
    offsets: tuple[int, ...]  # column offset of each group's first slot
    col_rows: list[np.ndarray] = field(repr=False)

    @property
    def m(self) -> int:
        return self.a_matrix.shape[0]

    @property
    def n_cols(self) -> int:
        return self.a_matrix.shape[1]

    @property
    def n_groups(self) -> int:
        return len(self.group_sizes)

    def group_slice(self, group: int) -> slice:
        start = self.offsets[group]
        return slice(start, start + self.group_sizes[group])

    @classmethod
    def create(cls, a_matrix, group_sizes) -> "MipInstance":
        a_matrix = np.asarray(a_matrix, dtype=float)
        if a_matrix.ndim != 2:
            raise InstanceError("constraint matrix must be two-dimensional")
        sizes = tuple(int(s) for s in group_sizes)
        if any(s < 1 for s in sizes):
            raise InstanceError("every group needs at least one slot")
        if sum(sizes) != a_matrix.shape[1]:
            raise InstanceError(
                f"group sizes sum to {sum(sizes)} but the matrix has "
                f"{a_matrix.shape[1]} columns"
            )
        if a_matrix.shape[0] < 1:
            raise InstanceError("instance needs at least one row")
        if np.any(a_matrix < 0.0) or np.any(a_matrix > 1.0):
            raise InstanceError("constraint entries must lie in [0, 1]")
        offsets = tuple(int(o) for o in np.concatenate([[0], np.cumsum(sizes)[:-1]]))
        return cls(
            a_matrix=_frozen(a_matrix),
            group_sizes=sizes,
            offsets=offsets,
            col_rows=_column_adjacency(a_matrix),
        )


@dataclass(frozen=True)
class FractionalSolution:
    """A fractional point plus its objective value(s) and worst violation."""

    x: np.ndarray
    objective_values: tuple[float, ...]
    feasibility_slack: float


@dataclass(frozen=True)
class SparsityStats:
    """Column sparsity a, column mass g, and group-row incidence t.

    Always g <= a <= t; for covering instances t coincides with a.
    """

    a: int
    g: float
    t: int


def sparsity_stats(instance) -> SparsityStats:
    counts = [len(rows) for rows in instance.col_rows]
    a = max(counts) if counts else 0
    g = float(instance.a_matrix.sum(axis=0).max()) if instance.a_matrix.size else 0.0
    if isinstance(instance, MipInstance):
        t = 0
        for group in range(instance.n_groups):
            sl = instance.group_slice(group)
            touched = np.unique(
                np.concatenate([instance.col_rows[j] for j in range(sl.start, sl.stop)])
                if sl.stop > sl.start
                else np.empty(0, dtype=int)
            )
            t = max(t, len(touched))
        t = max(t, a)
    else:
        t = a
    return SparsityStats(a=a, g=g, t=t)


def row_cover(instance, cols) -> set[int]:
    """Rows with a nonzero coefficient on any of the given columns.

    `cols` must be strictly increasing and in range; the result has at most
    a * len(cols) members.
    """
    previous = -1
    for c in cols:
        if not 0 <= c < instance.a_matrix.shape[1]:
            raise ValueError(f"column index {c} out of range")
        if c <= previous:
            raise ValueError("column indices must be strictly increasing")
        previous = c
    covered: set[int] = set()
    for c in cols:
        covered.update(int(r) for r in instance.col_rows[c])
    return covered


# ---------------------------------------------------------------------------
# Generators.  All randomness flows through one numpy Generator per call, so
# a (parameters, seed) pair pins the instance bit-for-bit.
# ---------------------------------------------------------------------------


def gen_set_cover(n_elems: int, n_sets: int, max_set_size: int, demand: int, seed: int) -> CipInstance:
    """Unit-cost covering instance over random sets.

    Every element is placed in at least demand+1 sets (spread over the least
    loaded sets first), so the relaxation is feasible by construction.
    """
    if n_elems < 1 or n_sets < 1 or max_set_size < 1 or demand < 1:
        raise GenerationError("all parameters must be positive")
    if n_sets < demand + 1:
        raise GenerationError(f"need at least {demand + 1} sets for demand {demand}")
    if n_sets * max_set_size < n_elems * (demand + 1):
        raise GenerationError(
            "capacity n_sets*max_set_size cannot cover every element demand+1 times"
        )
    rng = np.random.default_rng(seed)
    members: list[set[int]] = [set() for _ in range(n_sets)]
    loads = np.zeros(n_sets, dtype=int)
    for elem in range(n_elems):
        open_sets = [s for s in range(n_sets) if loads[s] < max_set_size]
        jitter = rng.random(len(open_sets))
        ranked = sorted(range(len(open_sets)), key=lambda i: (loads[open_sets[i]], jitter[i]))
        if len(ranked) < demand + 1:
            raise GenerationError("ran out of set capacity while spreading coverage")
        for i in ranked[: demand + 1]:
            members[open_sets[i]].add(elem)
            loads[open_sets[i]] += 1
    # Sprinkle extra memberships into the remaining capacity for texture.
    for s in range(n_sets):
        spare = max_set_size - loads[s]
        if spare <= 0:
            continue
        extras = rng.integers(0, spare + 1)
        pool = [e for e in range(n_elems) if e not in members[s]]
        if extras and pool:
            chosen = rng.choice(len(pool), size=min(extras, len(pool)), replace=False)
            members[s].update(pool[i] for i in chosen)
    a_matrix = np.zeros((n_elems, n_sets))
    for s, elems in enumerate(members):
        for e in elems:
            a_matrix[e, s] = 1.0
    demands = np.full(n_elems, float(demand))
    return CipInstance.create(a_matrix, demands, [np.ones(n_sets)])


def gen_facility_location(n_nodes: int, max_in_degree: int, demand: int, seed: int) -> CipInstance:
    """Covering instance on a random digraph: row v demands `demand` open
    facilities among v's out-neighborhood (self-loops allowed), costs random.

    In-degrees stay at most max_in_degree, so column sparsity is at most
    max_in_degree + 1 counting the self-loop.
    """
    if n_nodes < 2 or max_in_degree < 1 or demand < 1:
        raise GenerationError("need n_nodes >= 2, max_in_degree >= 1, demand >= 1")
    if max_in_degree < demand:
        raise GenerationError("max_in_degree must be at least the demand")
    if n_nodes <= demand:
        raise GenerationError("need more nodes than the demand")
    rng = np.random.default_rng(seed)
    in_deg = np.zeros(n_nodes, dtype=int)
    out: list[set[int]] = [set() for _ in range(n_nodes)]
    for v in rng.permutation(n_nodes):
        v = int(v)
        want = int(rng.integers(demand, max_in_degree + 1))
        candidates = [u for u in range(n_nodes) if u != v and in_deg[u] < max_in_degree]
        jitter = rng.random(len(candidates))
        ranked = sorted(range(len(candidates)), key=lambda i: (in_deg[candidates[i]], jitter[i]))
        for i in ranked[:want]:
            out[v].add(candidates[i])
            in_deg[candidates[i]] += 1
        if len(out[v]) < demand:
            out[v].add(v)  # self-loop tops up the row without charging in-degree
        if len(out[v]) < demand:
            raise GenerationError("could not reach the demanded out-degree")
    a_matrix = np.zeros((n_nodes, n_nodes))
    for v in range(n_nodes):
        for u in out[v]:
            a_matrix[v, u] = 1.0
    costs = rng.uniform(0.3, 1.0, n_nodes)
    return CipInstance.create(a_matrix, np.full(n_nodes, float(demand)), [costs])


def gen_hypergraph_partition(
    n_verts: int, n_edges: int, degree_cap: int, n_parts: int, seed: int
) -> MipInstance:
    """Minimax instance: assign each vertex to one of n_parts parts, loads are
    (edge, part) incidence counts.  Vertex degrees stay at most degree_cap."""
    if n_verts < 2 or n_edges < 1 or degree_cap < 1 or n_parts < 2:
        raise GenerationError("need n_verts >= 2, n_edges >= 1, degree_cap >= 1, n_parts >= 2")
    if n_verts * degree_cap < 2 * n_edges:
        raise GenerationError("degree capacity too small for the requested edges")
    rng = np.random.default_rng(seed)
    capacity = n_verts * degree_cap
    sizes = rng.integers(2, min(4, n_verts) + 1, size=n_edges)
    for e in range(n_edges):  # shrink until the capacity precheck is honoured
        if sizes.sum() <= capacity:
            break
        sizes[e] = 2
    deg = np.zeros(n_verts, dtype=int)
    edges: list[np.ndarray] = []
    for size in sizes:
        # filling the least-loaded vertices first keeps the degree spread at 1,
        # which makes running out of capacity impossible while sum(sizes) fits
        order = rng.permutation(n_verts)
        order = order[np.argsort(deg[order], kind="stable")]
        chosen = np.array([v for v in order if deg[v] < degree_cap][: int(size)])
        if len(chosen) < size:
            raise GenerationError("ran out of degree capacity while placing edges")
        deg[chosen] += 1
        edges.append(np.sort(chosen))
    m = n_edges * n_parts
    n_cols = n_verts * n_parts
    a_matrix = np.zeros((m, n_cols))
    for j, edge in enumerate(edges):
        for part in range(n_parts):
            row = j * n_parts + part
            for v in edge:
                a_matrix[row, v * n_parts + part] = 1.0
    return MipInstance.create(a_matrix, [n_parts] * n_verts)


# ---------------------------------------------------------------------------
# Wire format: {"kind", "m", "n" | "groups", "A": [[row, col, value], ...],
# "b", "costs"}, triplets sorted by (row, col), zeros and duplicates rejected.
# ---------------------------------------------------------------------------


def _require(doc: dict, key: str):
    if key not in doc:
        raise ParseError(f'missing field "{key}"')
    return doc[key]


def _read_triplets(doc: dict, m: int, n: int) -> np.ndarray:
    triplets = _require(doc, "A")
    if not isinstance(triplets, list):
        raise ParseError('field "A" must be a list of [row, col, value] triplets')
    a_matrix = np.zeros((m, n))
    previous: tuple[int, int] | None = None
    for pos, entry in enumerate(triplets):
        if not (isinstance(entry, list) and len(entry) == 3):
            raise ParseError(f'field "A" entry {pos} is not a [row, col, value] triplet')
        row, col, value = entry
        if not isinstance(row, int) or not isinstance(col, int):
            raise ParseError(f'field "A" entry {pos} has non-integer indices')
        if not 0 <= row < m:
            raise ParseError(f'field "A" entry {pos}: row {row} out of range [0, {m})')
        if not 0 <= col < n:
            raise ParseError(f'field "A" entry {pos}: col {col} out of range [0, {n})')
        value = float(value)
        if value == 0.0:
            raise ParseError(f'field "A" entry {pos} has value 0; omit zero entries')
        if previous is not None and (row, col) <= previous:
            if (row, col) == previous:
                raise ParseError(f'field "A" entry {pos} duplicates ({row}, {col})')
            raise ParseError('field "A" triplets must be sorted by (row, col)')
        previous = (row, col)
        a_matrix[row, col] = value
    return a_matrix


def parse_instance(text: str):
    """Parse a serialized instance; returns a CipInstance or MipInstance."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON at line {exc.lineno}: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise ParseError("instance document must be a JSON object")
    kind = _require(doc, "kind")
    m = _require(doc, "m")
    if not isinstance(m, int) or m < 1:
        raise ParseError('field "m" must be a positive integer')
    if kind == "cip":
        n = _require(doc, "n")
        if not isinstance(n, int) or n < 1:
            raise ParseError('field "n" must be a positive integer')
        a_matrix = _read_triplets(doc, m, n)
        demands = _require(doc, "b")
        costs = _require(doc, "costs")
        if not isinstance(demands, list) or len(demands) != m:
            raise ParseError(f'field "b" must be a list of {m} demands')
        if not isinstance(costs, list) or not costs:
            raise ParseError('field "costs" must be a non-empty list of cost vectors')
        try:
            return CipInstance.create(a_matrix, demands, costs)
        except InstanceError as exc:
            raise ParseError(str(exc)) from None
    if kind == "mip":
        groups = _require(doc, "groups")
        if not isinstance(groups, list) or not groups:
            raise ParseError('field "groups" must be a non-empty list of group sizes')
        n = int(sum(groups))
        a_matrix = _read_triplets(doc, m, n)
        try:
            return MipInstance.create(a_matrix, groups)
        except InstanceError as exc:
            raise ParseError(str(exc)) from None
    raise ParseError(f'field "kind" must be "cip" or "mip", got {kind!r}')


def serialize_instance(instance) -> str:
    """Deterministic JSON for an instance; triplets sorted by (row, col)."""
    a_matrix = instance.a_matrix
    triplets = [
        [int(r), int(c), float(a_matrix[r, c])]
        for r in range(a_matrix.shape[0])
        for c in range(a_matrix.shape[1])
        if a_matrix[r, c] != 0.0
    ]
    if isinstance(instance, CipInstance):
        doc = {
            "kind": "cip",
            "m": instance.m,
            "n": instance.n,
            "A": triplets,
            "b": [float(b) for b in instance.demands],
            "costs": [[float(c) for c in cost] for cost in instance.costs],
        }
    else:
        doc = {
            "kind": "mip",
            "m": instance.m,
            "groups": list(instance.group_sizes),
            "A": triplets,
        }
    return json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n"
