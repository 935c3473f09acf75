"""Periodic graphs and their finite truncations.

A periodic graph is stored through its quotient data: labeled vertices of one
fundamental cell plus oriented cell edges (origin, terminus, integer lattice
offset).  Each unoriented edge is stored once; the reverse orientation is
implied (offset negated, magnetic phases negated).  Finite realizations keep
the cells with offsets in [-L, L]^d and drop edges leaving the box (Dirichlet
truncation), so the truncated operator matches the infinite-volume one locally.

Vertex ordering is lexicographic in (cell offset, cell-vertex label), which
makes every assembled matrix reproducible bit-for-bit across runs.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, IsolatedVertex, MalformedSpec


@dataclass(frozen=True)
class CellEdge:
    """One stored orientation of an unoriented quotient edge."""

    origin: int
    terminus: int
    offset: tuple[int, ...]


@dataclass(frozen=True)
class PeriodicGraph:
    """Quotient data of a lattice-periodic graph.

    periods holds the lattice basis row-wise; positions are fundamental-cell
    coordinates used only as metadata for decay weights (no formula below
    depends on the embedding).
    """

    dimension: int
    periods: np.ndarray
    vertex_labels: tuple[str, ...]
    positions: np.ndarray
    cell_edges: tuple[CellEdge, ...]

    @property
    def nu(self) -> int:
        return len(self.vertex_labels)

    @property
    def n_cell_edges(self) -> int:
        return len(self.cell_edges)

    @property
    def degrees(self) -> np.ndarray:
        """Oriented-edge count at each cell vertex (loops contribute twice)."""
        deg = np.zeros(self.nu, dtype=int)
        for e in self.cell_edges:
            deg[e.origin] += 1
            deg[e.terminus] += 1
        return deg

    @property
    def kappa_plus(self) -> int:
        return int(self.degrees.max())

    def oriented_edges(self):
        """Yield (origin, terminus, offset, sign, cell_edge_index) for both orientations.

        sign = +1 for the stored orientation, -1 for the reverse; magnetic
        values on the reverse edge are sign * stored value.
        """
        for idx, e in enumerate(self.cell_edges):
            off = np.array(e.offset, dtype=int)
            yield e.origin, e.terminus, off, +1, idx
            yield e.terminus, e.origin, -off, -1, idx

    def vertex_position(self, label_index: int, offset: np.ndarray) -> np.ndarray:
        return offset @ self.periods + self.positions[label_index]


def build_periodic_graph(spec) -> PeriodicGraph:
    """Build a periodic graph from a spec document.

    Accepts a dict, a JSON string, or a path-like pointing at a JSON file.
    Schema (unknown keys rejected):

        dimension : int >= 1
        periods   : optional, d vectors of length d (default standard basis)
        vertices  : list of labels, or of {"label": str, "position": [floats]}
        edges     : list of [from_label, to_label, offset_vector]
    """
    doc = _load_document(spec)

    allowed = {"dimension", "periods", "vertices", "edges"}
    unknown = set(doc) - allowed
    if unknown:
        raise MalformedSpec(f"unknown keys in graph spec: {sorted(unknown)}")
    for key in ("dimension", "vertices", "edges"):
        if key not in doc:
            raise MalformedSpec(f"graph spec missing key {key!r}")

    d = doc["dimension"]
    if not isinstance(d, int) or d < 1:
        raise MalformedSpec(f"dimension must be an integer >= 1, got {d!r}")

    periods = np.asarray(doc.get("periods", np.eye(d)), dtype=float)
    if periods.shape != (d, d):
        raise DimensionMismatch(
            f"periods must be {d} vectors of length {d}, got shape {periods.shape}"
        )

    labels: list[str] = []
    positions: list[list[float]] = []
    for entry in doc["vertices"]:
        if isinstance(entry, str):
            labels.append(entry)
            positions.append([0.0] * d)
        elif isinstance(entry, dict) and set(entry) <= {"label", "position"}:
            labels.append(entry["label"])
            pos = entry.get("position", [0.0] * d)
            if len(pos) != d:
                raise DimensionMismatch(
                    f"position of vertex {entry['label']!r} has length {len(pos)}, expected {d}"
                )
            positions.append([float(c) for c in pos])
        else:
            raise MalformedSpec(f"bad vertex entry: {entry!r}")
    if len(set(labels)) != len(labels):
        raise MalformedSpec("vertex labels must be unique")
    if not labels:
        raise MalformedSpec("graph spec declares no vertices")
    index = {lab: i for i, lab in enumerate(labels)}

    edges: list[CellEdge] = []
    for entry in doc["edges"]:
        try:
            frm, to, off = entry
        except (TypeError, ValueError):
            raise MalformedSpec(f"bad edge entry: {entry!r}") from None
        if frm not in index or to not in index:
            raise MalformedSpec(f"edge {entry!r} references unknown vertex")
        off = list(off)
        if len(off) != d:
            raise DimensionMismatch(
                f"edge {entry!r} offset has length {len(off)}, expected {d}"
            )
        if not all(isinstance(c, int) or float(c).is_integer() for c in off):
            raise MalformedSpec(f"edge {entry!r} offset must be integers")
        edges.append(CellEdge(index[frm], index[to], tuple(int(c) for c in off)))

    graph = PeriodicGraph(
        dimension=d,
        periods=periods,
        vertex_labels=tuple(labels),
        positions=np.asarray(positions, dtype=float),
        cell_edges=tuple(edges),
    )
    deg = graph.degrees
    if (deg == 0).any():
        bad = [labels[i] for i in np.flatnonzero(deg == 0)]
        raise IsolatedVertex(f"vertices with degree 0: {bad}")
    return graph


def _load_document(spec):
    if isinstance(spec, dict):
        return spec
    looks_like_json = (
        isinstance(spec, str) and spec.lstrip().startswith("{")
    ) or (isinstance(spec, bytes) and spec.lstrip().startswith(b"{"))
    if looks_like_json:
        try:
            return json.loads(spec)
        except json.JSONDecodeError as exc:
            raise MalformedSpec(f"graph spec is not valid JSON: {exc}") from exc
    # anything else is a path
    try:
        with open(spec) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise MalformedSpec(f"cannot load graph spec {spec!r}: {exc}") from exc


def hypercubic(d: int) -> PeriodicGraph:
    """Z^d: one cell vertex, one loop edge per axis."""
    return build_periodic_graph(
        {
            "dimension": d,
            "vertices": ["o"],
            "edges": [["o", "o", [1 if j == i else 0 for j in range(d)]] for i in range(d)],
        }
    )


@dataclass(frozen=True)
class FiniteLattice:
    """Dirichlet truncation of a periodic graph to cells in [-L, L]^d.

    Edge arrays hold one entry per retained unoriented edge in the stored
    orientation; edge_cell carries the index of the quotient edge it
    replicates, so cell-edge potentials broadcast with a plain take.
    """

    graph: PeriodicGraph
    radius: int
    offsets: np.ndarray = field(repr=False)       # (N, d) cell offset per vertex
    cell_index: np.ndarray = field(repr=False)    # (N,) cell-vertex label index
    positions: np.ndarray = field(repr=False)     # (N, d) Euclidean positions
    edge_origin: np.ndarray = field(repr=False)   # (n_edges,) vertex indices
    edge_terminus: np.ndarray = field(repr=False)
    edge_cell: np.ndarray = field(repr=False)     # (n_edges,) quotient edge index

    @property
    def n_vertices(self) -> int:
        return self.offsets.shape[0]

    @property
    def n_edges(self) -> int:
        return self.edge_origin.shape[0]

    def vertex_index(self, offset, label_index: int) -> int:
        """Lexicographic (cell offset, label) -> 0..N-1."""
        L, d = self.radius, self.graph.dimension
        off = np.asarray(offset, dtype=int)
        if off.shape != (d,) or (np.abs(off) > L).any():
            raise IndexError(f"offset {offset} outside [-{L},{L}]^{d}")
        cell = int(np.ravel_multi_index(off + L, (2 * L + 1,) * d))
        return cell * self.graph.nu + label_index

    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.n_vertices, dtype=int)
        np.add.at(deg, self.edge_origin, 1)
        np.add.at(deg, self.edge_terminus, 1)
        return deg

    def radial_distance(self) -> np.ndarray:
        """Euclidean |x| per vertex, used by decay weights."""
        return np.linalg.norm(self.positions, axis=1)


def truncate(graph: PeriodicGraph, L: int) -> FiniteLattice:
    """Realize the graph on cells with offsets in [-L, L]^d."""
    if L < 1:
        raise ValueError(f"truncation radius must be >= 1, got {L}")
    d, nu = graph.dimension, graph.nu
    side = 2 * L + 1
    cells = np.array(list(itertools.product(range(-L, L + 1), repeat=d)), dtype=int)
    n_cells = cells.shape[0]

    offsets = np.repeat(cells, nu, axis=0)
    cell_index = np.tile(np.arange(nu), n_cells)
    positions = offsets @ graph.periods + graph.positions[cell_index]

    origins, termini, which = [], [], []
    cell_rank = np.arange(n_cells)
    for idx, e in enumerate(graph.cell_edges):
        off = np.array(e.offset, dtype=int)
        target = cells + off
        keep = (np.abs(target) <= L).all(axis=1)
        src = cell_rank[keep] * nu + e.origin
        dst_cells = np.ravel_multi_index((target[keep] + L).T, (side,) * d)
        dst = dst_cells * nu + e.terminus
        origins.append(src)
        termini.append(dst)
        which.append(np.full(src.shape, idx, dtype=int))

    if origins:
        edge_origin = np.concatenate(origins)
        edge_terminus = np.concatenate(termini)
        edge_cell = np.concatenate(which)
    else:
        edge_origin = edge_terminus = edge_cell = np.zeros(0, dtype=int)

    return FiniteLattice(
        graph=graph,
        radius=L,
        offsets=offsets,
        cell_index=cell_index,
        positions=positions,
        edge_origin=edge_origin,
        edge_terminus=edge_terminus,
        edge_cell=edge_cell,
    )


@dataclass
class StateVector:
    """Complex amplitudes over the vertices of a finite lattice."""

    lattice: FiniteLattice
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex)
        if self.values.shape != (self.lattice.n_vertices,):
            raise ValueError(
                f"state has {self.values.shape} amplitudes, lattice has "
                f"{self.lattice.n_vertices} vertices"
            )

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.values))


def amplitudes(f, lat: FiniteLattice | None = None) -> np.ndarray:
    """Accept a StateVector or a bare array and return the amplitude array."""
    if isinstance(f, StateVector):
        return f.values
    arr = np.asarray(f, dtype=complex)
    if lat is not None and arr.shape != (lat.n_vertices,):
        raise ValueError(f"amplitude array shape {arr.shape} does not match lattice")
    return arr


def boundary_mass(f, shell: int, lat: FiniteLattice | None = None) -> float:
    """Sum of |f_x|^2 over vertices whose cell offset has sup-norm > L - shell.

    Used to flag reflection off the Dirichlet wall: a propagated state with
    appreciable boundary mass no longer mimics the infinite-volume dynamics.
    """
    if isinstance(f, StateVector):
        lat = f.lattice
    if lat is None:
        raise ValueError("boundary_mass needs a lattice (pass a StateVector or lat=)")
    if not 0 <= shell <= lat.radius:
        raise ValueError(f"shell must be within 0..{lat.radius}, got {shell}")
    vals = amplitudes(f, lat)
    sup = np.abs(lat.offsets).max(axis=1)
    mask = sup > lat.radius - shell
    return float(np.sum(np.abs(vals[mask]) ** 2))
