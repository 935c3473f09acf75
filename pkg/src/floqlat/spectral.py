"""Static operators: magnetic Laplacian, Schrodinger operator, Bloch fibers, bands.

The combinatorial magnetic Laplacian acts as

    (Delta_alpha f)_x = 1/2 * sum_{e=(x,y)} (f_x - exp(i*alpha(e)) f_y),

summing over oriented edges leaving x.  Its spectrum lies in [0, kappa_plus].
Antisymmetry alpha(reverse e) = -alpha(e) is structural: one value is stored
per unoriented edge and negated on reversal.

Fiber convention (frozen): an edge with lattice offset n contributes the phase
exp(i*<n, k>) on top of its magnetic phase.  Any fixed convention gives
unitarily equivalent fibers; this one is validated against an independently
assembled ring operator in the tests.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import EigensolverFailure, PotentialShapeMismatch
from .lattice import FiniteLattice, PeriodicGraph

FLAT_BAND_TOL = 1e-9


@dataclass(frozen=True)
class StaticMagneticPotential:
    """One phase (radians) per stored cell edge; reversal negates."""

    graph: PeriodicGraph
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != (self.graph.n_cell_edges,):
            raise PotentialShapeMismatch(
                f"magnetic potential has {vals.shape} values, graph has "
                f"{self.graph.n_cell_edges} cell edges"
            )
        object.__setattr__(self, "values", vals)

    @classmethod
    def zero(cls, graph: PeriodicGraph) -> "StaticMagneticPotential":
        return cls(graph, np.zeros(graph.n_cell_edges))

    @classmethod
    def constant(cls, graph: PeriodicGraph, phi: float) -> "StaticMagneticPotential":
        return cls(graph, np.full(graph.n_cell_edges, float(phi)))

    @classmethod
    def random(cls, graph: PeriodicGraph, rng, scale: float = np.pi) -> "StaticMagneticPotential":
        return cls(graph, rng.uniform(-scale, scale, graph.n_cell_edges))


@dataclass(frozen=True)
class StaticElectricPotential:
    """Real value per cell vertex, replicated over cells."""

    graph: PeriodicGraph
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != (self.graph.nu,):
            raise PotentialShapeMismatch(
                f"electric potential has {vals.shape} values, graph has {self.graph.nu} vertices"
            )
        if not np.isfinite(vals).all():
            raise PotentialShapeMismatch("electric potential has non-finite entries")
        object.__setattr__(self, "values", vals)

    @classmethod
    def zero(cls, graph: PeriodicGraph) -> "StaticElectricPotential":
        return cls(graph, np.zeros(graph.nu))

    @classmethod
    def constant(cls, graph: PeriodicGraph, c: float) -> "StaticElectricPotential":
        return cls(graph, np.full(graph.nu, float(c)))


def _hopping_phases(lat: FiniteLattice, alpha: StaticMagneticPotential | None) -> np.ndarray:
    if alpha is None:
        return np.zeros(lat.n_edges)
    if alpha.graph is not lat.graph and alpha.graph.n_cell_edges != lat.graph.n_cell_edges:
        raise PotentialShapeMismatch("magnetic potential built for a different graph")
    return alpha.values[lat.edge_cell]


def laplacian_from_phases(lat: FiniteLattice, phases: np.ndarray) -> sp.csr_matrix:
    """Assemble Delta_alpha on the truncation from per-edge phases (stored orientation)."""
    n = lat.n_vertices
    i, j = lat.edge_origin, lat.edge_terminus
    hop = -0.5 * np.exp(1j * phases)
    rows = np.concatenate([i, j, np.arange(n)])
    cols = np.concatenate([j, i, np.arange(n)])
    data = np.concatenate([hop, np.conj(hop), 0.5 * lat.degrees().astype(complex)])
    mat = sp.csr_matrix((data, (rows, cols)), shape=(n, n))
    if np.abs(mat.data.imag).max(initial=0.0) == 0.0:
        mat = sp.csr_matrix((mat.data.real, mat.indices, mat.indptr), shape=(n, n))
    return mat


def magnetic_laplacian(lat: FiniteLattice, alpha: StaticMagneticPotential | None = None) -> sp.csr_matrix:
    """Magnetic Laplacian on the truncation; Hermitian, <= kappa_plus + 1 entries per row."""
    return laplacian_from_phases(lat, _hopping_phases(lat, alpha))


def schrodinger(
    lat: FiniteLattice,
    alpha: StaticMagneticPotential | None = None,
    p: StaticElectricPotential | None = None,
) -> sp.csr_matrix:
    """h_alpha = Delta_alpha + p on the truncation."""
    h = magnetic_laplacian(lat, alpha)
    if p is not None:
        if p.graph.nu != lat.graph.nu:
            raise PotentialShapeMismatch("electric potential built for a different graph")
        diag = p.values[lat.cell_index]
        h = h + sp.diags(diag.astype(h.dtype))
    return h.tocsr()


def fiber_operator(
    graph: PeriodicGraph,
    alpha: StaticMagneticPotential | None,
    p: StaticElectricPotential | None,
    k,
) -> np.ndarray:
    """Bloch fiber h_alpha(k): nu x nu, Hermitian by construction.

    Diagonal carries kappa_x / 2 + p_x; each stored edge (u, v, offset n)
    with phase a contributes -1/2 exp(i(a + <n,k>)) to (u, v) and the
    conjugate to (v, u).
    """
    k = np.asarray(k, dtype=float)
    if k.shape != (graph.dimension,):
        raise ValueError(f"k must have length {graph.dimension}")
    nu = graph.nu
    h = np.zeros((nu, nu), dtype=complex)
    avals = alpha.values if alpha is not None else np.zeros(graph.n_cell_edges)
    for idx, e in enumerate(graph.cell_edges):
        phase = avals[idx] + np.dot(e.offset, k)
        amp = -0.5 * np.exp(1j * phase)
        h[e.origin, e.terminus] += amp
        h[e.terminus, e.origin] += np.conj(amp)
    h[np.diag_indices(nu)] += graph.degrees / 2.0
    if p is not None:
        h[np.diag_indices(nu)] += p.values
    return h


@dataclass
class BandStructure:
    """Eigenvalue sheets over a uniform quasimomentum grid.

    sheets[i, j] is the j-th (sorted ascending) eigenvalue at grid point i;
    flat sheets carry their constant value in flat_values.
    """

    k_grid: np.ndarray       # (n_points, d)
    sheets: np.ndarray       # (n_points, nu)
    band_intervals: np.ndarray  # (nu, 2)
    flat_flags: np.ndarray   # (nu,) bool
    flat_values: np.ndarray  # (nu,) float, NaN when not flat
    n_k: int

    @property
    def nu(self) -> int:
        return self.sheets.shape[1]

    def union_spectrum(self) -> list[tuple[float, float]]:
        """Union of the band intervals, merged into disjoint intervals."""
        return merge_intervals([tuple(iv) for iv in self.band_intervals])

    def to_csv(self, path) -> None:
        d = self.k_grid.shape[1]
        header = ",".join([f"k_{i+1}" for i in range(d)] + [f"lambda_{j+1}" for j in range(self.nu)])
        data = np.hstack([self.k_grid, self.sheets])
        np.savetxt(path, data, delimiter=",", header=header, comments="", fmt="%.17g")

    def summary(self) -> dict:
        return {
            "n_k": self.n_k,
            "band_intervals": [[float(a), float(b)] for a, b in self.band_intervals],
            "union_spectrum": [[float(a), float(b)] for a, b in self.union_spectrum()],
            "flat_flags": [bool(f) for f in self.flat_flags],
            "flat_values": [None if np.isnan(v) else float(v) for v in self.flat_values],
        }

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.summary(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def merge_intervals(intervals):
    ivs = sorted((float(a), float(b)) for a, b in intervals)
    merged: list[list[float]] = []
    for a, b in ivs:
        if merged and a <= merged[-1][1]:
            merged[-1][1] = max(merged[-1][1], b)
        else:
            merged.append([a, b])
    return [tuple(iv) for iv in merged]


def k_grid(dimension: int, n_k: int) -> np.ndarray:
    """Uniform grid on [0, 2pi)^d containing k=0 (and k=pi per axis for even n_k)."""
    if n_k < 2:
        raise ValueError("n_k must be >= 2")
    axis = 2.0 * np.pi * np.arange(n_k) / n_k
    grids = np.meshgrid(*([axis] * dimension), indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1)


def band_structure(
    graph: PeriodicGraph,
    alpha: StaticMagneticPotential | None = None,
    p: StaticElectricPotential | None = None,
    n_k: int = 64,
    flat_tol: float = FLAT_BAND_TOL,
    n_jobs: int | None = None,
) -> BandStructure:
    """Diagonalize the fiber on a uniform grid and collect band data.

    Fiber diagonalizations share no state; with n_jobs > 1 they run in a
    thread pool and are merged deterministically by grid index.
    """
    grid = k_grid(graph.dimension, n_k)
    fibers = np.empty((grid.shape[0], graph.nu, graph.nu), dtype=complex)
    for i, k in enumerate(grid):
        fibers[i] = fiber_operator(graph, alpha, p, k)

    def solve_chunk(sl: slice) -> np.ndarray:
        return np.linalg.eigvalsh(fibers[sl])

    try:
        if n_jobs and n_jobs > 1:
            chunks = [slice(s, min(s + 1024, grid.shape[0])) for s in range(0, grid.shape[0], 1024)]
            with ThreadPoolExecutor(max_workers=n_jobs) as pool:
                parts = list(pool.map(solve_chunk, chunks))
            sheets = np.vstack(parts)
        else:
            sheets = np.linalg.eigvalsh(fibers)
    except np.linalg.LinAlgError as exc:
        # locate the offending k-point for the error message
        for i, k in enumerate(grid):
            try:
                np.linalg.eigvalsh(fibers[i])
            except np.linalg.LinAlgError:
                raise EigensolverFailure(f"fiber diagonalization failed at k={k}", k=k) from exc
        raise EigensolverFailure(str(exc)) from exc

    intervals = np.stack([sheets.min(axis=0), sheets.max(axis=0)], axis=1)
    flags, values = detect_flat_bands_from_sheets(sheets, flat_tol)
    return BandStructure(
        k_grid=grid,
        sheets=sheets,
        band_intervals=intervals,
        flat_flags=flags,
        flat_values=values,
        n_k=n_k,
    )


def detect_flat_bands_from_sheets(sheets: np.ndarray, tol: float):
    if tol <= 0:
        raise ValueError("flat-band tolerance must be positive")
    spread = sheets.max(axis=0) - sheets.min(axis=0)
    flags = spread <= tol
    values = np.where(flags, sheets.mean(axis=0), np.nan)
    return flags, values


def detect_flat_bands(bands: BandStructure, tol: float = FLAT_BAND_TOL):
    """Flag sheets whose total spread over the grid is <= tol.

    A tol larger than a sheet's range flags it: the detector's semantics is
    the spread test, nothing deeper.
    """
    return detect_flat_bands_from_sheets(bands.sheets, tol)
