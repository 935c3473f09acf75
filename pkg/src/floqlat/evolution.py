"""Propagators for driven lattice Hamiltonians h(t) = Delta_beta(t) + p + V(t).

The production stepper is midpoint-exponential: partition [s, t] into equal
steps and apply exp(-i h(t_mid) dt) per step.  Each step is unitary up to the
exponentiation tolerance, so the propagator axioms (cocycle law, U(t,t) = I)
hold to rounding no matter how coarse the step; accuracy in dt is order 2.

A Strang "split" stepper is available for electric drives whose primitive is
known in closed form: the diagonal part is integrated exactly, which keeps
site-oscillatory potentials (rates growing with |x|) accurate without
resolving their fastest phases.  The hopping part is still frozen at the
step midpoint.

The Dyson expansion is a validation tool, not the production path: it is
evaluated in the interaction picture with cumulative Simpson quadrature and
reports the factorial tail bound sum_{j>J} A^j / j!, A = int ||V||.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.integrate
import scipy.sparse as sp

from ._quad import cumulative_simpson

from .driving import ELECTRIC, MAGNETIC, TimeField
from .errors import (
    NonHermitianSample,
    NonUnitaryInput,
    NotAnEigenpair,
    QuadratureBudgetExceeded,
    StepBudgetExceeded,
)
from .expm import (
    DENSE_THRESHOLD,
    ChebyshevBlockStepper,
    expm_apply,
    hermitian_expm,
)
from .lattice import FiniteLattice, amplitudes
from .spectral import (
    StaticElectricPotential,
    StaticMagneticPotential,
    laplacian_from_phases,
    schrodinger,
)


@dataclass
class DrivenHamiltonian:
    """h(t) = Delta_beta(t) + p + v(t) + q(t) on a finite lattice.

    beta is a magnetic TimeField (absent means the static alpha, or the free
    Laplacian when alpha is also absent); v and q are the decaying and the
    mean-zero-oscillating electric parts.  tau = None marks an aperiodic
    Hamiltonian (time-decaying scenarios).
    """

    lattice: FiniteLattice
    tau: float | None
    alpha: StaticMagneticPotential | None = None
    p: StaticElectricPotential | None = None
    beta: TimeField | None = None
    v: TimeField | None = None
    q: TimeField | None = None
    _hop_static: sp.csr_matrix | None = field(default=None, repr=False)
    _asm: "_Assembler | None" = field(default=None, repr=False)

    def __post_init__(self):
        for f, kind in ((self.beta, MAGNETIC), (self.v, ELECTRIC), (self.q, ELECTRIC)):
            if f is not None and f.kind != kind:
                raise ValueError(f"field {f.description!r} has kind {f.kind}, expected {kind}")
        if self.beta is None:
            phases = (
                self.alpha.values[self.lattice.edge_cell]
                if self.alpha is not None
                else np.zeros(self.lattice.n_edges)
            )
            self._hop_static = laplacian_from_phases(self.lattice, phases)
        self._asm = _Assembler(self)

    @property
    def n(self) -> int:
        return self.lattice.n_vertices

    @property
    def hopping_static(self) -> bool:
        return self.beta is None

    def hopping_matrix(self, t: float) -> sp.csr_matrix:
        if self._hop_static is not None:
            return self._hop_static
        return laplacian_from_phases(self.lattice, self.beta.evaluate(t))

    def diagonal_values(self, t: float) -> np.ndarray:
        diag = np.zeros(self.n)
        if self.p is not None:
            diag += self.p.values[self.lattice.cell_index]
        if self.v is not None:
            diag = diag + self.v.evaluate(t)
        if self.q is not None:
            diag = diag + self.q.evaluate(t)
        return diag

    def diagonal_primitive(self, t0: float, t1: float) -> np.ndarray:
        """int_{t0}^{t1} of the diagonal part, exact where primitives exist."""
        diag = np.zeros(self.n)
        if self.p is not None:
            diag += self.p.values[self.lattice.cell_index] * (t1 - t0)
        for f in (self.v, self.q):
            if f is None:
                continue
            if f.primitive is not None:
                diag = diag + (f.primitive(t1) - f.primitive(t0))
            else:
                diag = diag + f.evaluate(0.5 * (t0 + t1)) * (t1 - t0)
        return diag

    def matrix(self, t: float) -> sp.csr_matrix:
        if self._asm is not None:
            return self._asm.assemble(t)
        h = self.hopping_matrix(t)
        diag = self.diagonal_values(t)
        if np.any(diag):
            h = h + sp.diags(diag.astype(h.dtype) if h.dtype.kind == "f" else diag)
        return h.tocsr()

    def comparison(self, kind: str = "laplacian") -> sp.csr_matrix:
        """The reference operator the wave operators compare against."""
        if kind == "laplacian":
            return laplacian_from_phases(self.lattice, np.zeros(self.lattice.n_edges))
        if kind == "h_alpha":
            return schrodinger(self.lattice, self.alpha, self.p)
        raise ValueError(f"unknown comparison kind {kind!r}")

    def hermiticity_defect(self, t: float) -> float:
        h = self.matrix(t)
        if not np.isfinite(h.data).all():
            return math.inf
        d = h - h.conj().T
        return float(np.abs(d.data).max(initial=0.0))


class _Assembler:
    """Per-step matrix assembly without rebuilding the sparsity pattern.

    The pattern of h(t) never changes, so the CSR indices/indptr are computed
    once; each call only refills the data vector.  Falls back to the generic
    path when the graph has parallel edges (duplicate coordinates would need
    summing).
    """

    def __init__(self, h: DrivenHamiltonian):
        self.h = h
        lat = h.lattice
        n = lat.n_vertices
        self.static_diag = np.zeros(n)
        if h.p is not None:
            self.static_diag += h.p.values[lat.cell_index]
        if h.beta is None:
            template = (h._hop_static + sp.diags(np.ones(n, dtype=h._hop_static.dtype))).tocsr()
            template.sort_indices()
            self.indices, self.indptr = template.indices, template.indptr
            self.diag_pos = np.array(
                [template.indptr[i] + np.searchsorted(
                    template.indices[template.indptr[i]:template.indptr[i + 1]], i)
                 for i in range(n)]
            )
            base = template.data.copy()
            base[self.diag_pos] -= 1.0
            self.base = base
            self.mode = "static-hop"
        else:
            rows = np.concatenate([lat.edge_origin, lat.edge_terminus, np.arange(n)])
            cols = np.concatenate([lat.edge_terminus, lat.edge_origin, np.arange(n)])
            coo = sp.coo_matrix((np.arange(rows.size, dtype=float), (rows, cols)), shape=(n, n))
            csr = coo.tocsr()
            csr.sort_indices()
            if csr.nnz != rows.size:
                self.mode = "generic"  # parallel edges: entries would need summing
            else:
                self.indices, self.indptr = csr.indices, csr.indptr
                self.src = csr.data.astype(int)
                self.deg_half = 0.5 * lat.degrees().astype(float)
                self.mode = "dynamic-hop"

    def assemble(self, t: float) -> sp.csr_matrix:
        h = self.h
        n = h.lattice.n_vertices
        diag = self.static_diag.copy()
        if h.v is not None:
            diag += h.v.evaluate(t)
        if h.q is not None:
            diag += h.q.evaluate(t)
        if self.mode == "static-hop":
            data = self.base.copy()
            if data.dtype.kind == "f" and not np.isrealobj(diag):
                data = data.astype(complex)
            data[self.diag_pos] += diag
            return sp.csr_matrix((data, self.indices, self.indptr), shape=(n, n))
        if self.mode == "dynamic-hop":
            hop = -0.5 * np.exp(1j * h.beta.evaluate(t))
            entries = np.concatenate([hop, np.conj(hop), (self.deg_half + diag).astype(complex)])
            return sp.csr_matrix((entries[self.src], self.indices, self.indptr), shape=(n, n))
        hmat = h.hopping_matrix(t)
        if np.any(diag):
            hmat = hmat + sp.diags(diag.astype(hmat.dtype) if hmat.dtype.kind == "f" else diag)
        return hmat.tocsr()


def autonomous(
    lat: FiniteLattice,
    tau: float,
    alpha: StaticMagneticPotential | None = None,
    p: StaticElectricPotential | None = None,
) -> DrivenHamiltonian:
    """Constant h(t) = h_alpha, still exposed as a (trivially) periodic drive."""
    return DrivenHamiltonian(lattice=lat, tau=tau, alpha=alpha, p=p)


@dataclass
class Propagator:
    """A computed U(t, s) with its certificates."""

    u: np.ndarray
    s: float
    t: float
    method: str
    n_steps: int = 0
    order: int = 0
    unitarity_defect: float = 0.0
    tail_bound: float | None = None
    a_value: float | None = None


def _measure_unitarity(U: np.ndarray) -> float:
    n = U.shape[0]
    return float(np.abs(U.conj().T @ U - np.eye(n)).max())


def _step_block(
    h: DrivenHamiltonian,
    B: np.ndarray,
    s: float,
    t: float,
    n_steps: int,
    stepper: str,
    method: str,
    dense_threshold: int,
    exp_tol: float,
) -> np.ndarray:
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    dt = (t - s) / n_steps
    defect = h.hermiticity_defect(s + 0.5 * dt)
    if not defect <= 1e-10:
        raise NonHermitianSample(f"h(t) sample is not Hermitian: defect {defect:.3e}")

    if method == "auto":
        method = "eigh" if h.n <= dense_threshold else "chebyshev"

    if stepper == "midpoint":
        if method == "eigh":
            for j in range(n_steps):
                tm = s + (j + 0.5) * dt
                B = expm_apply(h.matrix(tm), B, dt, tol=exp_tol, method="eigh")
            return B
        B = np.array(B, dtype=complex, order="C")  # private copy: steps mutate in place
        engine = ChebyshevBlockStepper(B.shape[0], B.shape[1], dt, exp_tol)
        for j in range(n_steps):
            tm = s + (j + 0.5) * dt
            B = engine.step(h.matrix(tm), B)
        return B

    if stepper == "split":
        B = np.array(B, dtype=complex, order="C")  # private copy: steps mutate in place
        hop_exp = None
        engine = None
        if h.hopping_static and h.n <= max(dense_threshold, 1024):
            hop_exp = hermitian_expm(h.hopping_matrix(0.0), dt)
            buf = np.empty_like(B)
        else:
            engine = ChebyshevBlockStepper(B.shape[0], B.shape[1], dt, exp_tol)
        for j in range(n_steps):
            a = s + j * dt
            b = a + dt
            m = 0.5 * (a + b)
            B *= np.exp(-1j * h.diagonal_primitive(a, m))[:, None]
            if hop_exp is not None:
                np.dot(hop_exp, B, out=buf)
                B, buf = buf, B
            else:
                B = engine.step(h.hopping_matrix(m), B)
            B *= np.exp(-1j * h.diagonal_primitive(m, b))[:, None]
        return B

    raise ValueError(f"unknown stepper {stepper!r}")


def propagate(
    h: DrivenHamiltonian,
    f,
    s: float,
    t: float,
    n_steps: int | None = None,
    *,
    tol: float | None = None,
    max_steps: int = 1 << 18,
    stepper: str = "midpoint",
    method: str = "auto",
    dense_threshold: int = DENSE_THRESHOLD,
    exp_tol: float = 1e-13,
) -> np.ndarray:
    """Solve i du/dt = h(t) u from u(s) = f to time t.

    Either pass n_steps directly or a tolerance: with tol set, the step count
    doubles until two consecutive refinements differ by less than tol
    (StepBudgetExceeded past max_steps).
    """
    vec = amplitudes(f, h.lattice)
    if s == t:
        return vec.copy()
    kwargs = dict(stepper=stepper, method=method,
                  dense_threshold=dense_threshold, exp_tol=exp_tol)
    if n_steps is not None:
        return _step_block(h, vec[:, None], s, t, n_steps, **kwargs)[:, 0]
    if tol is None:
        raise ValueError("pass n_steps or tol")
    n = 64
    prev = _step_block(h, vec[:, None], s, t, n, **kwargs)[:, 0]
    while n <= max_steps:
        n *= 2
        curr = _step_block(h, vec[:, None], s, t, n, **kwargs)[:, 0]
        if np.linalg.norm(curr - prev) <= tol:
            return curr
        prev = curr
    raise StepBudgetExceeded(f"tolerance {tol} unreachable within {max_steps} steps")


def propagator_matrix(
    h: DrivenHamiltonian,
    s: float,
    t: float,
    n_steps: int,
    *,
    stepper: str = "midpoint",
    method: str = "chebyshev",
    dense_threshold: int = DENSE_THRESHOLD,
    exp_tol: float = 1e-13,
) -> Propagator:
    """Full matrix U(t, s) by stepping the identity block.

    Block steps default to the Chebyshev route: applying the certified
    polynomial to an N x N block costs a few sparse products per step and
    beats a fresh eigendecomposition at every size that matters here.
    """
    B = np.eye(h.n, dtype=complex)
    U = _step_block(h, B, s, t, n_steps, stepper, method, dense_threshold, exp_tol)
    return Propagator(
        u=U, s=s, t=t, method=f"stepping/{stepper}", n_steps=n_steps,
        unitarity_defect=_measure_unitarity(U),
    )


def monodromy(
    h: DrivenHamiltonian,
    t0: float = 0.0,
    n_steps: int = 1024,
    **kwargs,
) -> np.ndarray:
    """One-period map M(t0) = U(t0 + tau, t0)."""
    if h.tau is None:
        raise ValueError("monodromy needs a periodic Hamiltonian")
    return propagator_matrix(h, t0, t0 + h.tau, n_steps, **kwargs).u


def monodromy_conjugacy_defect(
    h: DrivenHamiltonian, t0: float, n_steps: int = 1024, **kwargs
) -> float:
    """|| M(t0) - U(t0,0) U(tau,0) U(0,t0) ||_2, all four maps by stepping."""
    tau = h.tau
    frac = max(1, round(n_steps * t0 / tau)) if t0 > 0 else 0
    M_t0 = monodromy(h, t0, n_steps, **kwargs)
    U_t0 = (
        propagator_matrix(h, 0.0, t0, max(frac, 1), **kwargs).u
        if t0 > 0
        else np.eye(h.n, dtype=complex)
    )
    M_0 = monodromy(h, 0.0, n_steps, **kwargs)
    rhs = U_t0 @ M_0 @ U_t0.conj().T
    return float(np.linalg.norm(M_t0 - rhs, 2))


# ---------------------------------------------------------------------------
# Dyson expansion
# ---------------------------------------------------------------------------

def dyson_propagator(
    h0,
    V_of_t,
    s: float,
    t: float,
    order: int | None = None,
    *,
    tail_tol: float | None = None,
    n_nodes: int = 257,
    max_order: int = 40,
) -> Propagator:
    """Truncated Dyson series U_0 + sum_{j<=J} (-i)^j U_j with iterated integrals.

    h0 is the static Hermitian part, V_of_t maps a time to the (dense)
    perturbation matrix.  Evaluated in the interaction picture, where level
    j is a cumulative quadrature of Vtilde * (level j-1); the reported tail
    bound is sum_{j>J} A^j / j!, A = int_s^t ||V||.
    """
    dense0 = h0.toarray() if sp.issparse(h0) else np.asarray(h0)
    n = dense0.shape[0]
    if n_nodes % 2 == 0:
        n_nodes += 1
    nodes = np.linspace(s, t, n_nodes)
    if dense0.dtype.kind != "c" or np.abs(dense0.imag).max(initial=0.0) == 0.0:
        w, Vec = np.linalg.eigh(dense0.real)
    else:
        w, Vec = np.linalg.eigh(dense0)

    norms = np.empty(n_nodes)
    Vtilde = np.empty((n_nodes, n, n), dtype=complex)
    for i, r in enumerate(nodes):
        Vr = np.asarray(V_of_t(r), dtype=complex)
        norms[i] = np.linalg.norm(Vr, 2)
        core = Vec.conj().T @ Vr @ Vec
        phase = np.exp(1j * (r - s) * w)
        Vtilde[i] = Vec @ (np.outer(phase, np.conj(phase)) * core) @ Vec.conj().T
    A = float(scipy.integrate.simpson(norms, x=nodes))

    if order is None:
        if tail_tol is None:
            raise ValueError("pass order or tail_tol")
        order = 0
        while _dyson_tail(A, order) > tail_tol:
            order += 1
            if order > max_order:
                raise QuadratureBudgetExceeded(
                    f"tail {tail_tol} unreachable below order {max_order} (A = {A:.3g})"
                )
    tail = _dyson_tail(A, order)

    level = np.tile(np.eye(n, dtype=complex), (n_nodes, 1, 1))
    acc_final = np.eye(n, dtype=complex)
    for j in range(1, order + 1):
        integrand = np.einsum("rab,rbc->rac", Vtilde, level)
        level = cumulative_simpson(integrand, x=nodes, axis=0, initial=0.0)
        acc_final = acc_final + (-1j) ** j * level[-1]
    U0 = Vec @ (np.exp(-1j * (t - s) * w)[:, None] * Vec.conj().T)
    U = U0 @ acc_final
    return Propagator(
        u=U, s=s, t=t, method="dyson", order=order,
        unitarity_defect=_measure_unitarity(U), tail_bound=tail, a_value=A,
    )


def _dyson_tail(A: float, J: int) -> float:
    # sum_{j > J} A^j / j!  (exact up to rounding; A is desk-scale small)
    partial, term = 0.0, 1.0
    for j in range(1, J + 1):
        term *= A / j
        partial += term
    return float(math.exp(A) - 1.0 - partial)


def dyson_comparison_bound(A: float) -> float:
    """min(A, 1) * e^A, the a-priori bound on ||U - U_0||."""
    return min(A, 1.0) * math.exp(A)


# ---------------------------------------------------------------------------
# quasienergies
# ---------------------------------------------------------------------------

@dataclass
class QuasienergySpectrum:
    """Eigenphases of a monodromy folded to [0, omega), omega = 2 pi / tau.

    Each entry represents the coset lambda + omega Z of quasienergies; the
    unfolded ladder is recovered by integer omega shifts.
    """

    quasienergies: np.ndarray
    eigenvalues: np.ndarray
    omega: float
    tau: float
    eigenvectors: np.ndarray | None = None
    unitarity_defect: float = 0.0

    def multiplicities(self, tol: float | None = None) -> list[tuple[float, int]]:
        tol = tol if tol is not None else 1e-9 * self.omega
        out: list[tuple[float, int]] = []
        for lam in self.quasienergies:
            if out and abs(lam - out[-1][0]) <= tol:
                out[-1] = (out[-1][0], out[-1][1] + 1)
            else:
                out.append((float(lam), 1))
        return out


def fold_phase(mu: np.ndarray, tau: float) -> np.ndarray:
    """Map unitary eigenvalues mu = exp(-i tau lambda) to lambda in [0, omega)."""
    omega = 2.0 * math.pi / tau
    lam = (-np.angle(mu)) / tau  # angle in (-pi, pi]: lam in [-omega/2, omega/2)
    lam = np.mod(lam, omega)
    # np.mod(-tiny, omega) returns omega itself; that tie resolves toward 0
    lam[np.isclose(lam, omega, rtol=0.0, atol=1e-12 * omega)] = 0.0
    return lam


def quasienergy_spectrum(
    M: np.ndarray,
    tau: float,
    *,
    want_vectors: bool = False,
    unitary_tol: float = 1e-8,
) -> QuasienergySpectrum:
    M = np.asarray(M, dtype=complex)
    defect = _measure_unitarity(M)
    if not defect <= unitary_tol:
        raise NonUnitaryInput(f"monodromy unitarity defect {defect:.3e} > {unitary_tol:.1e}")
    if want_vectors:
        mu, vecs = np.linalg.eig(M)
    else:
        mu = np.linalg.eigvals(M)
        vecs = None
    lam = fold_phase(mu, tau)
    order = np.argsort(lam, kind="stable")
    return QuasienergySpectrum(
        quasienergies=lam[order],
        eigenvalues=mu[order],
        omega=2.0 * math.pi / tau,
        tau=tau,
        eigenvectors=vecs[:, order] if vecs is not None else None,
        unitarity_defect=defect,
    )


def floquet_mode_check(
    h: DrivenHamiltonian,
    lam: float,
    psi0,
    *,
    n_steps: int = 1024,
    n_samples: int = 8,
    residual_tol: float = 1e-6,
    **prop_kwargs,
) -> float:
    """max_t || M(t) psi(t) - e^{-i tau lam} psi(t) || for psi(t) = e^{i t lam} U(t,0) psi0.

    psi0 must be an eigenvector of M(0) for the eigenvalue e^{-i tau lam};
    otherwise NotAnEigenpair.
    """
    tau = h.tau
    psi0 = amplitudes(psi0, h.lattice)
    mu = np.exp(-1j * tau * lam)
    M0_psi = propagate(h, psi0, 0.0, tau, n_steps, **prop_kwargs)
    residual = np.linalg.norm(M0_psi - mu * psi0) / max(np.linalg.norm(psi0), 1e-300)
    if residual > residual_tol:
        raise NotAnEigenpair(
            f"initial residual {residual:.3e} > {residual_tol:.1e}: not a monodromy eigenpair"
        )
    ts = np.linspace(0.0, tau, n_samples, endpoint=False)
    defect = 0.0
    psi_t = psi0.copy()
    steps_per_gap = max(1, n_steps // n_samples)
    for i, t in enumerate(ts):
        if i > 0:
            psi_t = propagate(h, psi_t, ts[i - 1], t, steps_per_gap, **prop_kwargs)
        phase_state = np.exp(1j * t * lam) * psi_t
        advanced = propagate(h, phase_state, t, t + tau, n_steps, **prop_kwargs)
        defect = max(defect, float(np.linalg.norm(advanced - mu * phase_state)))
    return defect
