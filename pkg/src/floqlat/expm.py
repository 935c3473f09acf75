"""Unitary matrix-exponential application for Hermitian generators.

Two routes, picked by size:

* dense eigendecomposition below `dense_threshold` (unitary to rounding);
* a Chebyshev expansion of exp(-i*theta*x) on a Gershgorin enclosure of the
  spectrum, with a certified truncation bound from the Bessel tail.  For the
  small steps the propagators take, theta * halfwidth is tiny and a handful
  of sparse products reach machine precision.

Real generators applied to complex blocks go through a float64 view so the
sparse product runs in real arithmetic (about half the flops).
"""

from __future__ import annotations

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.special

from .errors import StepBudgetExceeded

try:  # private but long-stable; lets the hot loop reuse output buffers
    from scipy.sparse import _sparsetools

    _csr_matvecs = _sparsetools.csr_matvecs
except (ImportError, AttributeError):  # pragma: no cover - fallback path
    _csr_matvecs = None

DENSE_THRESHOLD = 256


def gershgorin_interval(H) -> tuple[float, float]:
    """Rigorous enclosure [lo, hi] of the spectrum of Hermitian H."""
    if sp.issparse(H):
        A = H.tocsr()
        diag = A.diagonal().real
        absrow = np.asarray(np.abs(A).sum(axis=1)).ravel() - np.abs(A.diagonal())
    else:
        A = np.asarray(H)
        diag = np.diag(A).real
        absrow = np.abs(A).sum(axis=1) - np.abs(np.diag(A))
    return float((diag - absrow).min()), float((diag + absrow).max())


def _apply(H, B):
    """H @ B, routing real-H/complex-B through a float view."""
    if sp.issparse(H) and H.dtype.kind == "f" and B.dtype.kind == "c":
        flat = B.view(np.float64)
        return (H @ flat).view(np.complex128)
    return H @ B


def chebyshev_apply_scaled(mv, B: np.ndarray, theta: float, c: float, coeffs: np.ndarray) -> np.ndarray:
    """Clenshaw-free forward recurrence with a prescaled operator.

    mv must apply (H - c I)/r; coeffs come from chebyshev_coefficients for
    theta * r.  Split out so steppers can freeze one spectral enclosure for a
    whole propagation instead of re-deriving coefficients every step.
    """
    T_prev = B
    acc = coeffs[0] * B
    if len(coeffs) > 1:
        T_curr = mv(B)
        acc = acc + coeffs[1] * T_curr
        for k in range(2, len(coeffs)):
            T_next = 2.0 * mv(T_curr) - T_prev
            acc += coeffs[k] * T_next
            T_prev, T_curr = T_curr, T_next
    return np.exp(-1j * theta * c) * acc


def scaled_csr_mv(H, c: float, r: float):
    """Matvec/matmat closure applying (H - c I)/r with the real-view fast path."""
    if sp.issparse(H):
        A = H.tocsr()
        scaled = sp.csr_matrix((A.data / r, A.indices, A.indptr), shape=A.shape)
        shift = c / r

        def mv(X):
            Y = _apply(scaled, X)
            Y -= shift * X
            return Y

        return mv
    A = (np.asarray(H) - c * np.eye(H.shape[0])) / r
    return lambda X: A @ X


def chebyshev_coefficients(theta_r: float, tol: float, k_max: int = 512):
    """Coefficients a_k with exp(-i t (c + r y)) = e^{-itc} sum a_k T_k(y).

    Returns (coeffs, certified_bound) where the bound dominates the sup-norm
    truncation error on [-1, 1].  The Bessel tail decays factorially once
    k exceeds theta_r, so small steps need very few terms.
    """
    k_hi = int(np.ceil(abs(theta_r))) + 40
    while True:
        ks = np.arange(k_hi + 1)
        bessel = scipy.special.jv(ks, theta_r)
        mags = np.abs(bessel)
        # certified analytic remainder beyond k_hi: |J_k(z)| <= (z/2)^k / k!
        z = abs(theta_r) / 2.0
        log_rem = k_hi * np.log(max(z, 1e-300)) - scipy.special.gammaln(k_hi + 1)
        remainder = np.exp(min(log_rem, 50.0)) * 2.0 if z > 0 else 0.0
        tails = 2.0 * np.cumsum(mags[::-1])[::-1]  # tails[k] >= 2 sum_{j>=k} |J_j|
        usable = np.flatnonzero(tails + remainder <= tol)
        if usable.size:
            K = int(usable[0])
            K = max(K, 1)
            coeffs = bessel[:K].astype(complex)
            coeffs[1:] *= 2.0 * (-1j) ** np.arange(1, K)
            return coeffs, float(tails[K] + remainder) if K < len(tails) else float(remainder)
        if k_hi >= k_max:
            raise StepBudgetExceeded(
                f"Chebyshev expansion needs more than {k_max} terms for theta*r = {theta_r:.3g}"
            )
        k_hi = min(2 * k_hi, k_max)


def expm_apply(
    H,
    B: np.ndarray,
    theta: float,
    *,
    tol: float = 1e-13,
    dense_threshold: int = DENSE_THRESHOLD,
    method: str = "auto",
) -> np.ndarray:
    """Compute exp(-i*theta*H) @ B for Hermitian H.

    B may be a vector or a block; the result has B's shape.  method is
    "auto" (size switch), "eigh", or "chebyshev".
    """
    n = H.shape[0]
    B = np.asarray(B, dtype=complex)
    single = B.ndim == 1
    if single:
        B = B[:, None]

    if method == "auto":
        method = "eigh" if n <= dense_threshold else "chebyshev"

    if method == "eigh":
        dense = H.toarray() if sp.issparse(H) else np.asarray(H)
        if np.abs(dense.imag).max(initial=0.0) == 0.0:
            w, V = scipy.linalg.eigh(dense.real)
        else:
            w, V = scipy.linalg.eigh(dense)
        out = V @ (np.exp(-1j * theta * w)[:, None] * (V.conj().T @ B))
    elif method == "chebyshev":
        out = _chebyshev_apply(H, B, theta, tol)
    else:
        raise ValueError(f"unknown exponential method {method!r}")
    return out[:, 0] if single else out


def _chebyshev_apply(H, B, theta, tol):
    lo, hi = gershgorin_interval(H)
    c = 0.5 * (hi + lo)
    r = 0.5 * (hi - lo)
    if r == 0.0:
        return np.exp(-1j * theta * c) * B
    coeffs, _bound = chebyshev_coefficients(theta * r, tol)
    return chebyshev_apply_scaled(scaled_csr_mv(H, c, r), B, theta, c, coeffs)


class ChebyshevBlockStepper:
    """Repeatedly applies exp(-i dt H_j) to one evolving block, allocation-free.

    A stepping pass hits the same few operations thousands of times; fresh
    650 kB temporaries per product put glibc into mmap/munmap churn that
    costs more than the arithmetic.  This object owns all work buffers and
    freezes one spectral enclosure (hence one coefficient set) for the whole
    pass, widening it only if a step's Gershgorin interval escapes.

    step(H, B) overwrites B with exp(-i dt H) B.
    """

    def __init__(self, n: int, m: int, dt: float, tol: float):
        self.dt = dt
        self.tol = tol
        shape = (n, m)
        self.acc = np.empty(shape, dtype=complex)
        self.t_prev = np.empty(shape, dtype=complex)
        self.t_curr = np.empty(shape, dtype=complex)
        self.t_next = np.empty(shape, dtype=complex)
        self.tmp = np.empty(shape, dtype=complex)
        self.lo = self.hi = self.c = self.r = None
        self.coeffs = None
        self.dbuf = None

    def _refresh(self, glo: float, ghi: float) -> None:
        pad = 0.05 * max(ghi - glo, 1e-12)
        self.lo = glo - pad if self.lo is None else min(glo - pad, self.lo)
        self.hi = ghi + pad if self.hi is None else max(ghi + pad, self.hi)
        self.c = 0.5 * (self.hi + self.lo)
        self.r = 0.5 * (self.hi - self.lo)
        self.coeffs, _ = chebyshev_coefficients(self.dt * self.r, self.tol)

    def _mv(self, H, X, out):
        # out = ((H - cI)/r) X without allocating the product
        if self.dbuf is None or self.dbuf.dtype != H.data.dtype or self.dbuf.size != H.data.size:
            self.dbuf = np.empty_like(H.data)
        np.multiply(H.data, 1.0 / self.r, out=self.dbuf)
        n, m = out.shape
        if _csr_matvecs is not None:
            if H.data.dtype.kind == "f":
                ov = out.view(np.float64)
                ov[:] = 0.0
                _csr_matvecs(n, n, 2 * m, H.indptr, H.indices, self.dbuf,
                             X.view(np.float64).ravel(), ov.ravel())
            else:
                out[:] = 0.0
                _csr_matvecs(n, n, m, H.indptr, H.indices, self.dbuf,
                             X.ravel(), out.ravel())
        else:  # pragma: no cover - allocating fallback
            scaled = sp.csr_matrix((self.dbuf, H.indices, H.indptr), shape=H.shape)
            out[:] = _apply(scaled, X)
        np.multiply(X, self.c / self.r, out=self.tmp)
        out -= self.tmp

    def step(self, H, B: np.ndarray) -> np.ndarray:
        glo, ghi = gershgorin_interval(H)
        if self.lo is None or glo < self.lo or ghi > self.hi:
            self._refresh(glo, ghi)
        coeffs = self.coeffs
        np.multiply(B, coeffs[0], out=self.acc)
        if len(coeffs) > 1:
            self.t_prev[:] = B
            self._mv(H, B, self.t_curr)
            np.multiply(self.t_curr, coeffs[1], out=self.tmp)
            self.acc += self.tmp
            for k in range(2, len(coeffs)):
                self._mv(H, self.t_curr, self.t_next)
                self.t_next *= 2.0
                self.t_next -= self.t_prev
                np.multiply(self.t_next, coeffs[k], out=self.tmp)
                self.acc += self.tmp
                self.t_prev, self.t_curr, self.t_next = (
                    self.t_curr, self.t_next, self.t_prev,
                )
        np.multiply(self.acc, np.exp(-1j * self.dt * self.c), out=B)
        return B


def hermitian_expm(H, theta: float) -> np.ndarray:
    """Dense exp(-i*theta*H) via eigendecomposition (small N)."""
    dense = H.toarray() if sp.issparse(H) else np.asarray(H)
    if np.abs(np.asarray(dense).imag).max(initial=0.0) == 0.0:
        w, V = scipy.linalg.eigh(dense.real)
    else:
        w, V = scipy.linalg.eigh(dense)
    return (V * np.exp(-1j * theta * w)) @ V.conj().T
