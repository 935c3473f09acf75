"""The quasienergy space L^2(T_tau, H) realized through Fourier modes.

A vector is stored by its mode coefficients f_n for |n| <= n_max; the time
derivative -i d/dt acts as multiplication by n*omega, so the free quasienergy
operator dd + h0 is block-diagonal over the mode ladder and its resolvent is
a per-mode solve.  The same resolvent also has an explicit integral kernel
in the time domain; both implementations are kept and used as mutual oracles.

Normalization: f(t) = sum_n c_n e^{i n omega t} and ||f||^2 = sum ||c_n||^2,
which matches (1/tau) int ||f(t)||^2 dt and makes the grid <-> mode transform
an exact isometry (Parseval for the FFT).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from ._quad import cumulative_simpson

from .errors import ResonantPeriod, SpectrumHit
from .spectral import merge_intervals


@dataclass
class HowlandVector:
    """Truncated mode ladder: coeffs[i] is the coefficient of e^{i n omega t}, n = i - n_max."""

    coeffs: np.ndarray  # (2 n_max + 1, N) complex
    omega: float
    tail_mass: float = 0.0

    @property
    def n_max(self) -> int:
        return (self.coeffs.shape[0] - 1) // 2

    @property
    def modes(self) -> np.ndarray:
        return np.arange(-self.n_max, self.n_max + 1)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.coeffs))

    def shifted(self, steps: int = 1) -> "HowlandVector":
        """Multiplication by e^{i steps omega t}: mode ladder shift n -> n + steps.

        Coefficients pushed past the truncation are dropped into tail_mass.
        """
        out = np.zeros_like(self.coeffs)
        if steps >= 0:
            out[steps:] = self.coeffs[: self.coeffs.shape[0] - steps]
            lost = self.coeffs[self.coeffs.shape[0] - steps:]
        else:
            out[:steps] = self.coeffs[-steps:]
            lost = self.coeffs[:-steps]
        return HowlandVector(
            coeffs=out,
            omega=self.omega,
            tail_mass=self.tail_mass + float(np.sum(np.abs(lost) ** 2)),
        )


def from_time_samples(samples: np.ndarray, tau: float, n_max: int) -> HowlandVector:
    """Project uniform t-grid samples (n_t, N) onto modes |n| <= n_max."""
    samples = np.atleast_2d(np.asarray(samples, dtype=complex))
    n_t = samples.shape[0]
    if n_t < 2 * n_max:
        raise ValueError(f"need at least {2*n_max} samples for n_max = {n_max}")
    spec = np.fft.fft(samples, axis=0) / n_t  # c_n for n = fft frequencies
    freqs = np.fft.fftfreq(n_t, d=1.0 / n_t).astype(int)
    coeffs = np.zeros((2 * n_max + 1, samples.shape[1]), dtype=complex)
    kept = np.zeros(n_t, dtype=bool)
    for i, n in enumerate(freqs):
        if -n_max <= n <= n_max:
            coeffs[n + n_max] = spec[i]
            kept[i] = True
    tail = float(np.sum(np.abs(spec[~kept]) ** 2))
    return HowlandVector(coeffs=coeffs, omega=2.0 * math.pi / tau, tail_mass=tail)


def to_time_samples(f: HowlandVector, n_t: int) -> np.ndarray:
    """Evaluate the mode sum on a uniform grid of n_t points over one period."""
    n_max = f.n_max
    if n_t < 2 * n_max:
        raise ValueError("grid too coarse for the stored modes")
    spec = np.zeros((n_t, f.coeffs.shape[1]), dtype=complex)
    for i, n in enumerate(range(-n_max, n_max + 1)):
        spec[n % n_t] += f.coeffs[i]  # += so an aliased top mode on a minimal grid still sums correctly
    return np.fft.ifft(spec, axis=0) * n_t


def _eig_h0(h0):
    if np.isscalar(h0):
        return np.array([float(h0)]), np.eye(1)
    dense = h0.toarray() if sp.issparse(h0) else np.asarray(h0)
    if dense.dtype.kind != "c" or np.abs(dense.imag).max(initial=0.0) == 0.0:
        return np.linalg.eigh(dense.real)
    return np.linalg.eigh(dense)


def forward_apply_modes(h0, f: HowlandVector) -> HowlandVector:
    """(dd + h0) f on the truncated ladder: g_n = (h0 + n omega) f_n."""
    w, V = _eig_h0(h0)
    out = np.empty_like(f.coeffs)
    core = f.coeffs @ np.conj(V)  # rows: eigenbasis components
    for i, n in enumerate(f.modes):
        out[i] = ((w + n * f.omega) * core[i]) @ V.T
    return HowlandVector(out, f.omega, f.tail_mass)


def free_resolvent_modes(h0, lam: complex, f: HowlandVector, *, tol: float = 1e-9) -> HowlandVector:
    """(dd + h0 - lam)^{-1} f, diagonal over the mode ladder."""
    w, V = _eig_h0(h0)
    gaps = np.abs(w[None, :] + f.modes[:, None] * f.omega - lam)
    if gaps.min() <= tol:
        raise SpectrumHit(
            f"lambda = {lam} within {tol} of sigma(h0) + omega*n on the retained ladder"
        )
    core = f.coeffs @ np.conj(V)
    out = np.empty_like(f.coeffs)
    for i, n in enumerate(f.modes):
        out[i] = (core[i] / (w + n * f.omega - lam)) @ V.T
    return HowlandVector(out, f.omega, f.tail_mass)


def free_resolvent_kernel(
    h0,
    lam: complex,
    samples: np.ndarray,
    tau: float,
    *,
    upsample: int = 16,
    resonance_tol: float = 1e-10,
) -> np.ndarray:
    """Resolvent by the explicit kernel: with phi = lam - h0,

        (R f)(t) = i e^{i t phi} [ int_0^t e^{-i s phi} f(s) ds
                                   + c int_0^tau e^{-i s phi} f(s) ds ],
        c = e^{i tau phi} / (1 - e^{i tau phi}).

    f is sampled on a uniform grid over [0, tau); the cut integral is done by
    cumulative Simpson after Fourier upsampling (the jump at s = t is the
    integration cut; the s = t node itself is taken with the t > s limit).
    Raises ResonantPeriod when 1 - e^{i tau phi} is singular within tolerance.
    """
    samples = np.atleast_2d(np.asarray(samples, dtype=complex))
    n_t = samples.shape[0]
    w, V = _eig_h0(h0)
    phi = lam - w  # per eigenvalue of h0
    denom = 1.0 - np.exp(1j * tau * phi)
    if np.abs(denom).min() <= resonance_tol:
        raise ResonantPeriod(f"1 - exp(i tau (lam - h0)) singular within {resonance_tol}")
    cfac = np.exp(1j * tau * phi) / denom

    if upsample % 2:
        upsample += 1
    n_fine = upsample * n_t
    spec = np.fft.fft(samples, axis=0)
    pad = np.zeros((n_fine, samples.shape[1]), dtype=complex)
    half = (n_t + 1) // 2
    pad[:half] = spec[:half]
    pad[n_fine - (n_t - half):] = spec[half:]
    fine = np.fft.ifft(pad, axis=0) * upsample  # band-limited interpolant on the fine grid

    core = fine @ np.conj(V)  # (n_fine, n_eig) eigen-components
    s_fine = np.arange(n_fine + 1) * (tau / n_fine)
    t_grid = np.arange(n_t) * (tau / n_t)
    out_core = np.empty((n_t, len(w)), dtype=complex)
    for a, ph in enumerate(phi):
        g = np.empty(n_fine + 1, dtype=complex)
        g[:n_fine] = np.exp(-1j * ph * s_fine[:n_fine]) * core[:, a]
        g[n_fine] = np.exp(-1j * ph * tau) * core[0, a]  # periodic closure at s = tau
        cum = cumulative_simpson(g, x=s_fine, initial=0.0)
        cut = cum[::upsample][:n_t]  # int_0^{t_j}: original nodes sit at fine index u*j
        full = cum[-1]
        out_core[:, a] = 1j * np.exp(1j * ph * t_grid) * (cut + cfac[a] * full)
    return out_core @ V.T


def free_quasienergy_spectrum(sigma_h0, omega: float, window: tuple[float, float]):
    """union_n (sigma(h0) + omega n) clipped to the window, as merged intervals.

    sigma_h0 may be a list of (lo, hi) intervals or an array of eigenvalues
    (treated as degenerate intervals).  Returns (intervals, has_gaps): gaps
    open up exactly when omega exceeds the spectral width plus interval gaps.
    """
    lo_w, hi_w = float(window[0]), float(window[1])
    if not lo_w < hi_w:
        raise ValueError("window must be a nonempty interval")
    items = list(sigma_h0) if not isinstance(sigma_h0, np.ndarray) else list(np.atleast_1d(sigma_h0))
    if not items:
        raise ValueError("sigma_h0 is empty")
    if np.isscalar(items[0]) or (isinstance(items[0], np.generic)):
        base = [(float(x), float(x)) for x in items]
    else:
        base = [(float(a), float(b)) for a, b in items]
    n_lo = math.floor((lo_w - max(b for _, b in base)) / omega) - 1
    n_hi = math.ceil((hi_w - min(a for a, _ in base)) / omega) + 1
    shifted = []
    for n in range(n_lo, n_hi + 1):
        for a, b in base:
            aa, bb = a + n * omega, b + n * omega
            if bb < lo_w or aa > hi_w:
                continue
            shifted.append((max(aa, lo_w), min(bb, hi_w)))
    merged = merge_intervals(shifted)
    has_gaps = len(merged) > 1
    return merged, has_gaps


def resolvent_agreement(h0, lam: complex, f: HowlandVector, n_t: int, *, upsample: int = 16) -> dict:
    """Diagnostics tying the two resolvent implementations together.

    Returns relative kernel-vs-modes error, the Parseval defect of the grid
    transform round trip, and the omega-shift identity defect.
    """
    tau = 2.0 * math.pi / f.omega
    g_modes = free_resolvent_modes(h0, lam, f)
    samples = to_time_samples(f, n_t)
    g_kernel_samples = free_resolvent_kernel(h0, lam, samples, tau, upsample=upsample)
    g_kernel = from_time_samples(g_kernel_samples, tau, f.n_max)
    rel = float(np.linalg.norm(g_kernel.coeffs - g_modes.coeffs) / max(g_modes.norm, 1e-300))

    round_trip = from_time_samples(samples, tau, f.n_max)
    parseval = abs(
        float(np.linalg.norm(samples) / math.sqrt(n_t)) ** 2 - round_trip.norm**2 - round_trip.tail_mass
    )

    # <e^{i omega t}> R(lam) <e^{-i omega t}> = R(lam + omega) on the interior ladder
    f_down = f.shifted(-1)
    lhs = free_resolvent_modes(h0, lam, f_down).shifted(+1)
    rhs = free_resolvent_modes(h0, lam + f.omega, f)
    interior = slice(1, 2 * f.n_max)  # boundary modes feel the truncation
    shift_defect = float(
        np.linalg.norm(lhs.coeffs[interior] - rhs.coeffs[interior])
        / max(np.linalg.norm(rhs.coeffs[interior]), 1e-300)
    )
    return {
        "kernel_vs_modes_rel": rel,
        "parseval_defect": parseval,
        "omega_shift_defect": shift_defect,
    }
