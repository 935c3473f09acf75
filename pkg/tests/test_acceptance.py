"""Acceptance suite: one test per shipped criterion, tolerances frozen.

Run with `pytest tests/test_acceptance.py -v -s` to see one verdict line per
criterion.  These are the exit criteria for the whole package; the unit
suites cover the same machinery at smaller scale.
"""

import math

import numpy as np
import pytest

import floqlat as fl
from floqlat.driving import (
    cosine_electric,
    primitive_of,
    sinusoidal_electric,
    site_oscillatory_electric,
    spatial_profile,
)
from floqlat.evolution import (
    autonomous,
    dyson_comparison_bound,
    dyson_propagator,
    monodromy,
    propagator_matrix,
    quasienergy_spectrum,
)
from floqlat.expm import hermitian_expm
from floqlat.gauge import gauge_equivalence_check, gauge_transform
from floqlat.howland import HowlandVector, resolvent_agreement
from floqlat.scattering import (
    ScatteringConfig,
    adjoint_wave_probe,
    gaussian_packet,
    most_localized_eigenvector,
    wave_operator_apply,
    weighted_resolvent_sample,
)


def _report(criterion: str, detail: str) -> None:
    print(f"[PASS] {criterion}: {detail}")


def test_c01_band_exactness():
    b1 = fl.band_structure(fl.hypercubic(1), n_k=256)
    (lo1, hi1) = b1.union_spectrum()[0]
    assert abs(lo1 - 0.0) <= 1e-12 and abs(hi1 - 2.0) <= 1e-12
    b2 = fl.band_structure(fl.hypercubic(2), n_k=256)
    (lo2, hi2) = b2.union_spectrum()[0]
    assert abs(lo2 - 0.0) <= 1e-12 and abs(hi2 - 4.0) <= 1e-12
    _report(
        "C1 band exactness",
        f"Z^1 sigma=[{lo1:.2e},{hi1:.15f}], Z^2 sigma=[{lo2:.2e},{hi2:.15f}]",
    )


def test_c02_magnetic_spectral_bound():
    rng = np.random.default_rng(42)
    worst_lo, worst_hi = 0.0, 0.0
    for d, L, reps in ((1, 20, 10), (2, 10, 10)):
        g = fl.hypercubic(d)
        lat = fl.truncate(g, L)
        for _ in range(reps):
            alpha = fl.StaticMagneticPotential.random(g, rng)
            w = np.linalg.eigvalsh(fl.magnetic_laplacian(lat, alpha).toarray())
            worst_lo = min(worst_lo, float(w.min()))
            worst_hi = max(worst_hi, float(w.max() - g.kappa_plus))
            assert w.min() >= -1e-10
            assert w.max() <= g.kappa_plus + 1e-10
    _report(
        "C2 magnetic spectral bound",
        f"20 random fields: min eig >= {worst_lo:.2e}, max eig - kappa <= {worst_hi:.2e}",
    )


def test_c03_propagator_unitarity_group_law():
    z1 = fl.hypercubic(1)
    lat = fl.truncate(z1, 100)  # N = 201
    tau = 1.0
    v = cosine_electric(lat, tau, 0.5, spatial_profile(lat, "exp", c=0.2))
    h = fl.DrivenHamiltonian(lattice=lat, tau=tau, v=v)
    s = tau / 3.0
    n1 = 4096 // 3
    P_s0 = propagator_matrix(h, 0.0, s, n1)
    P_ts = propagator_matrix(h, s, tau, 4096 - n1)
    P_t0 = propagator_matrix(h, 0.0, tau, 4096)
    unitarity = P_t0.unitarity_defect
    comp = float(np.linalg.norm(P_ts.u @ P_s0.u - P_t0.u, 2))
    assert unitarity <= 1e-10
    assert comp <= 1e-8
    _report(
        "C3 propagator axioms",
        f"N=201, n_steps=4096: ||U*U-I||={unitarity:.2e}, composition defect={comp:.2e}",
    )


def test_c04_dyson_bound_and_agreement():
    rng = np.random.default_rng(7)
    worst_margin = np.inf
    for _ in range(50):
        n = int(rng.integers(2, 17))
        h0 = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        h0 = (h0 + h0.conj().T) / 3
        B1 = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        B1 = (B1 + B1.conj().T) / 4
        B2 = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        B2 = (B2 + B2.conj().T) / 4
        V = lambda t: B1 * math.cos(2 * math.pi * t) + B2 * math.sin(4 * math.pi * t)
        t_end = float(rng.uniform(0.4, 1.4))
        P = dyson_propagator(h0, V, 0.0, t_end, order=16, n_nodes=129)
        gap = float(np.linalg.norm(P.u - hermitian_expm(h0, t_end), 2))
        bound = dyson_comparison_bound(P.a_value)
        assert gap <= bound + 1e-8
        worst_margin = min(worst_margin, bound - gap)

    # Dyson with tail <= 1e-8 against midpoint stepping on three systems
    import scipy.sparse as sp
    from floqlat.evolution import _step_block

    worst_gap = 0.0
    for seed in (1, 2, 3):
        r2 = np.random.default_rng(seed)
        n = 12
        h0 = r2.standard_normal((n, n))
        h0 = (h0 + h0.T) / 4
        B1 = r2.standard_normal((n, n))
        B1 = (B1 + B1.T) / 6
        V = lambda t: B1 * math.cos(2 * math.pi * t)
        P = dyson_propagator(h0, V, 0.0, 1.0, tail_tol=1e-8)
        assert P.tail_bound <= 1e-8

        class Wrap:
            def __init__(self):
                self.n = n
                self.tau = 1.0

            def matrix(self, t):
                return sp.csr_matrix(h0 + V(t))

            def hermiticity_defect(self, t):
                return 0.0

        U = _step_block(Wrap(), np.eye(n, dtype=complex), 0.0, 1.0, 4096,
                        "midpoint", "eigh", 256, 1e-13)
        worst_gap = max(worst_gap, float(np.linalg.norm(U - P.u, 2)))
        assert worst_gap <= 1e-6
    _report(
        "C4 Dyson bound",
        f"50 systems: bound never violated (smallest margin {worst_margin:.2e}); "
        f"Dyson-vs-stepping gap {worst_gap:.2e} <= 1e-6",
    )


def test_c05_quasienergy_consistency():
    z1 = fl.hypercubic(1)
    lat = fl.truncate(z1, 25)
    tau = 1.7
    rng = np.random.default_rng(5)
    alpha = fl.StaticMagneticPotential.random(z1, rng, scale=0.8)
    p = fl.StaticElectricPotential.constant(z1, 0.3)
    h = autonomous(lat, tau, alpha=alpha, p=p)
    M = monodromy(h, 0.0, 128)
    spec = quasienergy_spectrum(M, tau)
    w = np.linalg.eigvalsh(h.matrix(0.0).toarray())
    expected = np.mod(w, spec.omega)
    expected[np.isclose(expected, spec.omega)] = 0.0
    gap = np.abs(np.sort(spec.quasienergies) - np.sort(expected))
    gap = np.minimum(gap, spec.omega - gap).max()
    assert gap <= 1e-9

    # omega-shift identity in the mode realization
    h0 = h.matrix(0.0).toarray()[:9, :9]
    coeffs = np.zeros((2 * 16 + 1, 9), dtype=complex)
    for m in range(-5, 6):
        coeffs[16 + m] = (rng.standard_normal(9) + 1j * rng.standard_normal(9)) * math.exp(-abs(m))
    f = HowlandVector(coeffs, omega=spec.omega)
    diag = resolvent_agreement(h0, 0.21 + 0.9j, f, n_t=128)
    assert diag["omega_shift_defect"] <= 1e-8
    _report(
        "C5 quasienergy consistency",
        f"eigenphase fold gap {gap:.2e} <= 1e-9; omega-shift defect "
        f"{diag['omega_shift_defect']:.2e} <= 1e-8",
    )


def test_c06_resolvent_double_implementation():
    rng = np.random.default_rng(11)
    rels = []
    for h0 in (0.37, _random_hermitian(8, rng)):
        coeffs = np.zeros((2 * 64 + 1, 8 if not np.isscalar(h0) else 1), dtype=complex)
        n_sites = coeffs.shape[1]
        for m in range(-8, 9):
            coeffs[64 + m] = (
                rng.standard_normal(n_sites) + 1j * rng.standard_normal(n_sites)
            ) * math.exp(-0.4 * abs(m))
        f = HowlandVector(coeffs, omega=1.0)
        diag = resolvent_agreement(h0, 0.31 + 0.7j, f, n_t=128)
        rels.append(diag["kernel_vs_modes_rel"])
        assert diag["kernel_vs_modes_rel"] <= 1e-6
    _report(
        "C6 resolvent double implementation",
        f"kernel vs modes rel errors: scalar {rels[0]:.2e}, 8-site {rels[1]:.2e} (<= 1e-6)",
    )


def _random_hermitian(n, rng):
    A = rng.standard_normal((n, n))
    return (A + A.T) / 2


def test_c07_gauge_equivalence():
    z1 = fl.hypercubic(1)
    lat = fl.truncate(z1, 24)
    tau = 1.0
    q = sinusoidal_electric(lat, tau, 0.2, spatial_profile(lat, "exp", c=1.0))
    h = fl.DrivenHamiltonian(lattice=lat, tau=tau, q=q)
    Q = primitive_of(q)
    ladder = [1024, 2048, 4096]
    results = [gauge_equivalence_check(h, Q, n) for n in ladder]
    discrepancy = results[-1]["eigenphase_discrepancy"]
    assert discrepancy <= 1e-7
    orders = []
    for lo, hi in zip(results, results[1:]):
        orders.append(math.log2(lo["monodromy_defect"] / hi["monodromy_defect"]))
    assert all(1.6 <= o <= 2.4 for o in orders)
    _report(
        "C7 gauge equivalence",
        f"eigenphase discrepancy {discrepancy:.2e} <= 1e-7 at n_steps=4096; "
        f"defect orders {['%.2f' % o for o in orders]} ~ 2",
    )


def test_c08_scattering_convergence_vza():
    z1 = fl.hypercubic(1)
    lat = fl.truncate(z1, 400)
    tau = 2.0
    v = cosine_electric(lat, tau, 0.5, spatial_profile(lat, "power", a=2.0))
    h = fl.DrivenHamiltonian(lattice=lat, tau=tau, v=v)
    f = gaussian_packet(lat, 8.0, math.pi / 2)
    cfg = ScatteringConfig(n_steps_per_period=256)
    rep = wave_operator_apply(h, f, 100, config=cfg, scenario="acceptance-vza")
    final = rep.final_decrement
    isom = max(rep.isometry_defects)
    intw = rep.intertwining_defects[-1]
    bnd = max(rep.boundary_masses)
    assert final <= 1e-3
    assert isom <= 1e-3
    assert intw <= 1e-2
    assert bnd <= 1e-6
    assert rep.converged
    _report(
        "C8 scattering convergence (VZ_a)",
        f"L=400, 100 periods: decrement {final:.2e}, isometry {isom:.2e}, "
        f"intertwining {intw:.2e}, boundary {bnd:.2e}",
    )


def test_c09_oscillatory_gauge_agreement():
    z1 = fl.hypercubic(1)
    lat = fl.truncate(z1, 120)
    A = 0.3
    q = site_oscillatory_electric(lat, A, exponent=2)
    h = fl.DrivenHamiltonian(lattice=lat, tau=q.tau, q=q)
    Q = primitive_of(q)
    hbar = gauge_transform(h, Q)
    f = gaussian_packet(lat, 6.0, math.pi / 2)
    n_steps = 509  # prime: no site rate x^2 resonates with the step grid
    n_periods = 12
    Md = monodromy(h, 0.0, n_steps, stepper="split")
    Mg = monodromy(hbar, 0.0, n_steps, stepper="midpoint")
    cfg = ScatteringConfig(n_steps_per_period=n_steps)
    rd = wave_operator_apply(h, f, n_periods, config=cfg, monodromy_matrix=Md)
    rg = wave_operator_apply(hbar, f, n_periods, config=cfg, monodromy_matrix=Mg)
    mismatch = float(np.linalg.norm(rd.final_state - rg.final_state))
    assert rd.converged and rg.converged
    assert mismatch <= 1e-3
    _report(
        "C9 oscillatory potential",
        f"direct vs gauge-transformed W_n f mismatch {mismatch:.2e} <= 1e-3 "
        f"at matched n={n_periods}",
    )


def test_c10_weighted_resolvent_plateau():
    lams = [1 + 0.1j, 1 + 0.01j, 1 + 0.001j]
    rows = weighted_resolvent_sample(1, 1.0, lams + [-10.0 + 0j], L=2000)
    norms = [r["norm"] for r in rows[:3]]
    spread = (max(norms) - min(norms)) / max(norms)
    assert spread <= 0.20
    far = rows[3]["norm_times_rho"]
    assert 0.5 <= far <= 2.0  # Neumann scale: max rho_a^2 = 1
    _report(
        "C10 weighted resolvent",
        f"plateau spread {spread:.1%} <= 20%; far-field norm*rho {far:.3f} in [0.5, 2]",
    )


def test_c11_negative_control_pp_exclusion():
    from floqlat.driving import ELECTRIC

    z1 = fl.hypercubic(1)
    lat = fl.truncate(z1, 60)
    tau = 2.0
    site = np.zeros(lat.n_vertices)
    site[lat.vertex_index(np.array([0]), 0)] = 8.0
    drive = cosine_electric(lat, tau, 0.5, spatial_profile(lat, "power", a=2.0))
    combined = fl.TimeField(
        lat, ELECTRIC, tau, lambda t: site + drive.evaluate(t), description="defect+drive"
    )
    h = fl.DrivenHamiltonian(lattice=lat, tau=tau, v=combined)
    M = monodromy(h, 0.0, 256)
    mu, g, pr = most_localized_eigenvector(M)
    assert pr <= 3.0
    cfg = ScatteringConfig(
        n_steps_per_period=256, raise_on_contamination=False, boundary_cap=1.0
    )
    rep = adjoint_wave_probe(h, g, 30, config=cfg, monodromy_matrix=M)
    assert rep.final_decrement > 1e-1
    assert not rep.converged
    _report(
        "C11 negative control",
        f"localized defect eigenvector (PR {pr:.2f}): final decrement "
        f"{rep.final_decrement:.3f} > 0.1, not converged",
    )
