import math

import numpy as np
import pytest
import scipy.linalg
import scipy.sparse as sp

import floqlat as fl
from floqlat.driving import (
    ELECTRIC,
    MAGNETIC,
    cosine_electric,
    spatial_profile,
)
from floqlat.errors import (
    NonHermitianSample,
    NonUnitaryInput,
    NotAnEigenpair,
    QuadratureBudgetExceeded,
    StepBudgetExceeded,
)
from floqlat.evolution import (
    autonomous,
    dyson_comparison_bound,
    dyson_propagator,
    floquet_mode_check,
    fold_phase,
    monodromy,
    monodromy_conjugacy_defect,
    propagate,
    propagator_matrix,
    quasienergy_spectrum,
)
from floqlat.expm import hermitian_expm


@pytest.fixture
def driven_z1(z1):
    lat = fl.truncate(z1, 20)
    tau = 1.0
    v = cosine_electric(lat, tau, 0.5, spatial_profile(lat, "exp", c=0.25))
    return fl.DrivenHamiltonian(lattice=lat, tau=tau, v=v)


class ScalarSystem:
    """1x1 matrix family for closed-form checks."""

    def __init__(self, c, tau=1.0):
        self.c = c
        self.n = 1
        self.tau = tau

    def matrix(self, t):
        return sp.csr_matrix(np.array([[self.c]]))

    def hermiticity_defect(self, t):
        return 0.0


def test_scalar_constant_generator_exact():
    from floqlat.evolution import _step_block

    sys = ScalarSystem(0.73)
    u = _step_block(sys, np.array([[1.0 + 0j]]), 0.2, 1.9, 7, "midpoint", "eigh", 256, 1e-13)
    assert abs(u[0, 0] - np.exp(-1j * 0.73 * 1.7)) <= 1e-14


def test_autonomous_matches_exponential(z1):
    lat = fl.truncate(z1, 15)
    h = autonomous(lat, tau=2.0)
    f = fl.gaussian_packet(lat, 4.0, math.pi / 3)
    out = propagate(h, f, 0.5, 2.5, 16)
    exact = hermitian_expm(h.matrix(0.0), 2.0) @ f
    assert np.linalg.norm(out - exact) <= 1e-10


def test_propagate_does_not_mutate_input(driven_z1):
    f = fl.gaussian_packet(driven_z1.lattice, 4.0, math.pi / 2)
    f0 = f.copy()
    propagate(driven_z1, f, 0.0, 0.5, 16)
    assert np.array_equal(f, f0)


def test_second_order_self_convergence(driven_z1):
    f = fl.gaussian_packet(driven_z1.lattice, 4.0, math.pi / 2)
    u1 = propagate(driven_z1, f, 0.0, 1.0, 64)
    u2 = propagate(driven_z1, f, 0.0, 1.0, 128)
    u3 = propagate(driven_z1, f, 0.0, 1.0, 256)
    slope = math.log2(np.linalg.norm(u1 - u2) / np.linalg.norm(u2 - u3))
    assert 1.8 <= slope <= 2.2


def test_propagate_auto_tolerance(driven_z1):
    f = fl.gaussian_packet(driven_z1.lattice, 4.0, math.pi / 2)
    out = propagate(driven_z1, f, 0.0, 1.0, tol=1e-8)
    ref = propagate(driven_z1, f, 0.0, 1.0, 4096)
    assert np.linalg.norm(out - ref) <= 1e-6


def test_step_budget_exceeded(driven_z1):
    f = fl.gaussian_packet(driven_z1.lattice, 4.0, math.pi / 2)
    with pytest.raises(StepBudgetExceeded):
        propagate(driven_z1, f, 0.0, 1.0, tol=1e-16, max_steps=256)


def test_non_hermitian_sample_rejected(z1):
    lat = fl.truncate(z1, 5)
    bad = fl.TimeField(lat, ELECTRIC, 1.0, lambda t: np.full(lat.n_vertices, np.nan))
    h = fl.DrivenHamiltonian(lattice=lat, tau=1.0, v=bad)
    with pytest.raises(NonHermitianSample):
        propagate(h, np.ones(lat.n_vertices, dtype=complex), 0.0, 1.0, 4)


def test_unitarity_and_group_law(driven_z1):
    tau = driven_z1.tau
    s = tau / 3
    P_s0 = propagator_matrix(driven_z1, 0.0, s, 341)
    P_ts = propagator_matrix(driven_z1, s, tau, 683)
    P_t0 = propagator_matrix(driven_z1, 0.0, tau, 1024)
    assert P_t0.unitarity_defect <= 1e-10
    assert np.linalg.norm(P_ts.u @ P_s0.u - P_t0.u, 2) <= 1e-8


def test_periodicity_transport(driven_z1):
    tau = driven_z1.tau
    P1 = propagator_matrix(driven_z1, 0.0, tau, 512)
    P2 = propagator_matrix(driven_z1, tau, 2 * tau, 512)
    assert np.linalg.norm(P1.u - P2.u, 2) <= 1e-8


def test_split_stepper_agrees_with_midpoint(driven_z1):
    f = fl.gaussian_packet(driven_z1.lattice, 4.0, math.pi / 2)
    a = propagate(driven_z1, f, 0.0, 1.0, 512, stepper="midpoint")
    b = propagate(driven_z1, f, 0.0, 1.0, 512, stepper="split")
    assert np.linalg.norm(a - b) <= 1e-5  # both order 2, different error constants


def test_unknown_stepper(driven_z1):
    with pytest.raises(ValueError):
        propagate(driven_z1, np.ones(driven_z1.n, dtype=complex), 0.0, 1.0, 4, stepper="leapfrog")


# --- Dyson ---------------------------------------------------------------

def test_dyson_order_zero_is_free(rng):
    n = 6
    h0 = rng.standard_normal((n, n))
    h0 = (h0 + h0.T) / 2
    P = dyson_propagator(h0, lambda t: np.zeros((n, n)), 0.0, 1.3, order=0)
    assert np.abs(P.u - hermitian_expm(h0, 1.3)).max() <= 1e-12


def test_dyson_scalar_series():
    h0 = np.array([[0.0]])
    v = np.array([[1.0]])
    P = dyson_propagator(h0, lambda t: v, 0.0, 1.0, order=8)
    err = abs(P.u[0, 0] - np.exp(-1j))
    assert err <= P.tail_bound
    assert P.tail_bound <= 1.1 / math.factorial(9) * math.e  # sum_{j>8} 1/j! scale


def test_dyson_auto_order_and_stepping_agreement(rng):
    n = 10
    h0 = rng.standard_normal((n, n))
    h0 = (h0 + h0.T) / 4
    B1 = rng.standard_normal((n, n))
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

    from floqlat.evolution import _step_block

    U = _step_block(Wrap(), np.eye(n, dtype=complex), 0.0, 1.0, 4096, "midpoint", "eigh", 256, 1e-13)
    assert np.linalg.norm(U - P.u, 2) <= 1e-6


def test_dyson_a_priori_bound_random_systems(rng):
    for _ in range(10):
        n = int(rng.integers(2, 9))
        h0 = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        h0 = (h0 + h0.conj().T) / 3
        B1 = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        B1 = (B1 + B1.conj().T) / 4
        B2 = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        B2 = (B2 + B2.conj().T) / 4
        V = lambda t: B1 * math.cos(2 * math.pi * t) + B2 * math.sin(4 * math.pi * t)
        t_end = float(rng.uniform(0.5, 1.5))
        P = dyson_propagator(h0, V, 0.0, t_end, order=18)
        U0 = hermitian_expm(h0, t_end)
        gap = np.linalg.norm(P.u - U0, 2)
        assert gap <= dyson_comparison_bound(P.a_value) + 1e-8


def test_dyson_budget_exceeded():
    h0 = np.array([[0.0]])
    v = np.array([[4.0]])
    with pytest.raises(QuadratureBudgetExceeded):
        dyson_propagator(h0, lambda t: v, 0.0, 5.0, tail_tol=1e-30, max_order=10)


# --- monodromy and quasienergies ------------------------------------------

def test_monodromy_autonomous_eigenphases(z1):
    lat = fl.truncate(z1, 12)
    tau = 1.7
    h = autonomous(lat, tau)
    M = monodromy(h, 0.0, 64)
    w = np.linalg.eigvalsh(h.matrix(0.0).toarray())
    spec = quasienergy_spectrum(M, tau)
    expected = np.mod(w, spec.omega)
    expected[np.isclose(expected, spec.omega)] = 0.0  # -1e-16 folds to 0, not omega
    gap = np.abs(np.sort(spec.quasienergies) - np.sort(expected))
    gap = np.minimum(gap, spec.omega - gap)  # circular distance
    assert gap.max() <= 1e-9


def test_monodromy_conjugacy_identity(driven_z1):
    defect = monodromy_conjugacy_defect(driven_z1, 0.37, n_steps=1024)
    assert defect <= 1e-8


def test_monodromy_tau_shift(driven_z1):
    M0 = monodromy(driven_z1, 0.25, 512)
    M1 = monodromy(driven_z1, 0.25 + driven_z1.tau, 512)
    assert np.linalg.norm(M0 - M1, 2) <= 1e-8


def test_quasienergy_identity_monodromy():
    spec = quasienergy_spectrum(np.eye(7, dtype=complex), tau=2.0)
    assert np.abs(spec.quasienergies).max() == 0.0


def test_quasienergy_folding_omega_shift():
    tau = 2.0
    omega = 2 * math.pi / tau
    lams = np.array([0.3, 1.1, 2.9])
    mu = np.exp(-1j * tau * lams)
    mu_shifted = np.exp(-1j * tau * (lams + omega))
    assert np.abs(np.sort(fold_phase(mu, tau)) - np.sort(fold_phase(mu_shifted, tau))).max() <= 1e-12


def test_quasienergy_range_and_count(driven_z1):
    M = monodromy(driven_z1, 0.0, 256)
    spec = quasienergy_spectrum(M, driven_z1.tau)
    assert len(spec.quasienergies) == driven_z1.n
    assert (spec.quasienergies >= 0.0).all()
    assert (spec.quasienergies < spec.omega).all()


def test_quasienergy_rejects_non_unitary():
    with pytest.raises(NonUnitaryInput):
        quasienergy_spectrum(np.diag([1.0, 0.5]).astype(complex), tau=1.0)


def test_quasienergy_multiplicities():
    M = np.diag(np.exp(-1j * np.array([0.4, 0.4, 1.0]))).astype(complex)
    spec = quasienergy_spectrum(M, tau=1.0)
    mults = spec.multiplicities(tol=1e-9)
    assert sorted(m for _, m in mults) == [1, 2]


# --- Floquet modes ----------------------------------------------------------

def test_floquet_mode_autonomous(z1):
    lat = fl.truncate(z1, 8)
    tau = 1.2
    h = autonomous(lat, tau)
    w, V = np.linalg.eigh(h.matrix(0.0).toarray())
    lam = float(np.mod(w[3], 2 * math.pi / tau))
    defect = floquet_mode_check(h, lam, V[:, 3], n_steps=256)
    assert defect <= 1e-9


def test_floquet_mode_driven(driven_z1):
    M = monodromy(driven_z1, 0.0, 2048)
    spec = quasienergy_spectrum(M, driven_z1.tau, want_vectors=True)
    lam = float(spec.quasienergies[0])
    psi0 = spec.eigenvectors[:, 0]
    defect = floquet_mode_check(driven_z1, lam, psi0, n_steps=2048, residual_tol=1e-5)
    assert defect <= 1e-7


def test_floquet_mode_rejects_random_vector(driven_z1, rng):
    v = rng.standard_normal(driven_z1.n) + 1j * rng.standard_normal(driven_z1.n)
    v /= np.linalg.norm(v)
    with pytest.raises(NotAnEigenpair):
        floquet_mode_check(driven_z1, 0.1, v, n_steps=128)


def test_time_field_kind_validated(z1):
    lat = fl.truncate(z1, 3)
    mag = fl.TimeField(lat, MAGNETIC, 1.0, lambda t: np.zeros(lat.n_edges))
    with pytest.raises(ValueError):
        fl.DrivenHamiltonian(lattice=lat, tau=1.0, v=mag)
