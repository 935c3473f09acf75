import numpy as np
import pytest
import scipy.linalg
import scipy.sparse as sp

from floqlat.expm import (
    ChebyshevBlockStepper,
    chebyshev_coefficients,
    expm_apply,
    gershgorin_interval,
    hermitian_expm,
)


def random_hermitian(n, rng, complex_=True):
    A = rng.standard_normal((n, n))
    if complex_:
        A = A + 1j * rng.standard_normal((n, n))
    return (A + A.conj().T) / 2.0


@pytest.mark.parametrize("complex_", [False, True])
@pytest.mark.parametrize("method", ["eigh", "chebyshev"])
def test_expm_apply_matches_scipy(method, complex_, rng):
    n = 40
    H = random_hermitian(n, rng, complex_)
    theta = 0.37
    exact = scipy.linalg.expm(-1j * theta * H)
    v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    got = expm_apply(sp.csr_matrix(H), v, theta, method=method)
    assert np.linalg.norm(got - exact @ v) <= 1e-11 * np.linalg.norm(v)
    B = rng.standard_normal((n, 5)) + 1j * rng.standard_normal((n, 5))
    gotB = expm_apply(sp.csr_matrix(H), B, theta, method=method)
    assert np.abs(gotB - exact @ B).max() <= 1e-11


def test_expm_apply_scalar_like(rng):
    H = sp.csr_matrix(np.array([[2.0]]))
    v = np.array([1.0 + 0.5j])
    got = expm_apply(H, v, 0.9, method="chebyshev")
    assert abs(got[0] - np.exp(-1j * 0.9 * 2.0) * v[0]) <= 1e-14


def test_gershgorin_contains_spectrum(rng):
    H = random_hermitian(30, rng)
    lo, hi = gershgorin_interval(sp.csr_matrix(H))
    w = np.linalg.eigvalsh(H)
    assert lo <= w.min() and w.max() <= hi


def test_coefficient_tail_certificate():
    coeffs, bound = chebyshev_coefficients(0.5, 1e-13)
    assert bound <= 1e-13
    # truncation error on [-1, 1] really is below the certificate
    y = np.linspace(-1, 1, 201)
    acc = np.zeros_like(y, dtype=complex)
    Tm, Tc = np.ones_like(y), y.copy()
    acc += coeffs[0] * Tm
    if len(coeffs) > 1:
        acc += coeffs[1] * Tc
    for k in range(2, len(coeffs)):
        Tn = 2 * y * Tc - Tm
        acc += coeffs[k] * Tn
        Tm, Tc = Tc, Tn
    exact = np.exp(-1j * 0.5 * y)
    assert np.abs(acc - exact).max() <= bound + 1e-15


def test_unitarity_of_applied_exponential(rng):
    n = 60
    H = sp.csr_matrix(random_hermitian(n, rng))
    B = np.eye(n, dtype=complex)
    U = expm_apply(H, B, 0.05, method="chebyshev")
    assert np.abs(U.conj().T @ U - np.eye(n)).max() <= 1e-12


def test_block_stepper_matches_expm_apply(rng):
    n = 25
    Hs = [sp.csr_matrix(random_hermitian(n, rng, complex_=False)) for _ in range(4)]
    dt = 0.03
    B0 = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    stepper = ChebyshevBlockStepper(n, n, dt, 1e-13)
    B = B0.copy()
    for H in Hs:
        B = stepper.step(H, B)
    expected = B0.copy()
    for H in Hs:
        expected = expm_apply(H, expected, dt, method="eigh")
    assert np.abs(B - expected).max() <= 1e-12


def test_hermitian_expm_unitary(rng):
    H = random_hermitian(20, rng)
    U = hermitian_expm(H, 1.3)
    assert np.abs(U.conj().T @ U - np.eye(20)).max() <= 1e-13
