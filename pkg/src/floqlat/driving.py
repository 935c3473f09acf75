"""Time-dependent magnetic and electric fields, primitives, condition checks.

Fields come from a small closed set of registered families rather than
arbitrary expression parsing; that keeps the primitive Q_x(t) = int_0^t q_x
exact wherever the scattering scenarios need it.  Evaluators are pure
functions of t and return one value per lattice vertex (electric) or per
stored lattice edge (magnetic, stored orientation; the reverse edge carries
the negated value).

|x| always means the Euclidean norm of the lattice position.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.integrate
import scipy.interpolate
import scipy.sparse as sp

from .errors import (
    MissingWeight,
    PeriodMeanNonzero,
    PotentialShapeMismatch,
    UnknownCondition,
    WeightVanishes,
)
from .lattice import FiniteLattice
from .spectral import StaticElectricPotential, StaticMagneticPotential, laplacian_from_phases

MAGNETIC = "magnetic-edge"
ELECTRIC = "electric-vertex"


@dataclass
class TimeField:
    """A time-dependent potential bound to a finite lattice.

    evaluate(t) returns the field values at time t; primitive(t), when the
    family registers one, returns int_0^t of the field exactly.  Electric
    fields are per-vertex, magnetic fields per stored edge.
    """

    lattice: FiniteLattice
    kind: str
    tau: float | None
    evaluate: callable
    primitive: callable | None = None
    description: str = ""
    params: dict = field(default_factory=dict)

    def sample_periodicity_defect(self, n_samples: int = 7) -> float:
        """max |f(t + tau) - f(t)| over sample times; 0 for aperiodic fields."""
        if self.tau is None:
            return 0.0
        worst = 0.0
        for t in np.linspace(0.0, self.tau, n_samples, endpoint=False):
            worst = max(worst, float(np.max(np.abs(self.evaluate(t + self.tau) - self.evaluate(t)), initial=0.0)))
        return worst


# ---------------------------------------------------------------------------
# spatial profiles and decay weights
# ---------------------------------------------------------------------------

def spatial_profile(lat: FiniteLattice, family: str, **params) -> np.ndarray:
    """Per-vertex real profile g_x.

    Families: uniform, power ((1+|x|)^-a), exp (e^{-c|x|}), gaussian
    (e^{-|x|^2 / (2 s^2)}), single_site (delta at the vertex nearest `site`).
    """
    r = lat.radial_distance()
    if family == "uniform":
        return np.ones(lat.n_vertices)
    if family == "power":
        a = params["a"]
        return (1.0 + r) ** (-a)
    if family == "exp":
        c = params.get("c", 1.0)
        return np.exp(-c * r)
    if family == "gaussian":
        s = params.get("s", 1.0)
        return np.exp(-(r**2) / (2.0 * s**2))
    if family == "single_site":
        site = np.asarray(params.get("site", np.zeros(lat.graph.dimension)), dtype=float)
        dist = np.linalg.norm(lat.positions - site, axis=1)
        g = np.zeros(lat.n_vertices)
        g[int(np.argmin(dist))] = 1.0
        return g
    raise PotentialShapeMismatch(f"unknown spatial profile family {family!r}")


def weight_b(lat: FiniteLattice, a: float, scale: float = 1.0) -> np.ndarray:
    """Decay weight with b_x^2 = scale * (1+|x|)^{-a}."""
    r = lat.radial_distance()
    return np.sqrt(scale) * (1.0 + r) ** (-a / 2.0)


def rho_weight(lat: FiniteLattice, a: float) -> np.ndarray:
    """rho_a(x) = (1+|x|)^{-a}."""
    return (1.0 + lat.radial_distance()) ** (-a)


def _edge_endpoint_values(lat: FiniteLattice, per_vertex: np.ndarray):
    return per_vertex[lat.edge_origin], per_vertex[lat.edge_terminus]


# ---------------------------------------------------------------------------
# electric field families
# ---------------------------------------------------------------------------

def zero_electric(lat: FiniteLattice, tau: float) -> TimeField:
    z = np.zeros(lat.n_vertices)
    return TimeField(lat, ELECTRIC, tau, lambda t: z, primitive=lambda t: z, description="zero")


def cosine_electric(
    lat: FiniteLattice,
    tau: float,
    amplitude: float,
    profile: np.ndarray,
    harmonic: int = 1,
) -> TimeField:
    """v_x(t) = A g_x cos(2 pi m t / tau); mean-zero with exact primitive."""
    g = amplitude * np.asarray(profile, dtype=float)
    w = 2.0 * math.pi * harmonic / tau
    return TimeField(
        lat,
        ELECTRIC,
        tau,
        evaluate=lambda t: g * math.cos(w * t),
        primitive=lambda t: g * (math.sin(w * t) / w),
        description=f"cosine_electric(A={amplitude}, m={harmonic})",
        params={"amplitude": amplitude, "harmonic": harmonic},
    )


def sinusoidal_electric(
    lat: FiniteLattice,
    tau: float,
    amplitude: float,
    profile: np.ndarray,
    harmonic: int = 1,
) -> TimeField:
    """q_x(t) = A g_x sin(2 pi m t / tau); primitive (A g_x / w)(1 - cos w t)."""
    g = amplitude * np.asarray(profile, dtype=float)
    w = 2.0 * math.pi * harmonic / tau
    return TimeField(
        lat,
        ELECTRIC,
        tau,
        evaluate=lambda t: g * math.sin(w * t),
        primitive=lambda t: g * ((1.0 - math.cos(w * t)) / w),
        description=f"sinusoidal_electric(A={amplitude}, m={harmonic})",
        params={"amplitude": amplitude, "harmonic": harmonic},
    )


def shifted_power_electric(
    lat: FiniteLattice,
    tau: float | None,
    amplitude: float,
    a: float,
    w_of_t=None,
) -> TimeField:
    """v_x(t) = A * w(t) / (1 + |x + s(t)|^a), every coordinate shifted by s(t).

    Periodic flavor: s(t) = sin(2 pi t / tau), w = 1.  With tau = None the
    shift is literally sin t and a square-integrable envelope w makes this
    the decaying-in-time scenario.  No closed primitive (none is needed:
    this is a decaying v-part, not a q-part).
    """
    pos = lat.positions
    w_t = w_of_t or (lambda t: 1.0)
    omega = 2.0 * math.pi / tau if tau is not None else 1.0
    field_tau = tau if w_of_t is None else None

    def ev(t):
        shifted = pos + math.sin(omega * t)
        return amplitude * w_t(t) / (1.0 + np.linalg.norm(shifted, axis=1) ** a)

    return TimeField(
        lat, ELECTRIC, field_tau, ev,
        description=f"shifted_power_electric(A={amplitude}, a={a})",
        params={"amplitude": amplitude, "a": a},
    )


def site_oscillatory_electric(lat: FiniteLattice, amplitude: float, exponent: int | None = None) -> TimeField:
    """q_x(t) = A cos(r_x t) with r_x = max(1, |x|^m), m defaulting to 2d.

    The raw |x|^m rate degenerates at x = 0 (constant q, non-mean-zero
    primitive); the registered family clamps the rate at 1 there.  With
    integer positions every r_x is an integer, so the common period is 2 pi
    and Q_x(tau) = 0 exactly.
    """
    d = lat.graph.dimension
    m = 2 * d if exponent is None else exponent
    r = lat.radial_distance() ** m
    rate = np.maximum(1.0, r)
    if not np.allclose(rate, np.round(rate)):
        raise PotentialShapeMismatch(
            "site-oscillatory rates must be integers for a 2*pi common period"
        )
    rate = np.round(rate)
    tau = 2.0 * math.pi
    return TimeField(
        lat,
        ELECTRIC,
        tau,
        evaluate=lambda t: amplitude * np.cos(rate * t),
        primitive=lambda t: amplitude * np.sin(rate * t) / rate,
        description=f"site_oscillatory_electric(A={amplitude}, m={m})",
        params={"amplitude": amplitude, "exponent": m},
    )


def site_oscillatory_decaying_electric(
    lat: FiniteLattice, amplitude: float, a: float, gamma: float
) -> TimeField:
    """q_x(t) = A cos(max(1,|x|^a) t^gamma): oscillates faster as t grows (aperiodic)."""
    rate = np.maximum(1.0, lat.radial_distance() ** a)
    return TimeField(
        lat,
        ELECTRIC,
        None,
        evaluate=lambda t: amplitude * np.cos(rate * abs(t) ** gamma),
        description=f"site_oscillatory_decaying(A={amplitude}, a={a}, gamma={gamma})",
        params={"amplitude": amplitude, "a": a, "gamma": gamma},
    )


def tabulated_electric(lat: FiniteLattice, times: np.ndarray, values: np.ndarray) -> TimeField:
    """Per-vertex values on a time grid over one period, linearly interpolated."""
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    if values.shape != (times.size, lat.n_vertices):
        raise PotentialShapeMismatch(
            f"tabulated values must have shape (n_times, {lat.n_vertices})"
        )
    tau = float(times[-1])

    def ev(t):
        s = float(t) % tau
        out = np.empty(lat.n_vertices)
        for col in range(lat.n_vertices):  # small tables only; fine at desk scale
            out[col] = np.interp(s, times, values[:, col])
        return out

    return TimeField(lat, ELECTRIC, tau, ev, description="tabulated_electric")


# ---------------------------------------------------------------------------
# magnetic field families
# ---------------------------------------------------------------------------

def zero_magnetic(lat: FiniteLattice, tau: float) -> TimeField:
    z = np.zeros(lat.n_edges)
    return TimeField(lat, MAGNETIC, tau, lambda t: z, description="zero")


def static_magnetic(lat: FiniteLattice, alpha: StaticMagneticPotential, tau: float) -> TimeField:
    vals = alpha.values[lat.edge_cell]
    return TimeField(lat, MAGNETIC, tau, lambda t: vals, description="static")


def sinusoidal_magnetic(
    lat: FiniteLattice,
    tau: float,
    amplitude: float,
    b: np.ndarray,
    harmonic: int = 1,
    alpha: StaticMagneticPotential | None = None,
) -> TimeField:
    """beta(e,t) = alpha(e) + 2 A b_x b_y sin(2 pi m t / tau) on edge e=(x,y).

    The envelope saturates the decay bound |delta| <= 2 b_x b_y at |A| = 1.
    """
    bx, by = _edge_endpoint_values(lat, np.asarray(b, dtype=float))
    envelope = 2.0 * amplitude * bx * by
    base = alpha.values[lat.edge_cell] if alpha is not None else np.zeros(lat.n_edges)
    w = 2.0 * math.pi * harmonic / tau
    return TimeField(
        lat,
        MAGNETIC,
        tau,
        evaluate=lambda t: base + envelope * math.sin(w * t),
        description=f"sinusoidal_magnetic(A={amplitude}, m={harmonic})",
        params={"amplitude": amplitude, "harmonic": harmonic},
    )


def decaying_magnetic(lat: FiniteLattice, amplitude: float, F: np.ndarray, w_of_t) -> TimeField:
    """|beta(e,t)| <= w(t) F_y envelope for the time-decaying scenarios."""
    _, Fy = _edge_endpoint_values(lat, np.asarray(F, dtype=float))

    def ev(t):
        return amplitude * w_of_t(t) * Fy

    return TimeField(lat, MAGNETIC, None, ev, description="decaying_magnetic")


# ---------------------------------------------------------------------------
# primitives
# ---------------------------------------------------------------------------

@dataclass
class PrimitiveQ:
    """Q_x(t) = int_0^t q_x(s) ds with Q(0) = 0 and Q(tau) = 0 within tol."""

    lattice: FiniteLattice
    tau: float
    evaluate: callable
    tol: float
    method: str
    description: str = ""

    def mean_zero_defect(self) -> float:
        return float(np.max(np.abs(self.evaluate(self.tau)), initial=0.0))


def primitive_of(q: TimeField, method: str = "auto", n_nodes: int = 4097) -> PrimitiveQ:
    """Integrate an electric field from 0; closed form when registered.

    The quadrature path tabulates a cumulative Simpson integral on a uniform
    grid and interpolates linearly between nodes.  Raises PeriodMeanNonzero
    when |Q_x(tau)| exceeds tol_Q for some vertex.
    """
    if q.kind != ELECTRIC:
        raise PotentialShapeMismatch("primitive_of expects an electric-vertex field")
    if q.tau is None:
        raise PotentialShapeMismatch("primitive_of expects a periodic field")
    tau = q.tau
    sup = max(
        float(np.max(np.abs(q.evaluate(t)), initial=0.0))
        for t in np.linspace(0.0, tau, 17, endpoint=False)
    )
    tol_q = 1e-10 * tau * max(sup, 1.0)

    if method in ("auto", "closed_form") and q.primitive is not None:
        prim = PrimitiveQ(q.lattice, tau, q.primitive, tol_q, "closed_form", q.description)
    elif method == "closed_form":
        raise PotentialShapeMismatch(f"field {q.description!r} registers no closed-form primitive")
    else:
        if n_nodes % 2 == 0:
            n_nodes += 1
        ts = np.linspace(0.0, tau, n_nodes)
        samples = np.stack([q.evaluate(t) for t in ts])
        table = scipy.integrate.cumulative_simpson(samples, x=ts, axis=0, initial=0.0)
        spline = scipy.interpolate.CubicSpline(ts, table, axis=0)

        def ev(t, _spline=spline, _table=table, _tau=tau):
            # Q(t + tau) = Q(t) + Q(tau); Q(tau) = 0 is checked separately
            wraps, s = divmod(float(t), _tau)
            return _spline(s) + wraps * _table[-1]

        prim = PrimitiveQ(q.lattice, tau, ev, tol_q, "quadrature", q.description)

    defect = prim.mean_zero_defect()
    if defect > tol_q:
        raise PeriodMeanNonzero(
            f"|Q(tau)| = {defect:.3e} > tol_Q = {tol_q:.3e}: field {q.description!r} is not mean-zero"
        )
    return prim


# ---------------------------------------------------------------------------
# magnetic difference F(t) = Delta_beta(t) - Delta_alpha
# ---------------------------------------------------------------------------

def magnetic_difference(
    lat: FiniteLattice,
    beta: TimeField,
    alpha: StaticMagneticPotential | None,
    t: float,
    b: np.ndarray | None = None,
):
    """Assemble F(t) from the sine form and optionally its weighted version.

    (F f)_x = -i sum_{e=(x,y)} e^{i(alpha + delta/2)} sin(delta/2) f_y with
    delta = beta - alpha.  With a weight b the factorization F = b F_b b is
    returned along with ||F_b||, which stays <= kappa_plus whenever
    |delta(e,t)| <= b_x b_y.
    """
    if beta.kind != MAGNETIC:
        raise PotentialShapeMismatch("beta must be a magnetic field")
    avals = alpha.values[lat.edge_cell] if alpha is not None else np.zeros(lat.n_edges)
    delta = beta.evaluate(t) - avals
    n = lat.n_vertices
    i, j = lat.edge_origin, lat.edge_terminus
    amp = -1j * np.exp(1j * (avals + delta / 2.0)) * np.sin(delta / 2.0)
    rows = np.concatenate([i, j])
    cols = np.concatenate([j, i])
    data = np.concatenate([amp, np.conj(amp)])
    F = sp.csr_matrix((data, (rows, cols)), shape=(n, n))
    if b is None:
        return F, None, None
    b = np.asarray(b, dtype=float)
    if np.any(b == 0.0):
        raise WeightVanishes("weight b vanishes at a retained vertex")
    inv = 1.0 / b
    Fb = sp.diags(inv) @ F @ sp.diags(inv)
    norm = _sparse_two_norm(Fb)
    return F, Fb.tocsr(), norm


def _sparse_two_norm(A, n_iter: int = 60, seed: int = 7) -> float:
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(A.shape[0]) + 1j * rng.standard_normal(A.shape[0])
    v /= np.linalg.norm(v)
    Ah = A.conj().T.tocsr()
    last = 0.0
    for _ in range(n_iter):
        w = Ah @ (A @ v)
        s = np.linalg.norm(w)
        if s == 0.0:
            return 0.0
        v = w / s
        if abs(s - last) <= 1e-12 * max(s, 1.0):
            break
        last = s
    return float(np.sqrt(s))


# ---------------------------------------------------------------------------
# condition reports
# ---------------------------------------------------------------------------

PASS = "pass"
FAIL = "fail"
UNVERIFIABLE = "unverifiable-at-truncation"

CONDITION_NAMES = ("MZ_p", "MZ_a", "VZ_p", "VZ_a", "M", "V", "H", "R")


@dataclass
class ClauseResult:
    name: str
    verdict: str
    value: float | None
    detail: str = ""


@dataclass
class ConditionReport:
    """Per-clause verdicts for one named hypothesis class.

    Clauses that quantify over the infinite graph (tail sums, o(1) decay)
    can only be sampled on the truncation; they report the truncated value
    with the verdict 'unverifiable-at-truncation' rather than claiming an
    infinite-volume bound.  Pointwise bounds checked on every retained
    vertex/edge get pass/fail.
    """

    condition: str
    clauses: list
    weights: dict

    @property
    def overall(self) -> str:
        verdicts = [c.verdict for c in self.clauses]
        if FAIL in verdicts:
            return FAIL
        if UNVERIFIABLE in verdicts:
            return UNVERIFIABLE
        return PASS

    def passed(self, allow_unverifiable: bool = True) -> bool:
        if allow_unverifiable:
            return self.overall != FAIL
        return self.overall == PASS

    def as_dict(self) -> dict:
        return {
            "condition": self.condition,
            "overall": self.overall,
            "clauses": [
                {"name": c.name, "verdict": c.verdict, "value": c.value, "detail": c.detail}
                for c in self.clauses
            ],
        }


def _t_grid(tau: float, n_t: int) -> np.ndarray:
    return np.linspace(0.0, tau, n_t, endpoint=False)


def _decay_clause(name: str, lat: FiniteLattice, per_vertex_sup: np.ndarray) -> ClauseResult:
    """o(1) decay in |x|: compare per-shell maxima; verifiable only in trend."""
    sup_norm = np.abs(lat.offsets).max(axis=1)
    shells = np.arange(lat.radius + 1)
    shell_max = np.array(
        [per_vertex_sup[sup_norm == s].max(initial=0.0) for s in shells]
    )
    peak = shell_max.max(initial=0.0)
    outer = shell_max[-max(1, lat.radius // 4):].max(initial=0.0)
    if peak == 0.0:
        return ClauseResult(name, PASS, 0.0, "identically zero")
    ratio = outer / peak
    verdict = UNVERIFIABLE if ratio <= 0.5 else FAIL
    detail = f"outer-shell sup / peak = {ratio:.3e} (trend only; limit unverifiable)"
    if verdict == FAIL:
        detail = f"no decay visible at truncation: outer/peak = {ratio:.3e}"
    return ClauseResult(name, verdict, float(outer), detail)


def _need(weights: dict, *keys):
    missing = [k for k in keys if weights.get(k) is None]
    if missing:
        raise MissingWeight(f"condition clause needs weight data: {missing}")


def check_condition(
    name: str,
    lat: FiniteLattice,
    *,
    alpha: StaticMagneticPotential | None = None,
    beta: TimeField | None = None,
    p: StaticElectricPotential | None = None,
    v: TimeField | None = None,
    q: TimeField | None = None,
    weights: dict | None = None,
    n_t: int = 33,
    t_max: float = 20.0,
) -> ConditionReport:
    """Check the named hypothesis class numerically on the truncation.

    weights supplies the decay data a clause may need: b (per-vertex array),
    a or p (exponents), c and w (Condition R), F (per-vertex envelope).
    Time integrals use composite quadrature on n_t nodes per period.
    """
    if name not in CONDITION_NAMES:
        raise UnknownCondition(f"unknown condition {name!r}; expected one of {CONDITION_NAMES}")
    weights = dict(weights or {})
    clauses: list[ClauseResult] = []
    r = lat.radial_distance()

    def tau_of(*fields):
        for f in fields:
            if f is not None and f.tau is not None:
                return f.tau
        return 1.0

    if name in ("MZ_p", "MZ_a", "VZ_p", "VZ_a"):
        s = name[-1]
        _need(weights, "b")
        b = np.asarray(weights["b"], dtype=float)
        bx, by = _edge_endpoint_values(lat, b)

        # weight class membership
        if s == "a":
            _need(weights, "a")
            a = float(weights["a"])
            if a <= 1.0:
                clauses.append(ClauseResult("weight-class", FAIL, a, "needs a > 1"))
            else:
                val = float(np.max((1.0 + r) ** a * b**2))
                clauses.append(
                    ClauseResult(
                        "weight-class", UNVERIFIABLE, val,
                        f"sup (1+|x|)^a b^2 = {val:.3e} on truncation (a = {a})",
                    )
                )
        else:
            _need(weights, "p")
            pexp = float(weights["p"])
            d = lat.graph.dimension
            ok_range = (d == 3 and 1.0 <= pexp < 6.0 / 5.0) or (d >= 4 and 1.0 <= pexp < 4.0 / 3.0)
            if d < 3 or not ok_range:
                clauses.append(
                    ClauseResult("weight-class", FAIL, pexp, f"(d, p) = ({d}, {pexp}) outside the admissible range")
                )
            else:
                val = float(np.sum((b**2) ** pexp))
                clauses.append(
                    ClauseResult("weight-class", UNVERIFIABLE, val, f"truncated sum of (b^2)^p = {val:.3e}")
                )

        if name.startswith("MZ"):
            if beta is None:
                clauses.append(ClauseResult("magnetic-bound", PASS, 0.0, "no magnetic drive"))
            else:
                tau = tau_of(beta)
                clauses.append(
                    ClauseResult(
                        "magnetic-periodic",
                        PASS if beta.sample_periodicity_defect() <= 1e-12 else FAIL,
                        beta.sample_periodicity_defect(),
                    )
                )
                worst = 0.0
                for t in _t_grid(tau, n_t):
                    worst = max(worst, float(np.max(np.abs(beta.evaluate(t)) - 2.0 * bx * by, initial=-np.inf)))
                clauses.append(
                    ClauseResult(
                        "magnetic-bound",
                        PASS if worst <= 1e-12 else FAIL,
                        worst,
                        "max over edges,t of |beta| - 2 b_x b_y",
                    )
                )
        else:  # VZ_s
            tau = tau_of(v, q)
            if v is not None:
                worst = 0.0
                for t in _t_grid(tau, n_t):
                    worst = max(worst, float(np.max(np.abs(v.evaluate(t)) - b**2, initial=-np.inf)))
                clauses.append(
                    ClauseResult("v-bound", PASS if worst <= 1e-12 else FAIL, worst,
                                 "max over x,t of |v_x(t)| - b_x^2")
                )
            else:
                clauses.append(ClauseResult("v-bound", PASS, 0.0, "no v part"))
            if q is not None:
                Q = primitive_of(q)
                clauses.append(ClauseResult("q-mean-zero", PASS, Q.mean_zero_defect(),
                                            "checked by primitive_of"))
                ts = _t_grid(tau, n_t)
                Qs = np.stack([Q.evaluate(t) for t in ts])
                sup_Q = np.abs(Qs).max(axis=0)
                clauses.append(_decay_clause("Q-decay", lat, sup_Q))
                worst = float(np.max(np.abs(Qs[:, lat.edge_terminus] - Qs[:, lat.edge_origin]) - bx * by,
                                     initial=-np.inf))
                clauses.append(
                    ClauseResult("Q-difference-bound", PASS if worst <= 1e-12 else FAIL, worst,
                                 "max over edges,t of |Q_y - Q_x| - b_x b_y")
                )
            else:
                clauses.append(ClauseResult("q-mean-zero", PASS, 0.0, "no q part"))

    elif name == "M":
        clauses.append(
            ClauseResult(
                "p-static-bounded",
                PASS if (p is None or np.isfinite(p.values).all()) else FAIL,
                float(np.max(np.abs(p.values))) if p is not None else 0.0,
            )
        )
        if beta is None:
            clauses.append(ClauseResult("sin-delta-integrable", PASS, 0.0, "no magnetic drive"))
        else:
            tau = tau_of(beta)
            clauses.append(
                ClauseResult("delta-periodic",
                             PASS if beta.sample_periodicity_defect() <= 1e-12 else FAIL,
                             beta.sample_periodicity_defect())
            )
            avals = alpha.values[lat.edge_cell] if alpha is not None else np.zeros(lat.n_edges)
            ts = np.linspace(0.0, tau, n_t)
            integrand = [float(np.sum(np.abs(np.sin(beta.evaluate(t) - avals)))) for t in ts]
            val = float(scipy.integrate.simpson(integrand, x=ts))
            clauses.append(
                ClauseResult("sin-delta-integrable", UNVERIFIABLE, val,
                             "int_0^tau sum_e |sin delta(e,t)| dt over retained edges")
            )

    elif name == "V":
        tau = tau_of(v, q)
        ts = np.linspace(0.0, tau, n_t)
        if v is not None:
            vals = [float(np.sum(np.abs(v.evaluate(t)))) for t in ts]
            clauses.append(ClauseResult("v-L1-l1", UNVERIFIABLE,
                                        float(scipy.integrate.simpson(vals, x=ts)),
                                        "int ||v(t)||_l1 dt, truncated"))
        else:
            clauses.append(ClauseResult("v-L1-l1", PASS, 0.0, "no v part"))
        if q is not None:
            vals = [float(np.max(np.abs(q.evaluate(t)), initial=0.0)) for t in ts]
            clauses.append(ClauseResult("q-L1-linf", UNVERIFIABLE,
                                        float(scipy.integrate.simpson(vals, x=ts)),
                                        "int sup_x |q_x(t)| dt, truncated"))
            Q = primitive_of(q)
            clauses.append(ClauseResult("Q-mean-zero", PASS, Q.mean_zero_defect()))
            Qs = np.stack([Q.evaluate(t) for t in ts])
            l2 = np.sum(np.abs(Qs) ** 2, axis=1)
            clauses.append(ClauseResult("Q-L2-l2", UNVERIFIABLE,
                                        float(scipy.integrate.simpson(l2, x=ts)),
                                        "int ||Q(t)||_l2^2 dt, truncated"))
            diff = np.abs(Qs[:, lat.edge_terminus] - Qs[:, lat.edge_origin]).sum(axis=1)
            clauses.append(ClauseResult("Q-difference-L1", UNVERIFIABLE,
                                        float(scipy.integrate.simpson(diff, x=ts)),
                                        "int sum_e |Q_y - Q_x| dt, truncated"))
        else:
            clauses.append(ClauseResult("Q-mean-zero", PASS, 0.0, "no q part"))

    elif name == "H":
        tau = tau_of(v, q)
        ts = np.linspace(0.0, tau, n_t)
        if q is not None:
            qnorm = [float(np.max(np.abs(q.evaluate(t)), initial=0.0)) for t in ts]
            clauses.append(ClauseResult("q-L1-opnorm", UNVERIFIABLE,
                                        float(scipy.integrate.simpson(qnorm, x=ts))))
            Q = primitive_of(q)
            clauses.append(ClauseResult("Q-mean-zero", PASS, Q.mean_zero_defect()))
            Qs = np.stack([Q.evaluate(t) for t in ts])
            hs = np.sum(np.abs(Qs) ** 2, axis=1)
            clauses.append(ClauseResult("Q-L2-HS", UNVERIFIABLE,
                                        float(scipy.integrate.simpson(hs, x=ts)),
                                        "int ||Q(t)||_HS^2 dt (diagonal)"))
            # J2(t) = int_0^t q Q ds = Q(t)^2 / 2 for a commuting diagonal family
            j2 = 0.5 * np.sum(Qs**2, axis=1)
            clauses.append(ClauseResult("J2-bounded", UNVERIFIABLE, float(j2.max(initial=0.0)),
                                        "sup_t ||int_0^t q Q||_B1"))
            h0 = laplacian_from_phases(lat, np.zeros(lat.n_edges))
            commutator_trace = []
            for row in Qs:
                K = sp.diags(row) @ h0 - h0 @ sp.diags(row)
                commutator_trace.append(float(np.abs(np.linalg.svd(K.toarray(), compute_uv=False)).sum()))
            clauses.append(ClauseResult("commutator-L1-trace", UNVERIFIABLE,
                                        float(scipy.integrate.simpson(commutator_trace, x=ts)),
                                        "int ||Q h0 - h0 Q||_B1 dt, truncated"))
        else:
            clauses.append(ClauseResult("Q-mean-zero", PASS, 0.0, "no q part"))
        if v is not None:
            tr = [float(np.sum(np.abs(v.evaluate(t)))) for t in ts]
            clauses.append(ClauseResult("v-L1-trace", UNVERIFIABLE,
                                        float(scipy.integrate.simpson(tr, x=ts))))

    elif name == "R":
        _need(weights, "w", "b", "c", "a")
        w_fn = weights["w"]
        b = np.asarray(weights["b"], dtype=float)
        F = weights["c"] * rho_weight(lat, weights["a"]) + b
        ts = np.linspace(0.25, t_max, n_t)
        if q is not None:
            if q.primitive is not None:
                Qs = np.stack([q.primitive(t) for t in np.linspace(1.0, t_max, n_t)])
            else:
                fine = np.linspace(0.0, t_max, 2049)
                samples = np.stack([q.evaluate(t) for t in fine])
                table = scipy.integrate.cumulative_simpson(samples, x=fine, axis=0, initial=0.0)
                Qs = table[fine >= 1.0]
            clauses.append(_decay_clause("Q-decay-late-times", lat, np.abs(Qs).max(axis=0)))
        else:
            Qs = None
            clauses.append(ClauseResult("Q-decay-late-times", PASS, 0.0, "no q part"))
        if v is not None:
            worst = max(
                float(np.max(np.abs(v.evaluate(t)) - abs(w_fn(t)) * F, initial=-np.inf)) for t in ts
            )
            clauses.append(ClauseResult("v-envelope", PASS if worst <= 1e-12 else FAIL, worst,
                                        "max over x,t of |v_x(t)| - w(t) F_x"))
        if beta is not None or Qs is not None:
            _, Fy = _edge_endpoint_values(lat, F)
            worst = -np.inf
            for i_t, t in enumerate(ts):
                total = np.zeros(lat.n_edges)
                if beta is not None:
                    total += np.abs(beta.evaluate(t))
                if q is not None and q.primitive is not None:
                    Qt = q.primitive(t)
                    total += np.abs(Qt[lat.edge_terminus] - Qt[lat.edge_origin])
                worst = max(worst, float(np.max(total - abs(w_fn(t)) * Fy, initial=-np.inf)))
            clauses.append(ClauseResult("magnetic-Q-envelope", PASS if worst <= 1e-12 else FAIL,
                                        worst, "max of |beta| + |Q_y - Q_x| - w(t) F_y"))
        wvals = np.array([abs(w_fn(t)) ** 2 for t in np.linspace(0.0, t_max, 257)])
        clauses.append(ClauseResult("w-L2", UNVERIFIABLE,
                                    float(scipy.integrate.simpson(wvals, x=np.linspace(0.0, t_max, 257))),
                                    f"int_0^{t_max} w^2 dt (tail unverifiable)"))

    return ConditionReport(condition=name, clauses=clauses, weights={k: v for k, v in weights.items() if not callable(v) and not isinstance(v, np.ndarray)})


# ---------------------------------------------------------------------------
# potential spec documents
# ---------------------------------------------------------------------------

def _w_from_spec(spec: dict):
    from .errors import MalformedSpec

    family = spec.get("family")
    if family == "inverse_power":
        power = float(spec.get("power", 1.0))
        return lambda t: (1.0 + abs(t)) ** (-power)
    if family == "inverse_sqrt_quad":
        return lambda t: 1.0 / math.sqrt(1.0 + t * t)
    if family == "one":
        return lambda t: 1.0
    raise MalformedSpec(f"unknown time-envelope family {family!r}")


def electric_field_from_spec(lat: FiniteLattice, spec: dict, tau: float | None) -> TimeField:
    """Build an electric TimeField from a potential spec document (dict)."""
    from .errors import MalformedSpec

    if not isinstance(spec, dict) or "family" not in spec:
        raise MalformedSpec(f"potential spec must be a dict with a 'family' key, got {spec!r}")
    family = spec["family"]
    if family == "zero":
        return zero_electric(lat, tau or 1.0)
    if family in ("cosine", "sinusoidal"):
        prof_spec = dict(spec.get("profile", {"family": "uniform"}))
        prof = spatial_profile(lat, prof_spec.pop("family"), **prof_spec)
        ctor = cosine_electric if family == "cosine" else sinusoidal_electric
        if tau is None:
            raise MalformedSpec(f"family {family!r} needs a period tau")
        return ctor(lat, tau, float(spec["amplitude"]), prof, harmonic=int(spec.get("harmonic", 1)))
    if family == "shifted_power":
        w_fn = _w_from_spec(spec["w"]) if "w" in spec else None
        if tau is None and w_fn is None:
            raise MalformedSpec("family 'shifted_power' needs a period tau or a decay envelope w")
        return shifted_power_electric(lat, tau, float(spec["amplitude"]), float(spec["a"]), w_of_t=w_fn)
    if family == "site_oscillatory":
        return site_oscillatory_electric(lat, float(spec["amplitude"]), spec.get("exponent"))
    if family == "site_oscillatory_decaying":
        return site_oscillatory_decaying_electric(
            lat, float(spec["amplitude"]), float(spec["a"]), float(spec["gamma"])
        )
    raise MalformedSpec(f"unknown electric family {family!r}")


def magnetic_field_from_spec(
    lat: FiniteLattice,
    spec: dict,
    tau: float | None,
    alpha: StaticMagneticPotential | None = None,
) -> TimeField:
    """Build a magnetic TimeField from a potential spec document (dict)."""
    from .errors import MalformedSpec

    if not isinstance(spec, dict) or "family" not in spec:
        raise MalformedSpec(f"potential spec must be a dict with a 'family' key, got {spec!r}")
    family = spec["family"]
    if family == "zero":
        return zero_magnetic(lat, tau or 1.0)
    if family == "static":
        if alpha is None:
            raise MalformedSpec("family 'static' needs a static magnetic potential alpha")
        return static_magnetic(lat, alpha, tau or 1.0)
    if family == "sinusoidal_magnetic":
        b_spec = spec.get("b", {"a": 2.0})
        b = weight_b(lat, float(b_spec["a"]), float(b_spec.get("scale", 1.0)))
        if tau is None:
            raise MalformedSpec("family 'sinusoidal_magnetic' needs a period tau")
        return sinusoidal_magnetic(
            lat, tau, float(spec["amplitude"]), b,
            harmonic=int(spec.get("harmonic", 1)), alpha=alpha,
        )
    raise MalformedSpec(f"unknown magnetic family {family!r}")
