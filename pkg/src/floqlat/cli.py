"""Batch front door: validate experiment configs, run pipelines, write artifacts.

One subcommand per experiment kind, a config file as the source of truth and
flags only for overrides:

    floqlat bands --config cfg.json --out outdir [--override n_k=128]

Every run writes a manifest (resolved config, library versions, stage
timings) next to the kind-specific CSV/JSON outputs and a human-readable
summary.  Outputs are deterministic for a fixed config and seed; manifest
timings are the one exception.

Exit codes: 0 verdict pass, 2 "not converged at this scale", 1 error.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .driving import (
    electric_field_from_spec,
    magnetic_field_from_spec,
    primitive_of,
)
from .errors import ConfigInvalid, FloqlatError
from .evolution import DrivenHamiltonian, monodromy, quasienergy_spectrum
from .gauge import gauge_equivalence_check, gauge_transform
from .howland import HowlandVector, resolvent_agreement
from .lattice import build_periodic_graph, truncate
from .scattering import (
    ScatteringConfig,
    gaussian_packet,
    time_decaying_scenario,
    wave_operator_apply,
    weighted_resolvent_sample,
)
from .spectral import StaticElectricPotential, StaticMagneticPotential, band_structure

KINDS = ("bands", "quasienergy", "gauge-check", "scattering", "time-decaying", "resolvent-sample")

_REQUIRED: dict[str, tuple[str, ...]] = {
    "bands": ("graph", "n_k"),
    "quasienergy": ("graph", "L", "tau", "n_steps"),
    "gauge-check": ("graph", "L", "tau", "fields", "ladder"),
    "scattering": ("graph", "L", "n_periods", "n_steps"),
    "time-decaying": ("graph", "L", "fields", "t_max", "n_report"),
    "resolvent-sample": ("dimension", "a", "L", "lambdas"),
}

_ALLOWED = {
    "kind", "graph", "L", "tau", "n_k", "n_steps", "n_periods", "n_report",
    "t_max", "steps_per_interval", "fields", "packet", "ladder", "dimension",
    "a", "lambdas", "delta", "seed", "thresholds", "save_monodromy",
    "gauge_comparison", "stepper", "out",
}


@dataclass
class ExperimentConfig:
    kind: str
    raw: dict = field(default_factory=dict)

    def __getitem__(self, key):
        return self.raw[key]

    def get(self, key, default=None):
        return self.raw.get(key, default)


def load_config(path: str | Path, overrides: list[str] | None = None) -> ExperimentConfig:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigInvalid(f"cannot load config {path}: {exc}") from exc
    for item in overrides or []:
        if "=" not in item:
            raise ConfigInvalid(f"override {item!r} must look like key=value")
        key, value = item.split("=", 1)
        try:
            parsed = json.loads(value)
        except json.JSONDecodeError:
            parsed = value
        target = raw
        parts = key.split(".")
        for part in parts[:-1]:
            target = target.setdefault(part, {})
        target[parts[-1]] = parsed
    cfg = ExperimentConfig(kind=raw.get("kind", ""), raw=raw)
    validate(cfg, config_dir=Path(path).parent)
    return cfg


def validate(cfg: ExperimentConfig, config_dir: Path | None = None) -> None:
    """Schema and cross-field checks; raises ConfigInvalid naming the fields."""
    problems = []
    if cfg.kind not in KINDS:
        problems.append(f"kind: unknown experiment kind {cfg.kind!r}, expected one of {KINDS}")
    unknown = set(cfg.raw) - _ALLOWED
    if unknown:
        problems.append(f"unknown keys: {sorted(unknown)}")
    for key in _REQUIRED.get(cfg.kind, ()):
        if key not in cfg.raw:
            problems.append(f"{key}: required for kind {cfg.kind!r}")
    for knob in ("L", "n_k", "n_steps", "n_periods", "n_report", "dimension"):
        if knob in cfg.raw and (not isinstance(cfg.raw[knob], int) or cfg.raw[knob] <= 0):
            problems.append(f"{knob}: must be a positive integer, got {cfg.raw[knob]!r}")
    for knob in ("tau", "t_max", "a", "delta"):
        if knob in cfg.raw and not (isinstance(cfg.raw[knob], (int, float)) and cfg.raw[knob] > 0):
            problems.append(f"{knob}: must be positive, got {cfg.raw[knob]!r}")
    graph = cfg.get("graph")
    if isinstance(graph, str):
        gpath = Path(graph)
        if not gpath.is_absolute() and config_dir is not None:
            gpath = config_dir / gpath
        if not gpath.exists():
            problems.append(f"graph: file {graph!r} does not exist")
        else:
            cfg.raw["graph"] = str(gpath)
    if problems:
        raise ConfigInvalid("; ".join(problems))


def _rng(cfg: ExperimentConfig) -> np.random.Generator:
    return np.random.default_rng(int(cfg.get("seed", 0)))


def _graph(cfg: ExperimentConfig):
    return build_periodic_graph(cfg["graph"])


def _static_potentials(cfg, graph):
    fields = cfg.get("fields", {}) or {}
    alpha = None
    p = None
    if "alpha" in fields:
        spec = fields["alpha"]
        if spec.get("kind") == "constant":
            alpha = StaticMagneticPotential.constant(graph, float(spec["value"]))
        elif spec.get("kind") == "values":
            alpha = StaticMagneticPotential(graph, np.asarray(spec["values"], dtype=float))
        elif spec.get("kind") == "random":
            rng = np.random.default_rng(int(spec.get("seed", 0)))
            alpha = StaticMagneticPotential.random(graph, rng, float(spec.get("scale", math.pi)))
        else:
            raise ConfigInvalid(f"fields.alpha.kind: unknown {spec.get('kind')!r}")
    if "p" in fields:
        spec = fields["p"]
        if spec.get("kind") == "constant":
            p = StaticElectricPotential.constant(graph, float(spec["value"]))
        elif spec.get("kind") == "values":
            p = StaticElectricPotential(graph, np.asarray(spec["values"], dtype=float))
        else:
            raise ConfigInvalid(f"fields.p.kind: unknown {spec.get('kind')!r}")
    return alpha, p


def _driven_hamiltonian(cfg, graph, lat) -> DrivenHamiltonian:
    fields = cfg.get("fields", {}) or {}
    alpha, p = _static_potentials(cfg, graph)
    tau = cfg.get("tau")
    beta = v = q = None
    if "beta" in fields:
        beta = magnetic_field_from_spec(lat, fields["beta"], tau, alpha)
    if "v" in fields:
        v = electric_field_from_spec(lat, fields["v"], tau)
    if "q" in fields:
        q = electric_field_from_spec(lat, fields["q"], tau)
        if tau is None:
            tau = q.tau  # site-oscillatory families fix their own period
    return DrivenHamiltonian(lattice=lat, tau=tau, alpha=alpha, p=p, beta=beta, v=v, q=q)


def _packet(cfg, lat):
    spec = cfg.get("packet", {}) or {}
    width = float(spec.get("width", 8.0))
    momentum = spec.get("momentum", math.pi / 2.0)
    center = spec.get("center")
    return gaussian_packet(lat, width, momentum, center)


def _write_json(path: Path, payload: dict) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


class _Runner:
    def __init__(self, cfg: ExperimentConfig, out_dir: Path):
        self.cfg = cfg
        self.out = out_dir
        self.timings: dict[str, float] = {}
        self.summary_lines: list[str] = []

    def timed(self, stage: str, fn, *args, **kwargs):
        t0 = time.perf_counter()
        result = fn(*args, **kwargs)
        self.timings[stage] = time.perf_counter() - t0
        return result

    def finish(self, verdict: str, exit_code: int) -> int:
        manifest = {
            "config": self.cfg.raw,
            "verdict": verdict,
            "versions": {
                "floqlat": __version__,
                "numpy": np.__version__,
                "scipy": __import__("scipy").__version__,
                "python": sys.version.split()[0],
            },
            "timings_s": {k: round(v, 6) for k, v in self.timings.items()},
        }
        _write_json(self.out / "manifest.json", manifest)
        self.summary_lines.append(f"verdict: {verdict}")
        (self.out / "summary.txt").write_text("\n".join(self.summary_lines) + "\n")
        return exit_code


def _run_bands(cfg: ExperimentConfig, out: Path) -> int:
    runner = _Runner(cfg, out)
    graph = _graph(cfg)
    alpha, p = _static_potentials(cfg, graph)
    n_jobs = int(os.environ.get("FLOQLAT_THREADS", "1"))
    bands = runner.timed(
        "bands", band_structure, graph, alpha, p, int(cfg["n_k"]), n_jobs=n_jobs
    )
    bands.to_csv(out / "bands.csv")
    bands.to_json(out / "bands.json")
    union = bands.union_spectrum()
    sigma = "∪".join(f"[{a:.6f},{b:.6f}]" for a, b in union)
    runner.summary_lines.append(f"σ={sigma}")
    flats = [i + 1 for i, fl in enumerate(bands.flat_flags) if fl]
    runner.summary_lines.append(f"flat sheets: {flats if flats else 'none'}")
    return runner.finish("pass", 0)


def _run_quasienergy(cfg: ExperimentConfig, out: Path) -> int:
    runner = _Runner(cfg, out)
    graph = _graph(cfg)
    lat = truncate(graph, int(cfg["L"]))
    h = _driven_hamiltonian(cfg, graph, lat)
    stepper = cfg.get("stepper", "midpoint")
    M = runner.timed("monodromy", monodromy, h, 0.0, int(cfg["n_steps"]), stepper=stepper)
    spec = quasienergy_spectrum(M, h.tau)
    if cfg.get("save_monodromy"):
        np.save(out / "monodromy.npy", M)

    # Howland-side diagnostics on a small static core: omega-shift identity
    h0 = h.comparison("h_alpha").toarray()
    rng = _rng(cfg)
    n_max, n_small = 16, min(8, h0.shape[0])
    coeffs = np.zeros((2 * n_max + 1, n_small), dtype=complex)
    for offset in range(-4, 5):
        coeffs[n_max + offset] = (rng.standard_normal(n_small) + 1j * rng.standard_normal(n_small)) / (
            1.0 + offset * offset
        )
    f = HowlandVector(coeffs=coeffs, omega=spec.omega)
    diag = resolvent_agreement(h0[:n_small, :n_small], 0.37 + 1.1j * spec.omega, f, n_t=128)

    payload = {
        "omega": spec.omega,
        "tau": h.tau,
        "unitarity_defect": spec.unitarity_defect,
        "quasienergies": [float(x) for x in spec.quasienergies],
        "eigenphases": [[float(m.real), float(m.imag)] for m in spec.eigenvalues],
        "howland": diag,
    }
    _write_json(out / "quasienergy.json", payload)
    runner.summary_lines.append(
        f"{len(spec.quasienergies)} quasienergies in [0,{spec.omega:.6f}), "
        f"unitarity defect {spec.unitarity_defect:.3e}"
    )
    runner.summary_lines.append(f"omega-shift identity defect {diag['omega_shift_defect']:.3e}")
    return runner.finish("pass", 0)


def _run_gauge_check(cfg: ExperimentConfig, out: Path) -> int:
    runner = _Runner(cfg, out)
    graph = _graph(cfg)
    lat = truncate(graph, int(cfg["L"]))
    h = _driven_hamiltonian(cfg, graph, lat)
    if h.q is None:
        raise ConfigInvalid("fields.q: gauge-check needs an oscillating q part")
    Q = primitive_of(h.q)
    ladder = [int(n) for n in cfg["ladder"]]
    results = []
    for n_steps in ladder:
        results.append(runner.timed(f"check_{n_steps}", gauge_equivalence_check, h, Q, n_steps))
    slopes = []
    for lo, hi in zip(results, results[1:]):
        ratio = lo["monodromy_defect"] / max(hi["monodromy_defect"], 1e-300)
        step_ratio = hi["n_steps"] / lo["n_steps"]
        slopes.append(math.log(ratio) / math.log(step_ratio))
    payload = {"ladder": results, "order_estimates": slopes}
    _write_json(out / "gauge.json", payload)
    runner.summary_lines.append(
        f"eigenphase discrepancy at n_steps={ladder[-1]}: "
        f"{results[-1]['eigenphase_discrepancy']:.3e}"
    )
    if slopes:
        runner.summary_lines.append(f"defect order estimates: {[f'{s:.2f}' for s in slopes]}")
    return runner.finish("pass", 0)


def _run_scattering(cfg: ExperimentConfig, out: Path) -> int:
    runner = _Runner(cfg, out)
    graph = _graph(cfg)
    lat = truncate(graph, int(cfg["L"]))
    h = _driven_hamiltonian(cfg, graph, lat)
    thresholds = cfg.get("thresholds", {}) or {}
    sc_cfg = ScatteringConfig(
        convergence_threshold=float(thresholds.get("convergence", 1e-3)),
        boundary_cap=float(thresholds.get("boundary", 1e-6)),
        n_steps_per_period=int(cfg["n_steps"]),
        stepper=cfg.get("stepper", "midpoint"),
    )
    f = _packet(cfg, lat)
    report = runner.timed(
        "wave_operator",
        wave_operator_apply,
        h,
        f,
        int(cfg["n_periods"]),
        config=sc_cfg,
        scenario="cli-scattering",
    )
    report.to_json(out / "report.json")
    report.to_csv(out / "trace.csv")
    runner.summary_lines.append(
        f"final decrement {report.final_decrement:.3e}, "
        f"max isometry defect {max(report.isometry_defects):.3e}, "
        f"max boundary mass {max(report.boundary_masses):.3e}"
    )

    if cfg.get("gauge_comparison"):
        if h.q is None:
            raise ConfigInvalid("fields.q: gauge_comparison needs an oscillating q part")
        Q = primitive_of(h.q)
        gauged = gauge_transform(h, Q)
        report_g = runner.timed(
            "wave_operator_gauged",
            wave_operator_apply,
            gauged,
            f,
            int(cfg["n_periods"]),
            config=sc_cfg,
            scenario="cli-scattering-gauged",
        )
        report_g.to_json(out / "report_gauged.json")
        report_g.to_csv(out / "trace_gauged.csv")
        mismatch = float(np.linalg.norm(report.final_state - report_g.final_state))
        runner.summary_lines.append(f"direct vs gauge-transformed W_n f mismatch: {mismatch:.3e}")
        _write_json(out / "gauge_comparison.json", {"final_state_mismatch": mismatch})
        ok = report.converged and report_g.converged
        return runner.finish("pass" if ok else "not-converged-at-this-scale", 0 if ok else 2)

    return runner.finish(report.verdict, 0 if report.converged else 2)


def _run_time_decaying(cfg: ExperimentConfig, out: Path) -> int:
    runner = _Runner(cfg, out)
    graph = _graph(cfg)
    lat = truncate(graph, int(cfg["L"]))
    h = _driven_hamiltonian(cfg, graph, lat)
    f = _packet(cfg, lat)
    thresholds = cfg.get("thresholds", {}) or {}
    sc_cfg = ScatteringConfig(
        convergence_threshold=float(thresholds.get("convergence", 1e-3)),
        boundary_cap=float(thresholds.get("boundary", 1e-6)),
    )
    report = runner.timed(
        "time_decaying",
        time_decaying_scenario,
        h,
        f,
        float(cfg["t_max"]),
        int(cfg["n_report"]),
        steps_per_interval=int(cfg.get("steps_per_interval", 64)),
        config=sc_cfg,
        scenario="cli-time-decaying",
    )
    report.to_json(out / "report.json")
    report.to_csv(out / "trace.csv")
    if report.meta.get("out_of_theorem"):
        runner.summary_lines.append("NOTE: d < 3 run, outside the theorem's hypotheses")
    runner.summary_lines.append(
        f"final decrement {report.final_decrement:.3e}, "
        f"final adjoint decrement {report.meta['adjoint_decrements'][-1]:.3e}"
    )
    return runner.finish(report.verdict, 0 if report.converged else 2)


def _run_resolvent(cfg: ExperimentConfig, out: Path) -> int:
    runner = _Runner(cfg, out)
    d = int(cfg["dimension"])
    a = float(cfg["a"])
    lams = [complex(entry[0], entry[1]) for entry in cfg["lambdas"]]
    rows = runner.timed(
        "resolvent",
        weighted_resolvent_sample,
        d,
        a,
        lams,
        L=int(cfg["L"]),
        delta=float(cfg.get("delta", 0.05)),
        rng=_rng(cfg),
    )
    with open(out / "resolvent.csv", "w") as fh:
        fh.write("lambda_re,lambda_im,norm,rho,norm_times_rho\n")
        for r in rows:
            fh.write(
                f"{r['lambda_re']:.17g},{r['lambda_im']:.17g},{r['norm']:.17g},"
                f"{r['rho']:.17g},{r['norm_times_rho']:.17g}\n"
            )
    norms = [r["norm"] for r in rows]
    spread = (max(norms) - min(norms)) / max(max(norms), 1e-300) if norms else 0.0
    payload = {"rows": rows, "norm_spread": spread, "neumann_scale": 1.0}
    _write_json(out / "resolvent.json", payload)
    runner.summary_lines.append(f"{len(rows)} lambda samples, norm spread {spread:.2%}")
    return runner.finish("pass", 0)


_RUNNERS = {
    "bands": _run_bands,
    "quasienergy": _run_quasienergy,
    "gauge-check": _run_gauge_check,
    "scattering": _run_scattering,
    "time-decaying": _run_time_decaying,
    "resolvent-sample": _run_resolvent,
}


def run(cfg: ExperimentConfig, out_dir: str | Path) -> int:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return _RUNNERS[cfg.kind](cfg, out)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="floqlat",
        description="Band structure, quasienergy, gauge and scattering pipelines on periodic graphs",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for kind in KINDS + ("validate",):
        p = sub.add_parser(kind)
        p.add_argument("--config", required=True)
        p.add_argument("--out", default=None)
        p.add_argument("--override", action="append", default=[])

    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config, args.override)
        if args.command == "validate":
            print(f"config OK: kind={cfg.kind}")
            return 0
        if cfg.kind != args.command:
            raise ConfigInvalid(
                f"config declares kind {cfg.kind!r} but subcommand is {args.command!r}"
            )
        out_dir = args.out or cfg.get("out") or f"floqlat_out_{cfg.kind}"
        code = run(cfg, out_dir)
        print((Path(out_dir) / "summary.txt").read_text().rstrip())
        return code
    except ConfigInvalid as exc:
        print(f"config invalid: {exc}", file=sys.stderr)
        return 1
    except FloqlatError as exc:
        print(f"error [{type(exc).__name__}]: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
