"""Batch runs: ``orlihom <command> --config <path> --out <dir> [--jobs K]``.

The config is an INI file with sections ``integrand``, ``field``, ``mesh``,
``solver`` and ``run``.  Each run writes ``results.csv`` and
``manifest.json`` into the output directory.  A manifest can be passed back
as ``--config`` to regenerate the same table.

Exit status: 0 when every solve converged and every property check passed,
1 otherwise, 2 for an invalid configuration.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import hashlib
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .field import ConfigurationError, LatticeField, periodic_field, sample_lattice_field
from .homogenize import gamma_cell, phi_estimate, zeta_estimate
from .integrand import (
    DoublePhase,
    ExponentWindow,
    IntegrandSpec,
    NonconvexSpec,
    PowerRadial,
    VariableExponent,
    ElementField,
    luxemburg_norm,
    modular,
    validate_structure,
)
from .mesh import CubeMesh
from .solver import SolverConfig
from .verify import analytic_oracle, refinement_margin, structural_suite


COMMANDS = ("gamma", "zeta", "phi", "verify", "oracle", "luxemburg")


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.replace(",", " ").split()]


def _seeds(text: str) -> list[int]:
    out = []
    for part in text.replace(",", " ").split():
        if "-" in part[1:]:
            lo, hi = part.split("-", 1)
            out.extend(range(int(lo), int(hi) + 1))
        else:
            out.append(int(part))
    return out


class RunConfig:
    """Parsed and validated run configuration."""

    def __init__(self, text: str):
        self.text = text
        cp = configparser.ConfigParser(inline_comment_prefixes=(";",))
        try:
            cp.read_string(text)
        except configparser.Error as exc:
            raise ConfigurationError(f"unreadable config: {exc}") from exc
        for sec in ("integrand", "mesh"):
            if not cp.has_section(sec):
                raise ConfigurationError(f"missing section [{sec}]")
        for sec in ("field", "solver", "run"):
            if not cp.has_section(sec):
                cp.add_section(sec)
        self.cp = cp
        m = cp["mesh"]
        self.dim = m.getint("dim", 1)
        self.components = m.getint("components", 1)
        self.n = m.getint("n", 16)
        s = cp["solver"]
        self.solver = SolverConfig(
            tol_g=s.getfloat("tol_g", 1e-8),
            tol_e=s.getfloat("tol_e", 1e-12),
            max_iter=s.getint("max_iter", 10000),
            memory=s.getint("memory", 10),
            multistart_count=s.getint("multistart_count", 8),
            multistart_seed=s.getint("multistart_seed", 0),
        )
        self.field = self._field(cp["field"])
        self.spec = self._integrand(cp["integrand"])
        r = cp["run"]
        self.sigmas = self._sigmas(r)
        self.t_list = [int(v) for v in _floats(r.get("t_list", "4 8"))]
        self.seeds = _seeds(r.get("seeds", "0-3"))
        self.jobs = r.getint("jobs", os.cpu_count() or 1)
        self.sample_budget = r.getint("sample_budget", 200)

    def _field(self, sec) -> LatticeField | None:
        kind = sec.get("kind", "none")
        if kind == "none":
            return None
        if kind == "periodic":
            vals = _floats(sec["pattern"])
            shape = [int(v) for v in _floats(sec.get("shape", str(len(vals))))]
            pat = np.array(vals).reshape(shape)
            return periodic_field(pat, self.dim)
        if kind == "random":
            palette = []
            for item in sec["palette"].split(","):
                v, p = item.split(":")
                palette.append((float(v), float(p)))
            return sample_lattice_field(sec.getint("seed", 0), palette, dim=self.dim)
        raise ConfigurationError(f"unknown field kind {kind!r}")

    def _integrand(self, sec):
        fam_name = sec.get("family", "power")
        coef = self.field if self.field is not None else sec.getfloat("a", 1.0)
        if fam_name == "power":
            fam = PowerRadial(coef, sec.getfloat("p"))
        elif fam_name == "variable_exponent":
            fam = VariableExponent(self.field if self.field is not None else sec.getfloat("p"))
        elif fam_name == "double_phase":
            fam = DoublePhase(coef, sec.getfloat("b", 1.0), sec.getfloat("p"), sec.getfloat("q"))
        else:
            raise ConfigurationError(f"unknown family {fam_name!r}")
        nat = fam.natural_window()
        window = ExponentWindow(
            sec.getfloat("p_minus", nat.p_minus), sec.getfloat("p_plus", nat.p_plus)
        )
        if "alpha" not in sec or "beta" not in sec:
            raise ConfigurationError("[integrand] needs alpha and beta")
        spec = IntegrandSpec(fam, window, sec.getfloat("alpha"), sec.getfloat("beta"))
        self.bump = sec.getfloat("bump_amplitude", 0.0)
        return spec

    def _sigmas(self, sec) -> list[np.ndarray]:
        shape = (self.components, self.dim)
        size = self.components * self.dim
        if "sigmas" in sec:
            mats = [_floats(chunk) for chunk in sec["sigmas"].split(";") if chunk.strip()]
        elif "direction" in sec:
            direction = np.array(_floats(sec["direction"]))
            mats = [list(c * direction) for c in _floats(sec.get("scales", "1"))]
        else:
            mats = [[1.0] + [0.0] * (size - 1)]
        out = []
        for m in mats:
            if len(m) != size:
                raise ConfigurationError(f"sigma {m} needs {size} entries for shape {shape}")
            out.append(np.array(m, dtype=float).reshape(shape))
        return out

    @property
    def digest(self) -> str:
        return hashlib.sha256(self.text.encode()).hexdigest()


def _num(x: float) -> str:
    return repr(float(x))


def _sigma_cols(cfg: RunConfig) -> list[str]:
    return [f"sigma_{i}{j}" for i in range(cfg.components) for j in range(cfg.dim)]


def _run_gamma(cfg, jobs):
    header = _sigma_cols(cfg) + ["value", "converged", "iterations", "grad_norm"]
    rows, outcomes = [], []
    for sig in cfg.sigmas:
        s = gamma_cell(cfg.spec, sig, cfg.n, cfg.solver)
        rows.append([_num(v) for v in sig.ravel()] + [
            _num(s.value), str(s.report.converged), str(s.report.iterations), _num(s.report.grad_norm)
        ])
        outcomes.append(s.report.converged)
    return header, rows, {"converged": outcomes}, all(outcomes)


def _run_stochastic(cfg, jobs, nonconvex):
    spec = NonconvexSpec(cfg.spec, cfg.bump) if nonconvex else cfg.spec
    driver = phi_estimate if nonconvex else zeta_estimate
    header = _sigma_cols(cfg) + ["t", "seed", "value", "converged", "iterations", "grad_norm"]
    rows, summary = [], []
    ok = True
    for sig in cfg.sigmas:
        est = driver(spec, sig, cfg.t_list, cfg.seeds, cfg.n, cfg.solver, jobs)
        for t, seed, value, rep in est.entries:
            rows.append([_num(v) for v in sig.ravel()] + [
                str(t), str(seed), _num(value), str(rep.converged), str(rep.iterations), _num(rep.grad_norm)
            ])
        ok = ok and est.all_converged
        summary.append({
            "sigma": [_num(v) for v in sig.ravel()],
            "upper_bound": est.upper_bound,
            "per_t": {
                str(t): {"mean": _num(est.mean(t)), "stderr": _num(est.stderr(t))} for t in est.sides()
            },
            "estimate": _num(est.point_estimate),
            "trend": [_num(v) for v in est.trend()],
            "entries": [[t, s, _num(v)] for t, s, v, _ in est.entries],
        })
    return header, rows, {"estimates": summary}, ok


def _suite_inputs(cfg: RunConfig):
    rng = np.random.default_rng(cfg.cp["run"].getint("suite_seed", 0))
    N = cfg.components
    A_list = [np.eye(N), 2.0 * np.eye(N), 0.5 * np.eye(N), -np.eye(N)]
    if N >= 2:
        for th in (0.3, 1.1, 2.0):
            R = np.eye(N)
            R[:2, :2] = [[np.cos(th), -np.sin(th)], [np.sin(th), np.cos(th)]]
            A_list.append(R)
    while len(A_list) < 8:
        A_list.append(rng.standard_normal((N, N)))
    return A_list


def _run_verify(cfg, jobs):
    spec = cfg.spec
    cache = {}

    def sampler_at(n):
        def g(sig):
            key = (n, np.asarray(sig).tobytes())
            if key not in cache:
                cache[key] = gamma_cell(spec, sig, n, cfg.solver)
            return cache[key].value
        return g

    coarse_n = max(cfg.n // 2, 2)
    margin = refinement_margin(sampler_at(coarse_n), sampler_at(cfg.n), cfg.sigmas)
    tol = margin + 1e-6
    reports = structural_suite(
        sampler_at(cfg.n), spec.window, spec.alpha, spec.beta, _suite_inputs(cfg), cfg.sigmas, tol
    )
    header = ["property", "samples", "worst_violation", "tolerance", "passed"]
    rows = [[r.name, str(r.samples), _num(r.worst_violation), _num(r.tolerance), str(r.passed)] for r in reports]
    converged = all(s.report.converged for s in cache.values())
    failing = [
        {"name": r.name, "samples": r.samples, "worst_violation": _num(r.worst_violation),
         "tolerance": _num(r.tolerance)}
        for r in reports if not r.passed
    ]
    extra = {"refinement_margin": _num(margin), "failing": failing, "solves": len(cache),
             "all_converged": converged}
    return header, rows, extra, converged and not failing


def _run_oracle(cfg, jobs):
    f = cfg.field
    if f is None or f.kind != "periodic":
        raise ConfigurationError("oracle needs a periodic field")
    pat = f.pattern
    fam = cfg.spec.family
    if not isinstance(fam, PowerRadial):
        raise ConfigurationError("oracle supports the power family only")
    header = ["problem", "value", "value_across"]
    if cfg.dim == 1:
        v = analytic_oracle("one_d_power", pat.ravel(), p=fam.p)
        return header, [["one_d_power", _num(v), ""]], {}, True
    if cfg.dim == 2 and pat.shape[1] == 1 and fam.p == 2:
        h, a = analytic_oracle("laminate_quadratic", pat.ravel())
        return header, [["laminate_quadratic", _num(h), _num(a)]], {}, True
    raise ConfigurationError("oracle needs a 1D pattern or a 2D laminate of shape (L, 1) with p = 2")


def _run_luxemburg(cfg, jobs):
    mesh = CubeMesh(cfg.dim, 1, cfg.n, "periodic", cfg.components)
    period = cfg.field.period if cfg.field is not None and cfg.field.kind == "periodic" else (1,) * cfg.dim
    header = _sigma_cols(cfg) + ["modular", "luxemburg"]
    rows = []
    for sig in cfg.sigmas:
        ef = mesh.element_field(mesh.zero_field(), sig)
        ef = ElementField(ef.values, ef.volumes, ef.centers, np.asarray(period, dtype=float))
        rows.append([_num(v) for v in sig.ravel()] + [
            _num(modular(cfg.spec, ef)), _num(luxemburg_norm(cfg.spec, ef))
        ])
    return header, rows, {}, True


def run_pipeline(command: str, config_path, output_path, jobs: int | None = None) -> int:
    """Execute one command; returns the process exit status."""
    try:
        text = Path(config_path).read_text()
        if str(config_path).endswith(".json"):
            text = json.loads(text)["config"]
        cfg = RunConfig(text)
        if command not in COMMANDS:
            raise ConfigurationError(f"unknown command {command!r}")
        validation = validate_structure(cfg.spec, cfg.sample_budget)
        if not validation.passed:
            raise ConfigurationError(
                "integrand fails structural validation: "
                + ", ".join(f"{k} (margin {validation.margins[k]:.3g})" for k in validation.failures)
            )
    except (ConfigurationError, KeyError, ValueError, OSError) as exc:
        print(f"orlihom: invalid configuration: {exc}", file=sys.stderr)
        return 2

    env_cap = os.environ.get("ORLIHOM_JOBS")
    jobs = jobs or cfg.jobs
    if env_cap:
        jobs = min(jobs, int(env_cap))

    runners = {
        "gamma": _run_gamma,
        "zeta": lambda c, j: _run_stochastic(c, j, False),
        "phi": lambda c, j: _run_stochastic(c, j, True),
        "verify": _run_verify,
        "oracle": _run_oracle,
        "luxemburg": _run_luxemburg,
    }
    try:
        header, rows, extra, ok = runners[command](cfg, jobs)
    except ConfigurationError as exc:
        print(f"orlihom: invalid configuration: {exc}", file=sys.stderr)
        return 2

    out = Path(output_path)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "results.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)
    manifest = {
        "tool": "orlihom",
        "version": __version__,
        "command": command,
        "config_digest": cfg.digest,
        "config": cfg.text,
        "fields": {k: f.to_manifest() for k, f in cfg.spec.fields().items()},
        "seeds": cfg.seeds if command in ("zeta", "phi") else [],
        "mesh": {"dim": cfg.dim, "components": cfg.components, "n": cfg.n},
        "solver": {k: _num(v) if isinstance(v, float) else v for k, v in vars(cfg.solver).items()},
        "status": 0 if ok else 1,
        **extra,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
    if not ok:
        if extra.get("failing"):
            print(json.dumps(extra["failing"], indent=2), file=sys.stderr)
        return 1
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="orlihom", description=__doc__.split("\n")[0])
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True, help="INI config or a previous manifest.json")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--jobs", type=int, default=None)
    args = parser.parse_args(argv)
    return run_pipeline(args.command, args.config, args.out, args.jobs)


if __name__ == "__main__":
    sys.exit(main())
