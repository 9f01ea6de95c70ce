"""Homogenized densities from discrete cell problems.

* :func:`gamma_cell`: periodic cell formula on ``(0, 1)^d``.
* :func:`mu_over_cube`: minimum over ``origin + (0, t)^d`` with affine
  boundary datum ``y -> Sigma y``, normalized by ``t^d``.
* :func:`zeta_estimate` / :func:`phi_estimate`: large-cube averages over
  seeded realizations of a random medium.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from joblib import Parallel, delayed

from .field import ConfigurationError, LatticeField, sample_lattice_field, shift_field
from .integrand import AnySpec, IntegrandSpec, NonconvexSpec
from .mesh import CubeMesh, DiscreteEnergy
from .solver import SolveReport, SolverConfig, minimize_energy

__all__ = [
    "HomogSample",
    "StochasticEstimate",
    "as_sigma",
    "gamma_cell",
    "mu_over_cube",
    "mu_rescaled_unit_cube",
    "zeta_estimate",
    "phi_estimate",
    "check_subadditivity",
    "check_stationarity",
    "SubadditivityReport",
    "StationarityReport",
]


def as_sigma(sigma, dim: int | None = None) -> np.ndarray:
    """Coerce to an ``(N, d)`` float matrix.

    Scalars become ``1 x 1``; flat vectors become one row unless ``dim``
    says otherwise.
    """
    s = np.array(sigma, dtype=float)
    if s.ndim == 0:
        s = s.reshape(1, 1)
    elif s.ndim == 1:
        s = s.reshape(-1, dim) if dim else s[None, :]
    if s.ndim != 2 or not np.all(np.isfinite(s)):
        raise ConfigurationError("sigma must be a finite N x d matrix")
    return s


@dataclass
class HomogSample:
    sigma: np.ndarray
    value: float
    report: SolveReport
    mesh_meta: dict
    corrector: np.ndarray | None = field(default=None, repr=False)


def _grad_scale(oracle: DiscreteEnergy, u0) -> float:
    # typical nodal gradient: energy density times h^(d-1)
    mesh = oracle.mesh
    density = oracle.energy(u0) / mesh.volume
    return max(density, 1e-300) * mesh.h ** (mesh.dim - 1)


def _meta(mesh: CubeMesh) -> dict:
    return {
        "d": mesh.dim,
        "N": mesh.components,
        "n": mesh.n,
        "t": mesh.side,
        "bc": mesh.bc,
        "origin": list(mesh.origin),
    }


def _solve(oracle: DiscreteEnergy, spec: AnySpec, config: SolverConfig, u0=None):
    mesh = oracle.mesh
    u0 = mesh.zero_field() if u0 is None else np.asarray(u0, dtype=float)
    mode = "convex" if spec.is_convex else "multistart"
    return minimize_energy(oracle, u0, config, mode=mode, grad_scale=_grad_scale(oracle, u0))


def _cell_period(spec: AnySpec, dim: int) -> tuple[int, ...]:
    period = None
    for f in spec.fields().values():
        if f.kind != "periodic":
            raise ConfigurationError("the periodic cell formula needs periodic coefficient fields")
        if f.dim != dim:
            raise ConfigurationError(f"field dimension {f.dim} != sigma columns {dim}")
        if period is not None and f.period != period:
            raise ConfigurationError("all coefficient fields must share one period")
        period = f.period
    return period or (1,) * dim


def gamma_cell(
    spec: AnySpec, sigma, n: int, config: SolverConfig | None = None, u0=None, keep_corrector=False
) -> HomogSample:
    """Periodic cell minimum ``min_u int_(0,1)^d f(y, Sigma + Du)``.

    A periodic pattern with ``L`` cells per axis is rescaled so that one
    period fills the unit cell; ``n`` must be a multiple of every ``L``.
    """
    config = config or SolverConfig()
    sigma = as_sigma(sigma)
    N, d = sigma.shape
    if n < 2:
        raise ConfigurationError("resolution must be at least 2")
    period = _cell_period(spec, d)
    if any(n % L for L in period):
        raise ConfigurationError(f"resolution {n} is not a multiple of the pattern period {period}")
    mesh = CubeMesh(d, 1, n, "periodic", N, coef_scale=np.asarray(period, dtype=float))
    oracle = DiscreteEnergy(mesh, spec, sigma_offset=sigma)
    u, rep = _solve(oracle, spec, config, u0)
    return HomogSample(sigma, rep.energy, rep, _meta(mesh), u if keep_corrector else None)


def mu_over_cube(
    spec: AnySpec,
    field: LatticeField | None,
    sigma,
    t: int,
    n: int,
    config: SolverConfig | None = None,
    origin=None,
    u0=None,
) -> HomogSample:
    """``mu(omega, origin + (0,t)^d) / t^d`` with affine boundary data.

    ``field`` replaces the integrand's leading coefficient when given.  Convex
    specs use a single descent; nonconvex ones use multistart, so the value
    is an upper bound.
    """
    config = config or SolverConfig()
    sigma = as_sigma(sigma)
    N, d = sigma.shape
    if int(t) != t or t < 1:
        raise ConfigurationError("cube side must be a positive integer")
    mesh = CubeMesh(d, int(t), n, "dirichlet", N, sigma=sigma, origin=origin)
    oracle = DiscreteEnergy(mesh, spec, field)
    u, rep = _solve(oracle, spec, config, u0)
    return HomogSample(sigma, rep.energy / mesh.volume, rep, _meta(mesh))


def mu_rescaled_unit_cube(
    spec: AnySpec, field: LatticeField | None, sigma, t: int, n: int, config: SolverConfig | None = None
) -> HomogSample:
    """Minimum on the unit cube of the ``eps = 1/t`` functional.

    The mesh has ``n * t`` elements per axis and coefficients are read at
    ``t * x``; the result equals ``mu(omega, (0,t)^d) / t^d`` up to solver
    tolerance.
    """
    config = config or SolverConfig()
    sigma = as_sigma(sigma)
    N, d = sigma.shape
    mesh = CubeMesh(d, 1, n * int(t), "dirichlet", N, sigma=sigma, coef_scale=float(t))
    oracle = DiscreteEnergy(mesh, spec, field)
    u, rep = _solve(oracle, spec, config)
    return HomogSample(sigma, rep.energy, rep, _meta(mesh))


@dataclass
class StochasticEstimate:
    """Per-(t, seed) values of ``mu / t^d`` and their per-t statistics."""

    sigma: np.ndarray
    entries: list[tuple[int, int, float, SolveReport]]
    upper_bound: bool = False

    def sides(self) -> list[int]:
        return sorted({t for t, _, _, _ in self.entries})

    def values(self, t: int) -> np.ndarray:
        return np.array([v for tt, _, v, _ in self.entries if tt == t])

    def mean(self, t: int) -> float:
        return float(np.mean(self.values(t)))

    def stderr(self, t: int) -> float:
        v = self.values(t)
        return float(np.std(v, ddof=1) / np.sqrt(v.size)) if v.size > 1 else float("nan")

    @property
    def point_estimate(self) -> float:
        return self.mean(self.sides()[-1])

    def trend(self) -> list[float]:
        """Differences of successive per-t means."""
        means = [self.mean(t) for t in self.sides()]
        return [b - a for a, b in zip(means, means[1:])]

    @property
    def all_converged(self) -> bool:
        return all(rep.converged for _, _, _, rep in self.entries)


def _stochastic(spec, sigma, t_list, seeds, n, config, n_jobs):
    t_list = [int(t) for t in t_list]
    if any(b <= a for a, b in zip(t_list, t_list[1:])):
        raise ConfigurationError("t_list must be strictly increasing")
    if len(seeds) < 2:
        raise ConfigurationError("at least two seeds are required")
    if not any(f.kind == "random" for f in spec.fields().values()):
        raise ConfigurationError("stochastic estimates need a random coefficient field")
    tasks = [(t, int(s)) for t in t_list for s in seeds]

    def run(t, s):
        return mu_over_cube(spec.reseeded(s), None, sigma, t, n, config)

    results = Parallel(n_jobs=n_jobs)(delayed(run)(t, s) for t, s in tasks)
    entries = [(t, s, r.value, r.report) for (t, s), r in zip(tasks, results)]
    return StochasticEstimate(as_sigma(sigma), entries, upper_bound=not spec.is_convex)


def zeta_estimate(
    spec: IntegrandSpec,
    sigma,
    t_list: Sequence[int],
    seeds: Sequence[int],
    n: int,
    config: SolverConfig | None = None,
    n_jobs: int = 1,
) -> StochasticEstimate:
    """Estimate of the stochastic homogenized density at ``sigma``.

    Every random field of ``spec`` is regenerated per seed; the estimate is
    the mean over seeds at the largest side.
    """
    if not isinstance(spec, IntegrandSpec):
        raise ConfigurationError("zeta_estimate takes a convex integrand")
    return _stochastic(spec, sigma, t_list, seeds, n, config or SolverConfig(), n_jobs)


def phi_estimate(
    spec: NonconvexSpec,
    sigma,
    t_list: Sequence[int],
    seeds: Sequence[int],
    n: int,
    config: SolverConfig | None = None,
    n_jobs: int = 1,
) -> StochasticEstimate:
    """Same driver as :func:`zeta_estimate` with multistart minimization.

    Values are upper bounds of the cell minima unless the bump amplitude is
    zero, in which case the computation is identical to the convex one.
    """
    if not isinstance(spec, NonconvexSpec):
        raise ConfigurationError("phi_estimate takes a nonconvex integrand")
    return _stochastic(spec, sigma, t_list, seeds, n, config or SolverConfig(), n_jobs)


@dataclass
class SubadditivityReport:
    whole: float
    parts: list[float]
    slack: float
    tol: float
    passed: bool


def check_subadditivity(
    spec: AnySpec,
    field: LatticeField | None,
    sigma,
    t: int,
    k: int,
    n: int,
    config: SolverConfig | None = None,
) -> SubadditivityReport:
    """Compare ``mu(0,t)^d`` with the sum over the ``k^d`` subcubes of side ``t/k``.

    Energies are unnormalized.  ``slack = sum(parts) - whole`` is nonnegative
    up to ``k^d`` times the per-solve energy tolerance, because glued
    subcube minimizers are admissible on the whole mesh.
    """
    config = config or SolverConfig()
    sigma = as_sigma(sigma)
    d = sigma.shape[1]
    if k < 1 or t % k:
        raise ConfigurationError(f"partition factor {k} does not divide side {t}")
    sub = t // k
    whole = mu_over_cube(spec, field, sigma, t, n, config)
    W = whole.value * t**d
    parts = []
    for idx in itertools.product(range(k), repeat=d):
        origin = tuple(i * sub for i in idx)
        r = mu_over_cube(spec, field, sigma, sub, n, config, origin=origin)
        parts.append(r.value * sub**d)
    slack = math.fsum(parts) - W
    tol = k**d * config.tol_e * max(abs(W), 1.0)
    return SubadditivityReport(W, parts, slack, tol, slack >= -tol)


@dataclass
class StationarityReport:
    shifted_field: float
    shifted_cube: float
    gap: float
    passed: bool


def check_stationarity(
    spec: AnySpec,
    seed: int,
    palette,
    sigma,
    t: int,
    z,
    n: int,
    config: SolverConfig | None = None,
    rtol: float = 1e-9,
) -> StationarityReport:
    """``mu(tau_z omega, (0,t)^d)`` against ``mu(omega, z + (0,t)^d)``."""
    sigma = as_sigma(sigma)
    d = sigma.shape[1]
    z = tuple(int(v) for v in np.atleast_1d(z))
    if len(z) != d:
        raise ConfigurationError("shift must have one entry per dimension")
    f = sample_lattice_field(seed, palette, dim=d)
    a = mu_over_cube(spec, shift_field(f, z), sigma, t, n, config).value
    b = mu_over_cube(spec, f, sigma, t, n, config, origin=z).value
    gap = abs(a - b) / max(abs(a), abs(b), 1e-300)
    return StationarityReport(a, b, gap, gap <= rtol)
