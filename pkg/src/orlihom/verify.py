"""Structural property suites and independent reference values.

Nothing here calls the quasi-Newton solver: the analytic oracles are closed
forms, and :func:`brute_force_gamma` minimizes the discrete energy by
derivative-free coordinate search.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from .field import ConfigurationError
from .homogenize import HomogSample, _cell_period, _meta, as_sigma
from .integrand import AnySpec, ExponentWindow
from .mesh import CubeMesh, DiscreteEnergy
from .solver import SolveReport

__all__ = [
    "PropertyReport",
    "operator_norm",
    "structural_suite",
    "refinement_margin",
    "nonconvex_sandwich",
    "analytic_oracle",
    "brute_force_gamma",
]


@dataclass
class PropertyReport:
    name: str
    samples: int
    worst_violation: float
    passed: bool
    tolerance: float
    extra: dict = field(default_factory=dict)

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (
            f"[{status}] {self.name}: {self.samples} samples, worst violation "
            f"{self.worst_violation:.3e} (tol {self.tolerance:.1e})"
        )


def _report(name, lhs, rhs, tol, **extra) -> PropertyReport:
    """Checks ``lhs <= rhs`` with violations relative to ``max(|lhs|, |rhs|)``."""
    lhs, rhs = np.asarray(lhs, dtype=float), np.asarray(rhs, dtype=float)
    scale = np.maximum(np.maximum(np.abs(lhs), np.abs(rhs)), 1e-300)
    viol = (lhs - rhs) / scale
    worst = float(np.max(viol)) if viol.size else 0.0
    return PropertyReport(name, int(viol.size), worst, worst <= tol, tol, extra)


def operator_norm(A, tol: float = 1e-12, max_iter: int = 100000) -> float:
    """Largest singular value by power iteration on ``A^T A``."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if not np.any(A):
        return 0.0
    v = np.random.default_rng(0).standard_normal(A.shape[1])
    v /= np.linalg.norm(v)
    sigma = 0.0
    for _ in range(max_iter):
        w = A.T @ (A @ v)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        v = w / nw
        new = np.sqrt(nw)
        if abs(new - sigma) <= tol * new:
            return float(new)
        sigma = new
    return float(sigma)


class _Memo:
    def __init__(self, sampler):
        self.sampler = sampler
        self.cache = {}

    def __call__(self, sigma) -> float:
        key = np.asarray(sigma, dtype=float).tobytes() + str(np.shape(sigma)).encode()
        if key not in self.cache:
            self.cache[key] = float(self.sampler(np.asarray(sigma, dtype=float)))
        return self.cache[key]


def structural_suite(
    gamma_sampler: Callable[[np.ndarray], float],
    window: ExponentWindow,
    alpha: float,
    beta: float,
    A_list: Sequence[np.ndarray],
    sigma_list: Sequence[np.ndarray],
    tol: float = 1e-6,
    t_list: Sequence[float] = (0.25, 0.5, 2.0, 3.0),
    segment_pairs: Sequence[tuple[int, int]] | None = None,
) -> list[PropertyReport]:
    """Run the five structural checks on a homogenized-density sampler.

    Violations are relative.  The checks are reinforced doubling under
    ``A``, the two-sided growth sandwich (lower constant ``alpha / 2**p_plus``),
    midpoint convexity, evenness, and the lower homogeneity bound.
    """
    if not A_list or not sigma_list:
        raise ConfigurationError("A_list and sigma_list must be nonempty")
    g = _Memo(gamma_sampler)
    sigmas = [np.asarray(s, dtype=float) for s in sigma_list]
    vals = np.array([g(s) for s in sigmas])
    reports = []

    lhs, rhs = [], []
    for A in A_list:
        A = np.atleast_2d(np.asarray(A, dtype=float))
        nA = operator_norm(A)
        c = max(nA**window.p_minus, nA**window.p_plus)
        for s, v in zip(sigmas, vals):
            lhs.append(g(A @ s))
            rhs.append(c * v)
    reports.append(_report("reinforced_delta2", lhs, rhs, tol))

    mags = np.array([np.linalg.norm(s) for s in sigmas])
    lower = alpha / 2.0**window.p_plus * window.lower(mags)
    upper = beta * window.upper(mags)
    nz = mags > 0
    best_c = float(np.min(vals[nz] / window.lower(mags[nz]))) if np.any(nz) else float("nan")
    lo = _report("growth_lower", lower, vals, tol, proof_constant=alpha / 2.0**window.p_plus,
                 empirical_constant=best_c)
    hi = _report("growth_upper", vals, upper, tol)
    reports.append(
        PropertyReport(
            "growth_sandwich",
            lo.samples + hi.samples,
            max(lo.worst_violation, hi.worst_violation),
            lo.passed and hi.passed,
            tol,
            lo.extra,
        )
    )

    if segment_pairs is None:
        segment_pairs = list(itertools.combinations(range(len(sigmas)), 2))
    lhs, rhs = [], []
    for i, j in segment_pairs:
        lhs.append(g(0.5 * (sigmas[i] + sigmas[j])))
        rhs.append(0.5 * (vals[i] + vals[j]))
    reports.append(_report("midpoint_convexity", lhs, rhs, tol))

    neg = np.array([g(-s) for s in sigmas])
    gap = np.abs(vals - neg) / np.maximum(np.maximum(vals, neg), 1e-300)
    worst = float(np.max(gap))
    reports.append(PropertyReport("evenness", len(sigmas), worst, worst <= tol, tol))

    lhs, rhs = [], []
    for t in t_list:
        for s, v in zip(sigmas, vals):
            lhs.append(min(t**window.p_plus, t**window.p_minus) * v)
            rhs.append(g(t * s))
    reports.append(_report("homogeneity_lower", lhs, rhs, tol))
    return reports


def refinement_margin(coarse: Callable, fine: Callable, sigma_list) -> float:
    """Largest relative change of the sampler between two resolutions."""
    worst = 0.0
    for s in sigma_list:
        a, b = coarse(s), fine(s)
        worst = max(worst, abs(a - b) / max(abs(a), abs(b), 1e-300))
    return worst


def nonconvex_sandwich(phi_values, zeta_values, alpha: float, beta: float, tol: float) -> PropertyReport:
    """Lower side ``phi >= alpha * zeta`` is asserted; the upper side
    ``phi <= beta (2 + zeta)`` is only flagged, since multistart values are
    upper bounds and an excess points at the solver."""
    phi, zeta = np.asarray(phi_values, dtype=float), np.asarray(zeta_values, dtype=float)
    rep = _report("nonconvex_sandwich", alpha * zeta, phi, tol)
    upper_excess = phi - beta * (2.0 + zeta)
    rep.extra["upper_flags"] = int(np.sum(upper_excess > tol * np.maximum(np.abs(phi), 1.0)))
    return rep


def analytic_oracle(problem: str, values, weights=None, p: float = 2.0):
    """Closed-form homogenized coefficients for layered media.

    ``"one_d_power"``: ``a_hom = (mean a**(-1/(p-1)))**-(p-1)`` so the 1D
    density is ``a_hom |xi|**p``.

    ``"laminate_quadratic"``: ``(harmonic mean, arithmetic mean)`` for
    gradients across and along the layers of a quadratic laminate.
    """
    a = np.asarray(values, dtype=float)
    w = np.full(a.size, 1.0 / a.size) if weights is None else np.asarray(weights, dtype=float)
    if np.any(a <= 0) or abs(w.sum() - 1.0) > 1e-12:
        raise ConfigurationError("values must be positive and weights must sum to 1")
    if problem == "one_d_power":
        return float(np.dot(w, a ** (-1.0 / (p - 1.0))) ** (-(p - 1.0)))
    if problem == "laminate_quadratic":
        return float(1.0 / np.dot(w, 1.0 / a)), float(np.dot(w, a))
    raise ConfigurationError(f"unsupported oracle problem {problem!r}")


def brute_force_gamma(
    spec: AnySpec, sigma, tiny_n: int, tol: float = 1e-10, max_sweeps: int = 20000
) -> HomogSample:
    """Periodic cell minimum by cyclic coordinate search on the energy alone.

    Same mesh and coefficient placement as
    :func:`~orlihom.homogenize.gamma_cell`; limited to 64 free unknowns.
    """
    sigma = as_sigma(sigma)
    N, d = sigma.shape
    if tiny_n > 4 or tiny_n < 1:
        raise ConfigurationError("brute force is limited to tiny_n <= 4")
    period = _cell_period(spec, d)
    mesh = CubeMesh(d, 1, tiny_n, "periodic", N, coef_scale=np.asarray(period, dtype=float))
    if mesh.n_free * N > 64:
        raise ConfigurationError("brute force is limited to 64 unknowns")
    energy = DiscreteEnergy(mesh, spec, sigma_offset=sigma).energy
    u = mesh.zero_field()
    e = energy(u)
    sweeps = 0
    converged = False
    while sweeps < max_sweeps:
        e_start = e
        for idx in np.ndindex(u.shape):
            x0 = u[idx]

            def line(x, idx=idx):
                u[idx] = x
                return energy(u)

            res = minimize_scalar(line, bracket=(x0 - 0.1, x0), method="brent", options={"xtol": 1e-12})
            if res.fun <= e:
                u[idx], e = res.x, res.fun
            else:
                u[idx] = x0
        sweeps += 1
        if e_start - e <= tol * max(abs(e), 1e-300):
            converged = True
            break
    rep = SolveReport(e, sweeps, float("nan"), converged, 0.0)
    return HomogSample(sigma, e, rep, _meta(mesh))
