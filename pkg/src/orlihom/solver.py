"""Energy minimization and the smooth truncation operator."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .field import ConfigurationError
from .integrand import InputDomainError

__all__ = [
    "NumericalFailure",
    "SolverConfig",
    "SolveReport",
    "minimize_energy",
    "gradient_check",
    "cutoff_value",
    "truncate_field",
    "truncation_jacobian",
    "truncation_lipschitz_constant",
]


# relative energy band treated as roundoff, and the slope ratio accepted
# inside it (approximate Armijo condition of Hager and Zhang with delta=0.1)
_ROUNDOFF_BAND = 1e-11
_APPROX_ARMIJO = 0.8


class NumericalFailure(ArithmeticError):
    """The energy or its gradient became non-finite."""


@dataclass(frozen=True)
class SolverConfig:
    """Stopping and search parameters.

    ``tol_g`` is relative to the gradient scale handed to
    :func:`minimize_energy`; ``tol_e`` bounds the relative energy decrease of
    the last accepted step.  Both must hold to declare convergence.
    """

    tol_g: float = 1e-8
    tol_e: float = 1e-12
    max_iter: int = 10000
    memory: int = 10
    multistart_count: int = 8
    multistart_seed: int = 0
    armijo: float = 1e-4

    def __post_init__(self):
        for name in ("tol_g", "tol_e", "max_iter", "memory", "multistart_count", "armijo"):
            if not getattr(self, name) > 0:
                raise ConfigurationError(f"solver setting {name} must be positive")


@dataclass
class SolveReport:
    energy: float
    iterations: int
    grad_norm: float
    converged: bool
    wall_time: float
    last_decrease: float = 0.0
    history: list[float] = field(default_factory=list, repr=False)
    start_energies: list[float] = field(default_factory=list)

    def key(self) -> tuple:
        """Reproducible content (everything except timing)."""
        return (self.energy, self.iterations, self.grad_norm, self.converged)


def _two_loop(g, S, Y, rho):
    q = g.copy()
    alphas = []
    for s, y, r in zip(reversed(S), reversed(Y), reversed(rho)):
        a = r * np.dot(s, q)
        alphas.append(a)
        q -= a * y
    if S:
        q *= np.dot(S[-1], Y[-1]) / np.dot(Y[-1], Y[-1])
    for (s, y, r), a in zip(zip(S, Y, rho), reversed(alphas)):
        b = r * np.dot(y, q)
        q += (a - b) * s
    return -q


def _descend(fg, x0, config: SolverConfig, tol_abs: float):
    t0 = time.perf_counter()
    x = np.array(x0, dtype=float).ravel()
    f, g = fg(x)
    g = np.ravel(g)
    if not (np.isfinite(f) and np.all(np.isfinite(g))):
        raise NumericalFailure(f"non-finite energy {f!r} at the initial iterate")
    history = [f]
    S, Y, rho = [], [], []
    last_dec = 0.0
    gnorm = float(np.max(np.abs(g))) if g.size else 0.0
    it = 0
    converged = gnorm <= tol_abs
    while not converged and it < config.max_iter:
        d = _two_loop(g, S, Y, rho)
        slope = float(np.dot(g, d))
        if not slope < 0:
            S, Y, rho = [], [], []
            d = -g
            slope = -float(np.dot(g, g))
        step = 1.0
        accepted = False
        gn = None
        band = _ROUNDOFF_BAND * max(abs(f), 1e-300)
        for _ in range(80):
            xn = x + step * d
            fn = fg.energy(xn)
            if np.isfinite(fn) and fn <= f + config.armijo * step * slope:
                accepted = True
                break
            if np.isfinite(fn) and fn <= f + band:
                # energy differences are below roundoff: decide on the slope
                fn, gn = fg(xn)
                gn = np.ravel(gn)
                if float(np.dot(gn, d)) <= -_APPROX_ARMIJO * slope:
                    accepted = True
                    break
                gn = None
            step *= 0.5
        if not accepted:
            if S:
                S, Y, rho = [], [], []
                continue
            break
        if gn is None:
            fn, gn = fg(xn)
            gn = np.ravel(gn)
        if not np.all(np.isfinite(gn)):
            raise NumericalFailure("non-finite gradient")
        s, y = xn - x, gn - g
        sy = float(np.dot(s, y))
        if sy > 1e-300 and sy > 1e-14 * np.linalg.norm(s) * np.linalg.norm(y):
            S.append(s)
            Y.append(y)
            rho.append(1.0 / sy)
            if len(S) > config.memory:
                S.pop(0), Y.pop(0), rho.pop(0)
        last_dec = max(f - fn, 0.0) / max(abs(fn), 1e-300)
        x, f, g = xn, fn, gn
        history.append(f)
        it += 1
        gnorm = float(np.max(np.abs(g)))
        converged = gnorm <= tol_abs and last_dec <= config.tol_e
    if not converged:
        converged = gnorm <= tol_abs and last_dec <= config.tol_e
    report = SolveReport(
        energy=f,
        iterations=it,
        grad_norm=gnorm,
        converged=bool(converged),
        wall_time=time.perf_counter() - t0,
        last_decrease=last_dec,
        history=history,
    )
    return x, report


class _Wrapped:
    def __init__(self, oracle):
        self.oracle = oracle
        self.calls = 0

    def __call__(self, x):
        self.calls += 1
        try:
            return self.oracle.energy_and_gradient(x.reshape(self.shape))
        except InputDomainError as exc:
            raise NumericalFailure(str(exc)) from exc

    def energy(self, x):
        try:
            with np.errstate(over="ignore", invalid="ignore"):
                return self.oracle.energy(x.reshape(self.shape))
        except (FloatingPointError, InputDomainError):
            return np.inf


def gradient_check(oracle, u, rng=None, h: float = 1e-6) -> float:
    """Relative mismatch between a central difference along a random
    direction and the oracle's directional derivative."""
    rng = np.random.default_rng(0) if rng is None else rng
    u = np.asarray(u, dtype=float)
    v = rng.standard_normal(u.shape)
    if getattr(getattr(oracle, "mesh", None), "bc", None) == "periodic":
        v -= v.mean(axis=0)
    fd = (oracle.energy(u + h * v) - oracle.energy(u - h * v)) / (2 * h)
    an = float(np.sum(oracle.gradient(u) * v))
    return abs(fd - an) / max(abs(fd), abs(an), 1e-300)


def minimize_energy(
    oracle,
    u0,
    config: SolverConfig | None = None,
    mode: str = "convex",
    grad_scale: float | None = None,
    perturbation_scale: float | None = None,
):
    """Minimize ``oracle.energy`` starting from ``u0``.

    ``oracle`` provides ``energy(u)`` and ``energy_and_gradient(u)``.  The
    absolute gradient tolerance is ``config.tol_g * grad_scale``; without a
    scale the initial energy (at least 1) is used.

    ``mode="multistart"`` runs the convex descent from ``u0`` and from
    ``multistart_count - 1`` Gaussian perturbations of it (standard deviation
    ``perturbation_scale``, by default the mesh size) and keeps the lowest
    energy.  For nonconvex energies the result only bounds the infimum from
    above.

    Returns ``(u, SolveReport)``; exceeding ``max_iter`` is reported through
    ``converged=False``.
    """
    config = config or SolverConfig()
    u0 = np.asarray(u0, dtype=float)
    if not np.all(np.isfinite(u0)):
        raise NumericalFailure("initial iterate is not finite")
    fg = _Wrapped(oracle)
    fg.shape = u0.shape
    if grad_scale is None:
        f0 = oracle.energy(u0)
        if not np.isfinite(f0):
            raise NumericalFailure(f"non-finite energy {f0!r} at the initial iterate")
        grad_scale = max(abs(f0), 1.0)
    tol_abs = config.tol_g * grad_scale
    if mode == "convex":
        x, rep = _descend(fg, u0, config, tol_abs)
        return x.reshape(u0.shape), rep
    if mode != "multistart":
        raise ConfigurationError(f"unknown mode {mode!r}")

    mesh = getattr(oracle, "mesh", None)
    if perturbation_scale is None:
        perturbation_scale = mesh.h if mesh is not None else 1.0
    rng = np.random.default_rng(config.multistart_seed)
    best = None
    energies = []
    t0 = time.perf_counter()
    for k in range(config.multistart_count):
        start = u0
        if k:
            noise = perturbation_scale * rng.standard_normal(u0.shape)
            if mesh is not None and mesh.bc == "periodic":
                noise -= noise.mean(axis=0)
            start = u0 + noise
        x, rep = _descend(fg, start, config, tol_abs)
        energies.append(rep.energy)
        if best is None or rep.energy < best[1].energy:
            best = (x, rep)
    x, rep = best
    rep.start_energies = energies
    rep.wall_time = time.perf_counter() - t0
    return x.reshape(u0.shape), rep


def cutoff_value(M: float, s):
    """C^1 cutoff: 1 on ``[0, M]``, ``2r^3 - 3r^2 + 1`` with ``r = s/M - 1``
    on ``[M, 2M]``, 0 beyond ``2M``."""
    if not M > 0:
        raise ConfigurationError("truncation level must be positive")
    s = np.asarray(s, dtype=float)
    r = np.clip(s / M - 1.0, 0.0, 1.0)
    out = 2 * r**3 - 3 * r**2 + 1
    return float(out) if out.ndim == 0 else out


def _cutoff_derivative(M, s):
    r = np.clip(np.asarray(s, dtype=float) / M - 1.0, 0.0, 1.0)
    return (6 * r**2 - 6 * r) / M


def truncate_field(u, M: float) -> np.ndarray:
    """Apply ``xi -> cutoff_value(M, |xi|) * xi`` to every node of ``u``."""
    u = np.asarray(u, dtype=float)
    vec = u if u.ndim == 2 else u.reshape(-1, 1)
    mag = np.linalg.norm(vec, axis=1)
    out = vec * cutoff_value(M, mag)[:, None]
    return out.reshape(u.shape)


def truncation_lipschitz_constant() -> float:
    """Sharp Lipschitz constant of the truncation map, independent of ``M``.

    Along a ray the map is ``s -> s * cutoff_value(M, s)``, whose slope on
    ``[M, 2M]`` is ``h(r) = 8r^3 - 3r^2 - 6r + 1``.  Its minimum sits at
    ``r = (1 + sqrt(17)) / 8`` and has modulus about 1.9716.  No C^1 cutoff
    supported in ``[0, 2M]`` can do better than 1 there, since the radial
    profile must fall from ``M`` to 0 over an interval of length ``M``
    starting with slope 1.
    """
    r = (1.0 + np.sqrt(17.0)) / 8.0
    return float(abs(8 * r**3 - 3 * r**2 - 6 * r + 1))


def truncation_jacobian(M: float, xi) -> np.ndarray:
    """Jacobian of the nodal truncation map at ``xi``."""
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    s = np.linalg.norm(xi)
    J = cutoff_value(M, s) * np.eye(xi.size)
    if s > 0:
        J += _cutoff_derivative(M, s) * np.outer(xi, xi) / s
    return J
