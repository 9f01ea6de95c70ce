"""Radial Orlicz-type energy densities and Musielak-Orlicz utilities.

A density is ``g(x, s)`` with ``s = |Sigma|`` the Frobenius norm of the
gradient.  Three families are supported, each with coefficients that are
either plain numbers or :class:`~orlihom.field.LatticeField` instances:

========================  ==========================================
``PowerRadial(a, p)``     ``a(x) s**p``
``VariableExponent(p)``   ``s**p(x)``
``DoublePhase(a,b,p,q)``  ``a(x) s**p + b(x) s**q``
========================  ==========================================

:class:`NonconvexSpec` adds the bump ``lam * a(x) * sin(Sigma[0, 0])**2``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from typing import Union

import numpy as np

from .field import ConfigurationError, LatticeField, value_at

__all__ = [
    "InputDomainError",
    "UnsupportedFamilyError",
    "ExponentWindow",
    "PowerRadial",
    "VariableExponent",
    "DoublePhase",
    "IntegrandSpec",
    "NonconvexSpec",
    "ElementField",
    "ElementDensity",
    "ValidationReport",
    "DoublingReport",
    "eval_density",
    "radial_slope",
    "validate_structure",
    "modular",
    "luxemburg_norm",
    "check_doubling",
]

Coefficient = Union[float, LatticeField]


class InputDomainError(ValueError):
    """Non-finite or otherwise out-of-domain numerical input."""


class UnsupportedFamilyError(NotImplementedError):
    """Family without an analytic radial slope; use finite differences."""


@dataclass(frozen=True)
class ExponentWindow:
    p_minus: float
    p_plus: float

    def __post_init__(self):
        if not (1.0 < self.p_minus <= self.p_plus < np.inf):
            raise ConfigurationError(
                f"exponent window needs 1 < p_minus <= p_plus < inf, got "
                f"({self.p_minus}, {self.p_plus})"
            )

    def lower(self, s):
        """``min(s**p_minus, s**p_plus)``"""
        s = np.asarray(s, dtype=float)
        return np.minimum(s**self.p_minus, s**self.p_plus)

    def upper(self, s):
        """``max(s**p_minus, s**p_plus)``"""
        s = np.asarray(s, dtype=float)
        return np.maximum(s**self.p_minus, s**self.p_plus)


def _lookup(coef: Coefficient, points: np.ndarray, scale) -> np.ndarray:
    if isinstance(coef, LatticeField):
        return np.asarray(value_at(coef, points * scale), dtype=float).reshape(points.shape[:-1])
    return np.full(points.shape[:-1], float(coef))


def _values(coef: Coefficient) -> np.ndarray:
    if isinstance(coef, LatticeField):
        return coef.distinct_values()
    return np.array([float(coef)])


def _reseed(coef: Coefficient, seed: int) -> Coefficient:
    return coef.reseeded(seed) if isinstance(coef, LatticeField) else coef


class _Family:
    """Shared plumbing.  Subclasses list their coefficient names in ``_coefs``."""

    _coefs: tuple[str, ...] = ()

    def coefficients(self, points: np.ndarray, scale=1.0) -> dict[str, np.ndarray]:
        return {name: _lookup(getattr(self, name), points, scale) for name in self._coefs}

    def cell_combos(self) -> dict[str, np.ndarray]:
        """Cross product of the distinct values of every coefficient."""
        grids = [_values(getattr(self, name)) for name in self._coefs]
        combos = np.array(list(itertools.product(*grids)), dtype=float)
        return {name: combos[:, i] for i, name in enumerate(self._coefs)}

    def fields(self) -> dict[str, LatticeField]:
        return {
            name: getattr(self, name)
            for name in self._coefs
            if isinstance(getattr(self, name), LatticeField)
        }

    def reseeded(self, seed: int):
        return replace(self, **{n: _reseed(getattr(self, n), seed) for n in self._coefs})

    def with_field(self, f: LatticeField):
        """Replace the primary (first) coefficient by ``f``."""
        return replace(self, **{self._coefs[0]: f})

    def bump_weight(self, coefs: dict[str, np.ndarray]) -> np.ndarray:
        return np.ones_like(next(iter(coefs.values())))

    def slope(self, coefs, s):
        raise UnsupportedFamilyError(type(self).__name__)


@dataclass(frozen=True)
class PowerRadial(_Family):
    a: Coefficient
    p: float
    _coefs = ("a",)

    def density(self, coefs, s):
        return coefs["a"] * s**self.p

    def slope(self, coefs, s):
        return coefs["a"] * self.p * s ** (self.p - 1.0)

    def bump_weight(self, coefs):
        return coefs["a"]

    def natural_window(self) -> ExponentWindow:
        return ExponentWindow(self.p, self.p)


@dataclass(frozen=True)
class VariableExponent(_Family):
    p: Coefficient
    _coefs = ("p",)

    def density(self, coefs, s):
        return s ** coefs["p"]

    def slope(self, coefs, s):
        p = coefs["p"]
        return p * s ** (p - 1.0)

    def natural_window(self) -> ExponentWindow:
        v = _values(self.p)
        return ExponentWindow(float(v.min()), float(v.max()))


@dataclass(frozen=True)
class DoublePhase(_Family):
    a: Coefficient
    b: Coefficient
    p: float
    q: float
    _coefs = ("a", "b")

    def density(self, coefs, s):
        return coefs["a"] * s**self.p + coefs["b"] * s**self.q

    def slope(self, coefs, s):
        return coefs["a"] * self.p * s ** (self.p - 1.0) + coefs["b"] * self.q * s ** (self.q - 1.0)

    def bump_weight(self, coefs):
        return coefs["a"]

    def natural_window(self) -> ExponentWindow:
        return ExponentWindow(min(self.p, self.q), max(self.p, self.q))


Family = Union[PowerRadial, VariableExponent, DoublePhase]


@dataclass(frozen=True)
class IntegrandSpec:
    """Convex radial density with declared exponent window and (A0) bounds.

    ``alpha`` and ``beta`` are stored as given; :func:`validate_structure`
    checks them against the family.
    """

    family: Family
    window: ExponentWindow
    alpha: float
    beta: float

    def __post_init__(self):
        if not (self.alpha > 0 and self.beta > 0):
            raise ConfigurationError("alpha and beta must be positive")

    @classmethod
    def from_family(cls, family: Family, window: ExponentWindow | None = None) -> "IntegrandSpec":
        """Spec with the family's natural window and tight (A0) constants."""
        combos = family.cell_combos()
        g1 = family.density(combos, 1.0)
        return cls(family, window or family.natural_window(), float(g1.min()), float(g1.max()))

    @property
    def is_convex(self) -> bool:
        return True

    @property
    def base(self) -> "IntegrandSpec":
        return self

    def reseeded(self, seed: int) -> "IntegrandSpec":
        return replace(self, family=self.family.reseeded(seed))

    def with_field(self, f: LatticeField) -> "IntegrandSpec":
        return replace(self, family=self.family.with_field(f))

    def fields(self) -> dict[str, LatticeField]:
        return self.family.fields()


@dataclass(frozen=True)
class NonconvexSpec:
    """``f(x, Sigma) = g(x, |Sigma|) + lam * a(x) * sin(Sigma[0,0])**2``.

    ``a`` is the base family's leading coefficient (1 for variable exponent).
    The growth constants relative to ``g`` are ``alpha = 1`` and
    ``beta = max(1, lam * max a)``.
    """

    base: IntegrandSpec
    bump_amplitude: float
    bump_kind: str = "sine11"

    def __post_init__(self):
        if not (0.0 <= self.bump_amplitude < 1.0):
            raise ConfigurationError("bump amplitude must lie in [0, 1)")
        if self.bump_kind != "sine11":
            raise ConfigurationError(f"unknown bump kind {self.bump_kind!r}")

    @property
    def is_convex(self) -> bool:
        return self.bump_amplitude == 0.0

    @property
    def window(self) -> ExponentWindow:
        return self.base.window

    @property
    def alpha(self) -> float:
        return 1.0

    @property
    def beta(self) -> float:
        combos = self.base.family.cell_combos()
        wmax = float(np.max(self.base.family.bump_weight(combos)))
        return max(1.0, self.bump_amplitude * wmax)

    def reseeded(self, seed: int) -> "NonconvexSpec":
        return replace(self, base=self.base.reseeded(seed))

    def with_field(self, f: LatticeField) -> "NonconvexSpec":
        return replace(self, base=self.base.with_field(f))

    def fields(self) -> dict[str, LatticeField]:
        return self.base.fields()


AnySpec = Union[IntegrandSpec, NonconvexSpec]


class ElementDensity:
    """Density and its matrix derivative at a fixed set of sample points.

    Coefficients are looked up once at construction; ``scale`` multiplies
    the points before the lookup (``x / eps`` with ``scale = 1 / eps``).
    """

    def __init__(self, spec: AnySpec, points: np.ndarray, scale=1.0):
        points = np.atleast_2d(np.asarray(points, dtype=float))
        self.spec = spec
        self.family = spec.base.family
        self.coefs = self.family.coefficients(points, scale)
        self.lam = spec.bump_amplitude if isinstance(spec, NonconvexSpec) else 0.0
        if self.lam:
            self.bump = self.lam * self.family.bump_weight(self.coefs)

    def value(self, M: np.ndarray) -> np.ndarray:
        """``M`` has shape ``(n, N, d)``; returns ``(n,)``."""
        s = np.sqrt(np.einsum("tij,tij->t", M, M))
        out = self.family.density(self.coefs, s)
        if self.lam:
            out = out + self.bump * np.sin(M[:, 0, 0]) ** 2
        return out

    def derivative(self, M: np.ndarray) -> np.ndarray:
        s = np.sqrt(np.einsum("tij,tij->t", M, M))
        nz = s > 0
        factor = np.zeros_like(s)
        factor[nz] = self.family.slope(
            {k: v[nz] for k, v in self.coefs.items()}, s[nz]
        ) / s[nz]
        out = factor[:, None, None] * M
        if self.lam:
            out[:, 0, 0] += self.bump * np.sin(2.0 * M[:, 0, 0])
        return out


def _check_point(x) -> np.ndarray:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if not np.all(np.isfinite(x)):
        raise InputDomainError("x must be finite")
    return x


def eval_density(spec: AnySpec, x, arg) -> float:
    """``g(x, |arg|)`` for a convex spec, ``f(x, arg)`` for a nonconvex one.

    For :class:`IntegrandSpec`, ``arg`` may be a nonnegative scalar ``s``
    or a matrix; for :class:`NonconvexSpec` it must be a matrix.
    """
    x = _check_point(x)
    arr = np.asarray(arg, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise InputDomainError("density argument must be finite")
    if isinstance(spec, NonconvexSpec) and arr.ndim != 2:
        raise InputDomainError("nonconvex densities take a matrix argument")
    if arr.ndim == 0:
        if arr < 0:
            raise InputDomainError("radial argument must be nonnegative")
        M = np.array([[[float(arr)]]])
    else:
        M = np.atleast_2d(arr)[None]
    return float(ElementDensity(spec, x[None]).value(M)[0])


def radial_slope(spec: IntegrandSpec, x, s: float) -> float:
    """``dg/ds`` at ``(x, s)``; zero at ``s = 0``."""
    x = _check_point(x)
    if not (np.isfinite(s) and s >= 0):
        raise InputDomainError("s must be finite and nonnegative")
    if s == 0:
        return 0.0
    fam = spec.base.family
    coefs = fam.coefficients(x[None])
    return float(fam.slope(coefs, np.array([float(s)]))[0])


@dataclass
class ValidationReport:
    passed: bool
    margins: dict[str, float]
    failures: list[str] = field(default_factory=list)

    def __bool__(self):
        return self.passed


def validate_structure(spec: IntegrandSpec, sample_budget: int = 200) -> ValidationReport:
    """Sampling checks of the structural assumptions on every cell type.

    Margins are relative; a negative margin is a violation.  Checked:
    ``zero`` (g(0)=0), ``monotone``, ``convex`` (midpoint), ``inc_p_minus``,
    ``dec_p_plus``, ``A0`` and the two-sided power ``growth`` bound.
    """
    if sample_budget < 100:
        raise ConfigurationError("sample_budget must be at least 100")
    fam, w = spec.family, spec.window
    s = np.logspace(-3, 3, sample_budget)
    combos = fam.cell_combos()
    g = fam.density({k: v[:, None] for k, v in combos.items()}, s[None, :])
    rtol = 1e-12
    margins = {}

    g0 = fam.density(combos, 0.0)
    margins["zero"] = -float(np.max(np.abs(g0)))
    margins["monotone"] = float(np.min((g[:, 1:] - g[:, :-1]) / g[:, 1:]))
    mid = 0.5 * (s[2:] + s[:-2])
    gmid = fam.density({k: v[:, None] for k, v in combos.items()}, mid[None, :])
    chord = 0.5 * (g[:, 2:] + g[:, :-2])
    margins["convex"] = float(np.min((chord - gmid) / chord))
    r_lo = g / s**w.p_minus
    margins["inc_p_minus"] = float(np.min((r_lo[:, 1:] - r_lo[:, :-1]) / r_lo[:, 1:]))
    r_hi = g / s**w.p_plus
    margins["dec_p_plus"] = float(np.min((r_hi[:, :-1] - r_hi[:, 1:]) / r_hi[:, :-1]))
    g1 = fam.density(combos, 1.0)
    margins["A0"] = float(min(np.min(g1 / spec.alpha - 1.0), np.min(1.0 - g1 / spec.beta)))
    lower = spec.alpha * w.lower(s)
    upper = spec.beta * w.upper(s)
    margins["growth"] = float(min(np.min((g - lower) / g), np.min((upper - g) / upper)))

    failures = [k for k, m in margins.items() if m < -rtol]
    return ValidationReport(not failures, margins, failures)


@dataclass
class ElementField:
    """Piecewise-constant matrix field: one value per element.

    ``values`` is ``(n, N, d)`` or, for radial use only, magnitudes ``(n,)``.
    """

    values: np.ndarray
    volumes: np.ndarray
    centers: np.ndarray
    scale: float | np.ndarray = 1.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        self.volumes = np.asarray(self.volumes, dtype=float)
        self.centers = np.atleast_2d(np.asarray(self.centers, dtype=float))
        if self.values.ndim == 1:
            self.values = self.values[:, None, None]
        n = self.volumes.shape[0]
        if self.values.shape[0] != n or self.centers.shape[0] != n:
            raise ConfigurationError("values, volumes and centers must have equal length")

    def __mul__(self, c: float) -> "ElementField":
        return ElementField(self.values * c, self.volumes, self.centers, self.scale)

    __rmul__ = __mul__


def modular(spec: IntegrandSpec, xi: ElementField) -> float:
    """Discrete modular ``sum_T |T| g(x_T, |xi_T|)``."""
    if xi.volumes.size == 0:
        raise InputDomainError("empty mesh")
    dens = ElementDensity(spec.base, xi.centers, xi.scale)
    return float(np.sum(xi.volumes * dens.value(xi.values)))


def luxemburg_norm(
    spec: IntegrandSpec, xi: ElementField, rtol: float = 1e-10, max_iter: int = 200
) -> float:
    """``inf{lam > 0 : modular(xi / lam) <= 1}`` by bisection."""
    m = modular(spec, xi)
    if m == 0.0:
        return 0.0
    dens = ElementDensity(spec.base, xi.centers, xi.scale)

    def rho(lam):
        return float(np.sum(xi.volumes * dens.value(xi.values / lam)))

    w = spec.window
    # modular(xi/lam) lies between min and max of lam**-p_minus, lam**-p_plus times m
    lo = min(m ** (1.0 / w.p_minus), m ** (1.0 / w.p_plus))
    hi = max(m ** (1.0 / w.p_minus), m ** (1.0 / w.p_plus))
    while rho(hi) > 1.0:
        hi *= 2.0
    while lo > 0 and rho(lo) <= 1.0 and lo < hi:
        lo *= 0.5
    for _ in range(max_iter):
        if hi - lo <= rtol * hi:
            break
        mid = 0.5 * (lo + hi)
        if rho(mid) <= 1.0:
            hi = mid
        else:
            lo = mid
    return hi


@dataclass
class DoublingReport:
    c_delta2: float
    l_nabla2: float
    h_const: float
    violations: int


def check_doubling(spec: IntegrandSpec, sample_budget: int = 200) -> DoublingReport:
    """Smallest sampled doubling constants with zero slack.

    ``c_delta2 = max g(2s)/g(s)`` and ``l_nabla2`` is the least ``l >= 1``
    with ``2 l g(s) <= g(l s)`` on every sample.  The ratio
    ``g(l s) / (l g(s))`` is increasing in ``l`` when ``p_minus > 1``, so the
    latter is found by bisection.
    """
    if sample_budget < 100:
        raise ConfigurationError("sample_budget must be at least 100")
    fam, w = spec.family, spec.window
    s = np.logspace(-3, 3, sample_budget)[None, :]
    combos = {k: v[:, None] for k, v in fam.cell_combos().items()}
    g = fam.density(combos, s)
    c = float(np.max(fam.density(combos, 2 * s) / g))

    def ok(l):
        return bool(np.all(2 * l * g <= fam.density(combos, l * s)))

    hi = 2.0 ** (1.0 / (w.p_minus - 1.0))
    while not ok(hi):
        hi *= 1.5
    lo = 1.0
    for _ in range(200):
        if hi - lo <= 1e-13 * hi:
            break
        mid = 0.5 * (lo + hi)
        if ok(mid):
            hi = mid
        else:
            lo = mid
    violations = int(np.sum(fam.density(combos, 2 * s) > c * g)) + int(
        np.sum(2 * hi * g > fam.density(combos, hi * s))
    )
    return DoublingReport(c, hi, 0.0, violations)
