"""Kuhn-simplex discretization of cubes and the discrete energy.

Each grid cube is split into ``d!`` simplices, one per permutation ``pi`` of
the axes, with vertices ``c, c + e_pi(1), c + e_pi(1) + e_pi(2), ...``.  The
gradient of the piecewise-affine interpolant on such a simplex has a closed
form: its ``j``-th column is the difference quotient along the unique simplex
edge parallel to ``e_j``.  No quadrature is involved.

Displacements are arrays of shape ``(n_free, N)``.

* ``periodic``: every grid node is free, indices wrap modulo the grid size,
  and the affine part ``Sigma`` is an explicit offset added to every element
  gradient.  The mean-zero gauge is enforced on gradients.
* ``dirichlet``: the unknown is the perturbation ``w`` of the affine map
  ``y -> Sigma y``.  ``w`` vanishes on the outermost node layer, so only
  interior nodes are free, and element gradients are ``Sigma + Dw``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .field import ConfigurationError, LatticeField
from .integrand import AnySpec, ElementDensity, ElementField, InputDomainError

__all__ = [
    "CubeMesh",
    "DiscreteEnergy",
    "assemble_energy",
    "assemble_gradient",
]


@dataclass(frozen=True, eq=False)
class CubeMesh:
    """Uniform simplicial mesh of ``origin + (0, side)^dim``.

    ``n`` is the number of elements per unit length, so ``n * side`` must be
    an integer.  ``coef_scale`` multiplies element barycenters before the
    coefficient lookup (``1 / eps`` for an eps-periodic medium).
    """

    dim: int
    side: float
    n: int
    bc: str = "periodic"
    components: int = 1
    sigma: np.ndarray | None = None
    origin: tuple[int, ...] | None = None
    coef_scale: float | tuple[float, ...] = 1.0

    def __post_init__(self):
        if self.dim not in (1, 2, 3):
            raise ConfigurationError("dimension must be 1, 2 or 3")
        if self.components < 1:
            raise ConfigurationError("components must be at least 1")
        cells = self.n * self.side
        if self.n < 1 or abs(cells - round(cells)) > 1e-9 or round(cells) < 1:
            raise ConfigurationError("n * side must be a positive integer")
        if self.bc not in ("periodic", "dirichlet"):
            raise ConfigurationError(f"unknown boundary condition {self.bc!r}")
        if self.bc == "dirichlet":
            if self.sigma is None:
                raise ConfigurationError("dirichlet meshes need an affine datum sigma")
            sig = np.array(self.sigma, dtype=float).reshape(self.components, self.dim)
            object.__setattr__(self, "sigma", sig)
            if round(cells) < 2:
                raise ConfigurationError("dirichlet meshes need at least two cells per axis")
        origin = self.origin if self.origin is not None else (0,) * self.dim
        if len(origin) != self.dim:
            raise ConfigurationError("origin length must equal the dimension")
        object.__setattr__(self, "origin", tuple(origin))

    @property
    def cells_per_axis(self) -> int:
        return int(round(self.n * self.side))

    @property
    def h(self) -> float:
        return 1.0 / self.n

    @property
    def volume(self) -> float:
        return float(self.side) ** self.dim

    @property
    def grid_shape(self) -> tuple[int, ...]:
        m = self.cells_per_axis
        return (m,) * self.dim if self.bc == "periodic" else (m + 1,) * self.dim

    @property
    def n_nodes(self) -> int:
        return int(np.prod(self.grid_shape))

    @property
    def n_elements(self) -> int:
        return self.cells_per_axis**self.dim * math.factorial(self.dim)

    @property
    def element_volume(self) -> float:
        return self.h**self.dim / math.factorial(self.dim)

    @cached_property
    def free_nodes(self) -> np.ndarray:
        if self.bc == "periodic":
            return np.arange(self.n_nodes)
        idx = np.indices(self.grid_shape).reshape(self.dim, -1)
        m = self.cells_per_axis
        interior = np.all((idx > 0) & (idx < m), axis=0)
        return np.flatnonzero(interior)

    @property
    def n_free(self) -> int:
        return int(self.free_nodes.size)

    @cached_property
    def _topology(self):
        d, m = self.dim, self.cells_per_axis
        corners = np.indices((m,) * d).reshape(d, -1).T
        perms = list(itertools.permutations(range(d)))
        A = np.empty((len(corners), len(perms), d), dtype=np.int64)
        B = np.empty_like(A)
        bary = np.empty((len(corners), len(perms), d))
        for k, pi in enumerate(perms):
            vertex = corners.copy()
            for step, axis in enumerate(pi):
                nxt = vertex.copy()
                nxt[:, axis] += 1
                A[:, k, axis] = self._node_id(vertex)
                B[:, k, axis] = self._node_id(nxt)
                bary[:, k, axis] = corners[:, axis] + (d - step) / (d + 1.0)
                vertex = nxt
        return A.reshape(-1, d), B.reshape(-1, d), bary.reshape(-1, d)

    def _node_id(self, idx: np.ndarray) -> np.ndarray:
        if self.bc == "periodic":
            idx = np.mod(idx, self.cells_per_axis)
        return np.ravel_multi_index(tuple(idx.T), self.grid_shape)

    @property
    def edge_tails(self) -> np.ndarray:
        """``(n_elements, d)``: node at the start of the edge along each axis."""
        return self._topology[0]

    @property
    def edge_heads(self) -> np.ndarray:
        return self._topology[1]

    @cached_property
    def barycenters(self) -> np.ndarray:
        """Element barycenters in physical coordinates."""
        return np.asarray(self.origin, dtype=float) + self.h * self._topology[2]

    def node_coordinates(self) -> np.ndarray:
        idx = np.indices(self.grid_shape).reshape(self.dim, -1).T
        return np.asarray(self.origin, dtype=float) + self.h * idx

    def zero_field(self) -> np.ndarray:
        return np.zeros((self.n_free, self.components))

    def full_nodal(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=float).reshape(self.n_free, self.components)
        if self.bc == "periodic":
            return u
        full = np.zeros((self.n_nodes, self.components))
        full[self.free_nodes] = u
        return full

    def element_gradients(self, u: np.ndarray) -> np.ndarray:
        """``(n_elements, N, d)`` exact gradients of the interpolant of ``u``."""
        U = self.full_nodal(u)
        diff = (U[self.edge_heads] - U[self.edge_tails]) / self.h
        return np.transpose(diff, (0, 2, 1))

    def element_field(self, u: np.ndarray, sigma=None) -> ElementField:
        """Piecewise-constant field ``sigma + Du`` for modular computations."""
        G = self.element_gradients(u)
        if sigma is not None:
            G = G + np.asarray(sigma, dtype=float).reshape(self.components, self.dim)
        vol = np.full(self.n_elements, self.element_volume)
        return ElementField(G, vol, self.barycenters, self.coef_scale)


class DiscreteEnergy:
    """Energy ``sum_T |T| f(x_T, Sigma + Du|_T)`` and its exact gradient.

    Coefficients at the barycenters are looked up once.  ``field`` replaces
    the integrand's leading coefficient when given.
    """

    def __init__(self, mesh: CubeMesh, spec: AnySpec, field: LatticeField | None = None, sigma_offset=None):
        if field is not None:
            if field.dim != mesh.dim:
                raise ConfigurationError(f"field dimension {field.dim} != mesh dimension {mesh.dim}")
            spec = spec.with_field(field)
        for f in spec.fields().values():
            if f.dim != mesh.dim:
                raise ConfigurationError(f"field dimension {f.dim} != mesh dimension {mesh.dim}")
        shape = (mesh.components, mesh.dim)
        if mesh.bc == "dirichlet":
            if sigma_offset is not None and np.any(np.asarray(sigma_offset) != 0):
                raise ConfigurationError("dirichlet meshes carry sigma in their boundary data")
            sigma = mesh.sigma
        else:
            sigma = np.zeros(shape) if sigma_offset is None else np.asarray(sigma_offset, dtype=float)
            if sigma.size != mesh.components * mesh.dim:
                raise ConfigurationError(f"sigma must have shape {shape}")
            sigma = sigma.reshape(shape)
        self.mesh = mesh
        self.spec = spec
        self.sigma = sigma
        self.density = ElementDensity(spec, mesh.barycenters, mesh.coef_scale)
        self.vol = mesh.element_volume

    @property
    def size(self) -> int:
        return self.mesh.n_free * self.mesh.components

    def _strain(self, u):
        u = np.asarray(u, dtype=float)
        if not np.all(np.isfinite(u)):
            raise InputDomainError("displacement must be finite")
        return self.sigma + self.mesh.element_gradients(u)

    def energy(self, u) -> float:
        return float(self.vol * np.sum(self.density.value(self._strain(u))))

    def gradient(self, u) -> np.ndarray:
        return self.energy_and_gradient(u)[1]

    def energy_and_gradient(self, u):
        mesh = self.mesh
        M = self._strain(u)
        e = float(self.vol * np.sum(self.density.value(M)))
        S = self.density.derivative(M) * (self.vol / mesh.h)
        nn, N = mesh.n_nodes, mesh.components
        G = np.empty((nn, N))
        heads, tails = mesh.edge_heads.ravel(), mesh.edge_tails.ravel()
        for c in range(N):
            w = S[:, c, :].ravel()
            G[:, c] = np.bincount(heads, w, nn) - np.bincount(tails, w, nn)
        if mesh.bc == "periodic":
            G -= G.mean(axis=0)
            return e, G
        return e, G[mesh.free_nodes]


def assemble_energy(mesh: CubeMesh, spec: AnySpec, field=None, sigma_offset=None, u=None) -> float:
    if u is None:
        u = mesh.zero_field()
    return DiscreteEnergy(mesh, spec, field, sigma_offset).energy(u)


def assemble_gradient(
    mesh: CubeMesh, spec: AnySpec, field=None, sigma_offset=None, u=None, mode: str = "analytic"
) -> np.ndarray:
    """Gradient with respect to the free nodal values.

    ``mode="fd"`` uses central differences of the energy instead of the
    analytic chain rule.
    """
    if u is None:
        u = mesh.zero_field()
    oracle = DiscreteEnergy(mesh, spec, field, sigma_offset)
    if mode == "analytic":
        return oracle.gradient(u)
    if mode != "fd":
        raise ConfigurationError(f"unknown gradient mode {mode!r}")
    u = np.array(u, dtype=float).reshape(mesh.n_free, mesh.components)
    step = 1e-6 * max(1.0, float(np.max(np.abs(u))))
    G = np.empty_like(u)
    for idx in np.ndindex(u.shape):
        up, dn = u.copy(), u.copy()
        up[idx] += step
        dn[idx] -= step
        G[idx] = (oracle.energy(up) - oracle.energy(dn)) / (2 * step)
    if mesh.bc == "periodic":
        G -= G.mean(axis=0)
    return G
