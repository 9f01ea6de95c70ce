"""Lattice coefficient fields with an exact integer shift action.

A field assigns a positive value to every unit cell ``[z, z+1)`` of the
integer lattice.  Two kinds exist:

* ``periodic``: a fixed pattern repeated with period ``pattern.shape``.
* ``random``: iid cell values drawn from a finite palette.  The value of a
  cell is a pure function of ``(seed, stream, cell index)`` obtained from a
  counter-based hash, so any window of the lattice can be regenerated in any
  order and shifts are exact.

Shifting never touches stored data; it only accumulates ``offset``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

__all__ = [
    "ConfigurationError",
    "LatticeField",
    "constant_field",
    "periodic_field",
    "sample_lattice_field",
    "value_at",
    "values_at_cells",
    "shift_field",
    "hash_uniform",
]

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)


class ConfigurationError(ValueError):
    """Invalid user-supplied configuration (palette, shapes, alignment)."""


def _mix64(z):
    # splitmix64 finalizer; uint64 array arithmetic wraps modulo 2**64
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


def hash_uniform(seed: int, cells: np.ndarray, stream: int = 0) -> np.ndarray:
    """Map integer cell indices ``(..., d)`` to uniforms in ``[0, 1)``."""
    cells = np.asarray(cells, dtype=np.int64)
    key = np.array([(int(seed) ^ (int(stream) << 32)) & 0xFFFFFFFFFFFFFFFF], dtype=np.uint64)
    h = _mix64(key + _GOLDEN)
    h = np.broadcast_to(h, cells.shape[:-1]).copy()
    for axis in range(cells.shape[-1]):
        coord = cells[..., axis].astype(np.uint64)
        salt = np.uint64((0x9E3779B97F4A7C15 * (axis + 1)) & 0xFFFFFFFFFFFFFFFF)
        h = _mix64(h ^ (coord + salt))
    return (h >> np.uint64(11)).astype(np.float64) * (1.0 / 9007199254740992.0)


def _check_palette(palette) -> tuple[tuple[float, float], ...]:
    pal = tuple((float(v), float(pr)) for v, pr in palette)
    if not pal:
        raise ConfigurationError("palette must be nonempty")
    values = np.array([v for v, _ in pal])
    probs = np.array([pr for _, pr in pal])
    if not np.all(np.isfinite(values)) or np.any(values <= 0):
        raise ConfigurationError("palette values must be finite and strictly positive")
    if np.any(probs < 0) or not np.all(np.isfinite(probs)):
        raise ConfigurationError("palette probabilities must be nonnegative")
    if abs(probs.sum() - 1.0) > 1e-12:
        raise ConfigurationError(f"palette probabilities sum to {probs.sum()!r}, not 1")
    return pal


@dataclass(frozen=True, eq=False)
class LatticeField:
    """Positive piecewise-constant field on the unit cells of ``Z^d``.

    Use :func:`periodic_field`, :func:`constant_field` or
    :func:`sample_lattice_field` rather than the raw constructor.
    """

    dim: int
    kind: str
    pattern: np.ndarray | None = None
    seed: int | None = None
    palette: tuple[tuple[float, float], ...] | None = None
    offset: tuple[int, ...] = ()
    stream: int = 0
    _cdf: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.dim < 1:
            raise ConfigurationError("dimension must be at least 1")
        if not self.offset:
            object.__setattr__(self, "offset", (0,) * self.dim)
        if len(self.offset) != self.dim:
            raise ConfigurationError("offset length must equal the dimension")
        object.__setattr__(self, "offset", tuple(int(z) for z in self.offset))
        if self.kind == "periodic":
            pat = np.array(self.pattern, dtype=float)
            if pat.ndim != self.dim:
                raise ConfigurationError(
                    f"pattern has {pat.ndim} axes but the field dimension is {self.dim}"
                )
            if pat.size == 0 or not np.all(np.isfinite(pat)) or np.any(pat <= 0):
                raise ConfigurationError("pattern values must be finite and strictly positive")
            pat.setflags(write=False)
            object.__setattr__(self, "pattern", pat)
        elif self.kind == "random":
            if self.seed is None:
                raise ConfigurationError("random field requires a seed")
            pal = _check_palette(self.palette)
            object.__setattr__(self, "palette", pal)
            cdf = np.cumsum([pr for _, pr in pal])
            cdf[-1] = 1.0
            object.__setattr__(self, "_cdf", cdf)
            object.__setattr__(self, "seed", int(self.seed))
        else:
            raise ConfigurationError(f"unknown field kind {self.kind!r}")

    @property
    def period(self) -> tuple[int, ...] | None:
        return None if self.kind != "periodic" else tuple(self.pattern.shape)

    def distinct_values(self) -> np.ndarray:
        """All values the field can take."""
        if self.kind == "periodic":
            return np.unique(self.pattern)
        return np.unique([v for v, pr in self.palette if pr > 0])

    def max_value(self) -> float:
        return float(self.distinct_values().max())

    def min_value(self) -> float:
        return float(self.distinct_values().min())

    def reseeded(self, seed: int) -> "LatticeField":
        """Same law, new realization.  Periodic fields are returned unchanged."""
        if self.kind != "random":
            return self
        return replace(self, seed=int(seed), offset=(0,) * self.dim)

    def to_manifest(self) -> dict:
        """JSON-ready description sufficient to regenerate the field."""
        out = {"kind": self.kind, "dim": self.dim, "offset": list(self.offset)}
        if self.kind == "periodic":
            out["pattern"] = [repr(float(v)) for v in self.pattern.ravel()]
            out["shape"] = list(self.pattern.shape)
        else:
            out["seed"] = self.seed
            out["stream"] = self.stream
            out["palette"] = [[repr(v), repr(p)] for v, p in self.palette]
        return out

    @classmethod
    def from_manifest(cls, entry: dict) -> "LatticeField":
        if entry["kind"] == "periodic":
            pat = np.array([float(v) for v in entry["pattern"]]).reshape(entry["shape"])
            return cls(dim=entry["dim"], kind="periodic", pattern=pat, offset=tuple(entry["offset"]))
        palette = [(float(v), float(p)) for v, p in entry["palette"]]
        return cls(
            dim=entry["dim"],
            kind="random",
            seed=entry["seed"],
            palette=palette,
            offset=tuple(entry["offset"]),
            stream=entry.get("stream", 0),
        )


def periodic_field(pattern, dim: int | None = None) -> LatticeField:
    pat = np.array(pattern, dtype=float)
    if dim is not None and pat.ndim < dim:
        pat = pat.reshape(pat.shape + (1,) * (dim - pat.ndim))
    return LatticeField(dim=pat.ndim, kind="periodic", pattern=pat)


def constant_field(value: float, dim: int) -> LatticeField:
    return LatticeField(dim=dim, kind="periodic", pattern=np.full((1,) * dim, float(value)))


def sample_lattice_field(
    seed: int,
    palette: Sequence[tuple[float, float]],
    region=None,
    dim: int | None = None,
    stream: int = 0,
) -> LatticeField:
    """Random iid field.

    ``region`` is an optional ``(lower, upper)`` pair of integer corners; it
    only fixes the dimension and is checked for nonemptiness, since values
    are generated lazily from the cell index.
    """
    if region is not None:
        lo, hi = (np.atleast_1d(np.asarray(c, dtype=np.int64)) for c in region)
        if lo.shape != hi.shape or np.any(hi <= lo):
            raise ConfigurationError("region must be a nonempty box")
        dim = lo.size
    if dim is None:
        raise ConfigurationError("either region or dim is required")
    return LatticeField(dim=dim, kind="random", seed=seed, palette=palette, stream=stream)


def values_at_cells(f: LatticeField, cells) -> np.ndarray:
    """Vectorized lookup for integer cell indices of shape ``(..., d)``."""
    cells = np.asarray(cells, dtype=np.int64)
    if cells.shape[-1] != f.dim:
        raise ConfigurationError(f"cells have last axis {cells.shape[-1]}, expected {f.dim}")
    cells = cells + np.asarray(f.offset, dtype=np.int64)
    if f.kind == "periodic":
        idx = tuple(np.mod(cells[..., i], f.pattern.shape[i]) for i in range(f.dim))
        return f.pattern[idx]
    u = hash_uniform(f.seed, cells, f.stream)
    k = np.searchsorted(f._cdf, u, side="right")
    k = np.minimum(k, len(f.palette) - 1)
    values = np.array([v for v, _ in f.palette])
    return values[k]


def value_at(f: LatticeField, x) -> np.ndarray | float:
    """Value of the cell containing ``x`` (cells are right-open unit cubes).

    ``x`` may be a single point of length ``d`` or an array ``(..., d)``.
    For ``d == 1`` a bare scalar is accepted.
    """
    x = np.asarray(x, dtype=float)
    if f.dim == 1 and (x.ndim == 0 or x.shape[-1] != 1):
        x = x[..., None]
    if not np.all(np.isfinite(x)):
        raise ValueError("value_at requires finite coordinates")
    out = values_at_cells(f, np.floor(x).astype(np.int64))
    return float(out) if out.ndim == 0 else out


def shift_field(f: LatticeField, z) -> LatticeField:
    """Field realizing the shifted medium: ``value_at(result, x) == value_at(f, x + z)``."""
    z = np.atleast_1d(np.asarray(z, dtype=np.int64))
    if z.size != f.dim:
        raise ConfigurationError("shift must have one entry per dimension")
    return replace(f, offset=tuple(int(a + b) for a, b in zip(f.offset, z)))
