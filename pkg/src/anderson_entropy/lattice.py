"""Lattice geometry, random potentials and the Anderson one-body Hamiltonian.

Sites of the hypercube Omega = {0, ..., L-1}^d are stored in C order (last
axis fastest). The centred coordinate of a site along an axis is
``i - (L - 1) // 2``, so the subsystem cube Lambda = [-m, m]^d sits in the
middle of Omega.

The Laplacian is the adjacency form (zero diagonal): ``H = a * Delta + diag(V)``.
A constant ``-2d`` diagonal would only shift the Fermi energy.

Random numbers come from numpy's Philox4x64-10 counter-based generator
seeded through ``numpy.random.SeedSequence``; a given (kind, seed, n) yields
the same samples on every platform.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .errors import ConfigError

__all__ = [
    "Boundary",
    "LatticeSpec",
    "PotentialKind",
    "PotentialModel",
    "AndersonModel",
    "build_laplacian",
    "sample_potential",
    "assemble",
    "shift_potential",
    "make_rng",
]


class Boundary(str, enum.Enum):
    OPEN = "open"
    PERIODIC = "periodic"


@dataclass(frozen=True)
class LatticeSpec:
    """Geometry of the box ``Omega`` and the centred sub-cube ``Lambda``.

    Parameters
    ----------
    d : int
        Spatial dimension.
    L : int
        Sites per axis of Omega (odd).
    l : int
        Side of the centred subsystem, ``l = 2m + 1 <= L``.
    boundary : Boundary or str
        ``"open"`` (default) or ``"periodic"``.
    strict : bool
        Enforce odd sizes. Only internal tests turn this off.
    """

    d: int
    L: int
    l: int = 1
    boundary: Boundary = Boundary.OPEN
    strict: bool = field(default=True, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "boundary", Boundary(self.boundary))
        if int(self.d) != self.d or self.d < 1:
            raise ConfigError(f"dimension must be a positive integer, got {self.d}")
        if int(self.L) != self.L or self.L < 1:
            raise ConfigError(f"side length L must be a positive integer, got {self.L}")
        if int(self.l) != self.l or self.l < 1:
            raise ConfigError(f"subsystem side l must be a positive integer, got {self.l}")
        if self.l > self.L:
            raise ConfigError(f"subsystem side l={self.l} exceeds L={self.L}")
        if self.strict and (self.L % 2 == 0 or self.l % 2 == 0):
            raise ConfigError(f"L and l must be odd (got L={self.L}, l={self.l})")

    @property
    def m(self) -> int:
        return (self.l - 1) // 2

    @property
    def n_sites(self) -> int:
        return self.L**self.d

    @property
    def center(self) -> int:
        """Array index of the centred coordinate 0 along each axis."""
        return (self.L - 1) // 2

    def with_l(self, l: int) -> "LatticeSpec":
        return LatticeSpec(self.d, self.L, l, self.boundary, self.strict)

    def coordinates(self) -> np.ndarray:
        """Centred integer coordinates of every site, shape ``(n_sites, d)``."""
        grids = np.indices((self.L,) * self.d).reshape(self.d, -1).T
        return grids - self.center

    def flat_index(self, coords) -> np.ndarray:
        """Flat site indices of centred coordinates (array of shape ``(..., d)``)."""
        coords = np.asarray(coords) + self.center
        return np.ravel_multi_index(tuple(np.moveaxis(coords, -1, 0)), (self.L,) * self.d)

    def subsystem_sites(self, l: int | None = None) -> np.ndarray:
        """Sorted flat indices of the centred cube of side ``l`` (default ``self.l``)."""
        l = self.l if l is None else l
        if l > self.L or l < 1:
            raise ConfigError(f"subsystem side {l} does not fit in L={self.L}")
        m = (l - 1) // 2
        lo = self.center - m
        axes = [np.arange(lo, lo + l)] * self.d
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.ravel_multi_index(tuple(mesh), (self.L,) * self.d).ravel()


class PotentialKind(str, enum.Enum):
    UNIFORM = "uniform"
    NONE = "none"
    CUSTOM = "custom"
    QUASIPERIODIC = "quasiperiodic"


@dataclass(frozen=True)
class PotentialModel:
    """Recipe for the on-site potential.

    ``uniform`` draws i.i.d. values on ``[-W, W]``; ``none`` is ``V = 0``;
    ``custom`` returns ``table`` verbatim; ``quasiperiodic`` gives
    ``W cos(2 pi beta j + phase)`` along the flat site index.
    """

    kind: PotentialKind = PotentialKind.UNIFORM
    W: float = 1.0
    seed: int = 0
    table: tuple[float, ...] | None = None
    beta: float = (np.sqrt(5.0) - 1.0) / 2.0
    phase: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "kind", PotentialKind(self.kind))
        if self.kind in (PotentialKind.UNIFORM, PotentialKind.QUASIPERIODIC) and not self.W > 0:
            raise ConfigError(f"{self.kind.value} potential needs W > 0, got W={self.W}")
        if self.kind is PotentialKind.CUSTOM and self.table is None:
            raise ConfigError("custom potential needs a value table")
        if not 0 <= int(self.seed) < 2**64:
            raise ConfigError(f"seed must be an unsigned 64-bit integer, got {self.seed}")

    def with_seed(self, seed: int) -> "PotentialModel":
        return PotentialModel(self.kind, self.W, seed, self.table, self.beta, self.phase)


def make_rng(seed: int) -> np.random.Generator:
    """Philox4x64-10 generator for ``seed``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed))))


def sample_potential(model: PotentialModel, n: int) -> np.ndarray:
    """Draw a potential vector of length ``n``."""
    if n < 1:
        raise ConfigError(f"need at least one site, got n={n}")
    kind = model.kind
    if kind is PotentialKind.NONE:
        return np.zeros(n)
    if kind is PotentialKind.UNIFORM:
        return make_rng(model.seed).uniform(-model.W, model.W, size=n)
    if kind is PotentialKind.QUASIPERIODIC:
        j = np.arange(n)
        return model.W * np.cos(2.0 * np.pi * model.beta * j + model.phase)
    table = np.asarray(model.table, dtype=float)
    if table.shape != (n,):
        raise ConfigError(f"custom potential table has {table.size} entries, need {n}")
    return table.copy()


def _neighbor_pairs(spec: LatticeSpec) -> np.ndarray:
    """Unordered nearest-neighbour pairs ``(i, j)`` with ``i != j``, shape ``(n_bonds, 2)``."""
    shape = (spec.L,) * spec.d
    idx = np.arange(spec.n_sites).reshape(shape)
    pairs = []
    for axis in range(spec.d):
        if spec.boundary is Boundary.PERIODIC and spec.L > 2:
            nxt = np.roll(idx, -1, axis=axis)
            pairs.append(np.stack([idx.ravel(), nxt.ravel()], axis=1))
        else:
            lo = np.take(idx, np.arange(spec.L - 1), axis=axis)
            hi = np.take(idx, np.arange(1, spec.L), axis=axis)
            pairs.append(np.stack([lo.ravel(), hi.ravel()], axis=1))
    if not pairs:
        return np.empty((0, 2), dtype=int)
    return np.concatenate(pairs)


def build_laplacian(spec: LatticeSpec) -> sp.csr_matrix:
    """Symmetric 0/1 adjacency matrix of the d-dimensional grid.

    Open boundaries drop out-of-range neighbours, periodic ones wrap around.
    """
    if spec.strict and spec.L < 3:
        raise ConfigError(f"the lattice needs at least 3 sites per axis, got L={spec.L}")
    pairs = _neighbor_pairs(spec)
    n = spec.n_sites
    rows = np.concatenate([pairs[:, 0], pairs[:, 1]])
    cols = np.concatenate([pairs[:, 1], pairs[:, 0]])
    adj = sp.coo_matrix((np.ones(rows.size), (rows, cols)), shape=(n, n)).tocsr()
    adj.sum_duplicates()
    return adj


@dataclass(frozen=True, eq=False)
class AndersonModel:
    """``H = a * Delta + diag(V)`` on the lattice ``spec``.

    ``hamiltonian`` is kept sparse; ``dense()`` materializes it.
    """

    spec: LatticeSpec
    a: float
    V: np.ndarray
    hamiltonian: sp.csr_matrix

    @property
    def n_sites(self) -> int:
        return self.spec.n_sites

    @property
    def is_tridiagonal(self) -> bool:
        return self.spec.d == 1 and (self.spec.boundary is Boundary.OPEN or self.spec.L <= 2)

    def tridiagonal(self) -> tuple[np.ndarray, np.ndarray]:
        """Diagonal and off-diagonal of a 1d open chain."""
        if not self.is_tridiagonal:
            raise ValueError("Hamiltonian is not tridiagonal")
        return self.V.copy(), np.full(self.n_sites - 1, float(self.a))

    def dense(self) -> np.ndarray:
        return self.hamiltonian.toarray()

    @cached_property
    def H(self) -> np.ndarray:
        return self.dense()


def assemble(spec: LatticeSpec, a: float, V) -> AndersonModel:
    """Build the Anderson Hamiltonian for potential ``V`` and hopping ``a``."""
    V = np.asarray(V, dtype=float)
    if V.shape != (spec.n_sites,):
        raise ConfigError(f"potential has shape {V.shape}, lattice has {spec.n_sites} sites")
    adj = build_laplacian(spec)
    H = (float(a) * adj + sp.diags(V)).tocsr()
    H.sort_indices()
    V = V.copy()
    V.setflags(write=False)
    return AndersonModel(spec=spec, a=float(a), V=V, hamiltonian=H)


def shift_potential(V, shift: int, mode: str = "periodic") -> np.ndarray:
    """Apply ``T^shift``: ``(T^a V)_j = V_{j+a}``.

    ``mode="periodic"`` rotates the vector, ``mode="truncate"`` drops the
    entries shifted past the end (the result is shorter by ``|shift|``).
    """
    V = np.asarray(V)
    n = V.shape[0]
    if mode == "periodic":
        return np.roll(V, -shift, axis=0)
    if mode == "truncate":
        if abs(shift) > n:
            raise ValueError(f"shift {shift} exceeds vector length {n}")
        return V[shift:].copy() if shift >= 0 else V[: n + shift].copy()
    raise ValueError(f"unknown shift mode {mode!r}")
