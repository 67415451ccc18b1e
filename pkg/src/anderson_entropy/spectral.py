"""Exact diagonalization and free-fermion correlation matrices.

At zero temperature the correlation matrix is the Fermi projector
``P = theta(mu - H)``; at ``T > 0`` it is ``K = (1 + exp((H - mu)/T))^-1``.
Open 1d chains go through LAPACK's MRRR tridiagonal solver (``stemr``),
which keeps exponentially small eigenvector components accurate; everything
else uses a dense symmetric solver.
"""

from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .errors import ConfigError, SpectralError
from .lattice import AndersonModel

__all__ = [
    "SpectralData",
    "CorrelationMatrix",
    "DENSE_SITE_LIMIT",
    "DEGENERACY_TOL",
    "eigendecompose",
    "integrated_dos",
    "fermi_factor",
    "fermi_projector",
    "thermal_correlation",
    "windowed_correlation",
    "fingerprint",
]

logger = logging.getLogger(__name__)

DENSE_SITE_LIMIT = 10_000
DEGENERACY_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class SpectralData:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def size(self) -> int:
        return self.eigenvalues.shape[0]


@dataclass(frozen=True, eq=False)
class CorrelationMatrix:
    """Correlation matrix ``<c_j^+ c_k>`` on a set of sites.

    Attributes
    ----------
    entries : ndarray
        Real symmetric matrix; row ``i`` belongs to global site ``sites[i]``.
    mu, T : float
        Fermi energy and temperature (``T == 0`` marks a projector).
    sites : ndarray
        Sorted global flat indices of the rows. Covers all of Omega unless the
        matrix is a window around the subsystem.
    n_total : int
        Number of sites of the full system.
    fluctuation : ndarray or None
        ``K (1 - K)`` on the same rows, formed from the spectrum so that tiny
        values stay accurate. ``None`` for projectors, where it vanishes.
    """

    entries: np.ndarray
    mu: float
    T: float = 0.0
    sites: np.ndarray = field(default=None)
    n_total: int | None = None
    fluctuation: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        n = self.entries.shape[0]
        if self.sites is None:
            object.__setattr__(self, "sites", np.arange(n))
        if self.n_total is None:
            object.__setattr__(self, "n_total", n)

    @property
    def is_projector(self) -> bool:
        return self.T == 0

    @property
    def is_window(self) -> bool:
        return self.entries.shape[0] < self.n_total

    def local_index(self, global_sites) -> np.ndarray:
        """Row positions of ``global_sites``; raises if any is outside the matrix."""
        global_sites = np.asarray(global_sites)
        pos = np.searchsorted(self.sites, global_sites)
        pos = np.clip(pos, 0, len(self.sites) - 1)
        if not np.array_equal(self.sites[pos], global_sites):
            raise ConfigError("requested sites are not covered by this correlation matrix")
        return pos


def fingerprint(matrix) -> str:
    data = matrix.toarray() if hasattr(matrix, "toarray") else np.asarray(matrix)
    return hashlib.sha256(np.ascontiguousarray(data, dtype=float).tobytes()).hexdigest()[:12]


def eigendecompose(
    model: AndersonModel, max_sites: int = DENSE_SITE_LIMIT, force_dense: bool = False
) -> SpectralData:
    """Full eigendecomposition of ``model.hamiltonian`` (ascending eigenvalues)."""
    n = model.n_sites
    if n > max_sites:
        raise ConfigError(
            f"{n} sites exceed the dense solver limit of {max_sites}; use windowed_correlation"
        )
    try:
        if model.is_tridiagonal and not force_dense and n > 1:
            diag, off = model.tridiagonal()
            w, v = sla.eigh_tridiagonal(diag, off, lapack_driver="stemr")
        else:
            w, v = sla.eigh(model.dense(), driver="evd")
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise SpectralError(f"eigensolver failed: {exc}", fingerprint(model.hamiltonian)) from exc
    return SpectralData(w, v)


def _warn_degenerate(eigenvalues, mu):
    close = np.abs(eigenvalues - mu) < DEGENERACY_TOL
    if close.any():
        logger.warning(
            "%d eigenvalue(s) within %.0e of mu=%r; counted as unoccupied",
            int(close.sum()), DEGENERACY_TOL, mu,
        )


def integrated_dos(s: SpectralData, mu: float) -> float:
    """Fraction of eigenvalues strictly below ``mu``."""
    _warn_degenerate(s.eigenvalues, mu)
    return int(np.count_nonzero(s.eigenvalues < mu)) / s.size


def fermi_factor(E, mu: float, T: float) -> np.ndarray:
    """``1 / (1 + exp((E - mu)/T))`` without overflow."""
    x = (np.asarray(E, dtype=float) - mu) / T
    out = np.empty_like(x)
    neg = x <= 0
    out[neg] = 1.0 / (1.0 + np.exp(x[neg]))
    ex = np.exp(-x[~neg])
    out[~neg] = ex / (1.0 + ex)
    return out


def _rows(s: SpectralData, sites):
    if sites is None:
        return np.arange(s.size), s.eigenvectors
    sites = np.asarray(sites)
    return sites, s.eigenvectors[sites]


def fermi_projector(s: SpectralData, mu: float, sites=None) -> CorrelationMatrix:
    """``P = sum_{E_i < mu} v_i v_i^T``, optionally only on ``sites``."""
    _warn_degenerate(s.eigenvalues, mu)
    n_occ = int(np.count_nonzero(s.eigenvalues < mu))
    sites, rows = _rows(s, sites)
    occ = rows[:, :n_occ]
    return CorrelationMatrix(occ @ occ.T, float(mu), 0.0, sites, s.size)


def thermal_correlation(s: SpectralData, mu: float, T: float, sites=None) -> CorrelationMatrix:
    """``K = sum_i f_i v_i v_i^T`` with Fermi factors at temperature ``T > 0``."""
    if not T > 0:
        raise ConfigError(f"temperature must be positive, got T={T}")
    f = fermi_factor(s.eigenvalues, mu, T)
    # f (1 - f) without cancellation: 1 - f(E) = f(2 mu - E)
    g = f * fermi_factor(2.0 * mu - s.eigenvalues, mu, T)
    sites, rows = _rows(s, sites)
    return CorrelationMatrix(
        (rows * f) @ rows.T, float(mu), float(T), sites, s.size, fluctuation=(rows * g) @ rows.T
    )


def windowed_correlation(
    model: AndersonModel, mu: float, sites, T: float = 0.0, chunk: int = 512
) -> CorrelationMatrix:
    """Exact rows/columns of P (or K) on ``sites`` without storing all eigenvectors.

    Eigenvectors of the open chain are produced in index blocks of size
    ``chunk`` and folded into the window immediately, so memory stays at
    ``O(n * chunk)``. Used when the chain is too long for ``eigendecompose``.
    """
    if not model.is_tridiagonal:
        raise ConfigError("windowed mode is only available for open 1d chains")
    sites = np.asarray(sites)
    diag, off = model.tridiagonal()
    try:
        w = sla.eigvalsh_tridiagonal(diag, off, lapack_driver="stemr")
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise SpectralError(f"eigensolver failed: {exc}", fingerprint(model.hamiltonian)) from exc
    if T == 0:
        _warn_degenerate(w, mu)
        weights = (w < mu).astype(float)
    else:
        weights = fermi_factor(w, mu, T)
    active = np.flatnonzero(weights > 0)
    acc = np.zeros((sites.size, sites.size))
    if active.size:
        lo, hi = int(active[0]), int(active[-1])
        for start in range(lo, hi + 1, chunk):
            stop = min(start + chunk, hi + 1)
            try:
                _, v = sla.eigh_tridiagonal(
                    diag, off, select="i", select_range=(start, stop - 1), lapack_driver="stemr"
                )
            except (np.linalg.LinAlgError, ValueError) as exc:
                raise SpectralError(
                    f"eigensolver failed on block {start}:{stop}: {exc}",
                    fingerprint(model.hamiltonian),
                ) from exc
            rows = v[sites]
            acc += (rows * weights[start:stop]) @ rows.T
    return CorrelationMatrix(acc, float(mu), float(T), sites, model.n_sites)
