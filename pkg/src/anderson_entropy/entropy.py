"""Entanglement entropy of a subsystem and its lower/upper bounds.

Everything is in bits. For a correlation matrix restricted to the subsystem,
``P_A``, with eigenvalues ``lam``:

* entropy            ``S   = sum h(lam)``, ``h`` the binary entropy
* lower bound        ``L   = 4 tr Gamma``,  ``Gamma = P_A (1 - P_A)``
* upper bound        ``U   = 2 tr sqrt(Gamma)``
* tightened upper    ``U_t = tr (4 Gamma)^alpha``, ``alpha = ln 2``
* row-wise (Peierls) ``U_p = sum_j (4 Gamma_jj)^(1/2)``

They satisfy ``L <= S <= U_t <= U <= U_p`` because
``4x(1-x) <= h(x) <= (4x(1-x))^ln2 <= sqrt(4x(1-x))`` on [0, 1], and a
concave trace function is bounded by its value on the diagonal.
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.linalg as sla

from .errors import BoundViolationError, ConfigError, NumericalDefectError
from .spectral import CorrelationMatrix

__all__ = [
    "CLAMP_TOL",
    "TIGHT_EXPONENT",
    "SubsystemCorrelation",
    "EntropyReport",
    "BoundaryTerms",
    "binary_entropy",
    "restrict",
    "entanglement_entropy",
    "renyi_entropy",
    "lower_bound",
    "upper_bound",
    "tightened_upper",
    "peierls_upper",
    "entropy_report",
    "boundary_terms_1d",
    "ti_projector",
    "fermi_momentum",
]

CLAMP_TOL = 1e-10
TIGHT_EXPONENT = math.log(2.0)
_DOMAIN_TOL = 1e-9


def binary_entropy(x):
    """``h(x) = -x log2 x - (1-x) log2(1-x)`` with ``h(0) = h(1) = 0``.

    Values within 1e-9 outside [0, 1] are clamped; anything further out means
    an upstream correlation matrix is broken and raises.
    """
    x = np.asarray(x, dtype=float)
    if np.any(x < -_DOMAIN_TOL) or np.any(x > 1 + _DOMAIN_TOL):
        raise NumericalDefectError("binary_entropy argument outside [0, 1]")
    x = np.clip(x, 0.0, 1.0)
    y = 1.0 - x
    with np.errstate(divide="ignore", invalid="ignore"):
        hx = np.where(x > 0, -x * np.log2(np.where(x > 0, x, 1.0)), 0.0)
        hy = np.where(y > 0, -y * np.log2(np.where(y > 0, y, 1.0)), 0.0)
    out = hx + hy
    return out if out.ndim else float(out)


def _clamp_spectrum(lam: np.ndarray) -> np.ndarray:
    if lam.size and (lam.min() < -CLAMP_TOL or lam.max() > 1 + CLAMP_TOL):
        raise NumericalDefectError(
            f"subsystem correlation eigenvalues leave [0, 1]: min={lam.min():.3e}, max={lam.max():.3e}"
        )
    return np.clip(lam, 0.0, 1.0)


@dataclass(frozen=True, eq=False)
class SubsystemCorrelation:
    """Correlation matrix restricted to a subsystem, ``P_A``.

    For a correlation matrix of the whole system, ``exterior`` holds the
    block ``B = P[A, not A]`` and ``fluctuation`` the restriction of
    ``P (1 - P)`` (absent for a projector, where it vanishes). Then
    ``Gamma = fluctuation + B B^T`` is a sum of positive semidefinite terms,
    which keeps tiny eigenvalues of ``Gamma`` accurate in absolute terms and
    makes every bound vanish exactly when ``A`` is the whole system at
    ``T = 0``. Otherwise ``Gamma`` is formed as ``P_A - P_A^2`` and the
    spectrum comes from ``P_A``.

    All spectral functions depend on the spectrum only through
    ``phi = 4 lam (1 - lam)``, equivalently through the minority occupation
    ``min(lam, 1 - lam)``.
    """

    P: np.ndarray
    sites: np.ndarray = field(default=None)
    exterior: np.ndarray | None = None
    fluctuation: np.ndarray | None = None

    @cached_property
    def gamma(self) -> np.ndarray:
        if self.exterior is not None:
            g = self.exterior @ self.exterior.T
            return g if self.fluctuation is None else g + self.fluctuation
        return self.P - self.P @ self.P

    @cached_property
    def gamma_diagonal(self) -> np.ndarray:
        if self.exterior is not None:
            g = np.einsum("ij,ij->i", self.exterior, self.exterior)
            return g if self.fluctuation is None else g + np.diag(self.fluctuation)
        return np.diag(self.P) - np.einsum("ij,ij->i", self.P, self.P)

    @cached_property
    def eigenvalues(self) -> np.ndarray:
        """Clamped spectrum of ``P_A``."""
        if self.P.shape[0] == 0:
            return np.empty(0)
        return _clamp_spectrum(sla.eigvalsh(self.P, check_finite=False))

    @cached_property
    def minority(self) -> np.ndarray:
        """``min(lam, 1 - lam)`` for each eigenvalue, in [0, 1/2]."""
        if self.exterior is None:
            lam = self.eigenvalues
            return np.minimum(lam, 1.0 - lam)
        phi = self.phi
        return phi / (2.0 * (1.0 + np.sqrt(1.0 - phi)))

    @cached_property
    def phi(self) -> np.ndarray:
        """``4 lam (1 - lam)`` for each eigenvalue, in [0, 1]."""
        if self.exterior is None:
            m = self.minority
            return 4.0 * m * (1.0 - m)
        if self.P.shape[0] == 0 or (self.exterior.size == 0 and self.fluctuation is None):
            return np.zeros(self.P.shape[0])
        g = sla.eigvalsh(self.gamma, check_finite=False)
        if g.min() < -CLAMP_TOL or g.max() > 0.25 + CLAMP_TOL:
            raise NumericalDefectError(
                f"Gamma eigenvalues leave [0, 1/4]: min={g.min():.3e}, max={g.max():.3e}"
            )
        return np.clip(4.0 * g, 0.0, 1.0)

    @property
    def size(self) -> int:
        return self.P.shape[0]


def restrict(P: CorrelationMatrix, sites) -> SubsystemCorrelation:
    """Extract ``P_A = {P_jk}_{j,k in A}`` for the global site indices ``sites``."""
    sites = np.asarray(sites)
    if sites.size and (sites.min() < 0 or sites.max() >= P.n_total):
        raise ConfigError("subsystem exceeds the system")
    idx = P.local_index(sites)
    exterior = fluct = None
    if (P.is_projector or P.fluctuation is not None) and not P.is_window:
        outside = np.ones(P.entries.shape[0], dtype=bool)
        outside[idx] = False
        exterior = P.entries[np.ix_(idx, np.flatnonzero(outside))]
        if P.fluctuation is not None:
            fluct = P.fluctuation[np.ix_(idx, idx)]
    return SubsystemCorrelation(P.entries[np.ix_(idx, idx)], sites, exterior, fluct)


def entanglement_entropy(sc: SubsystemCorrelation) -> float:
    return float(np.sum(binary_entropy(sc.minority)))


def renyi_entropy(sc: SubsystemCorrelation, alpha: float) -> float:
    """Renyi entropy ``(1-alpha)^-1 sum log2(lam^alpha + (1-lam)^alpha)``."""
    if not alpha > 0:
        raise ConfigError(f"Renyi index must be positive, got {alpha}")
    if alpha == 1:
        raise ConfigError("alpha = 1 is the von Neumann entropy; use entanglement_entropy")
    lam = sc.minority
    return float(np.sum(np.log2(lam**alpha + (1.0 - lam) ** alpha)) / (1.0 - alpha))


def upper_bound(sc: SubsystemCorrelation) -> float:
    return float(np.sum(np.sqrt(sc.phi)))


def tightened_upper(sc: SubsystemCorrelation, alpha: float = TIGHT_EXPONENT) -> float:
    if not 0 < alpha < 1:
        raise ConfigError(f"exponent must lie in (0, 1), got {alpha}")
    return float(np.sum(sc.phi**alpha))


def _outside_row_sums(P: CorrelationMatrix, sites) -> np.ndarray:
    """``sum_{k not in A} |P_jk|^2`` for each ``j`` in ``A`` (over the sites P covers)."""
    idx = P.local_index(sites)
    rows = P.entries[idx]
    total = np.einsum("ij,ij->i", rows, rows)
    inside = rows[:, idx]
    return total - np.einsum("ij,ij->i", inside, inside)


def lower_bound(
    P: CorrelationMatrix, sites, cross_check: bool = True, atol: float = 1e-6
) -> float:
    """``L = 4 tr Gamma_A``.

    For a projector on the whole system the same number equals
    ``4 sum_{j in A, k not in A} |P_jk|^2``; with ``cross_check`` both are
    evaluated and a mismatch above ``atol`` raises
    :class:`NumericalDefectError`. Windows skip the check since their
    exterior sums are truncated.
    """
    sc = restrict(P, sites)
    trace_form = 4.0 * float(np.trace(sc.P) - np.sum(sc.P * sc.P))
    if cross_check and P.is_projector and not P.is_window:
        sum_form = 4.0 * float(np.sum(_outside_row_sums(P, sites)))
        if abs(sum_form - trace_form) > atol:
            raise NumericalDefectError(
                f"lower bound forms disagree: trace {trace_form!r} vs boundary sum {sum_form!r}"
            )
    return trace_form


def peierls_upper(P: CorrelationMatrix | SubsystemCorrelation, sites=None, alpha: float = 0.5) -> float:
    """Row-wise bound ``sum_{j in A} (4 Gamma_jj)^alpha``.

    For a projector ``Gamma_jj = sum_{k not in A} |P_jk|^2``. With
    ``alpha = 1/2`` this is ``2 sum_j (sum_{k not in A} |P_jk|^2)^(1/2)``.
    """
    sc = P if isinstance(P, SubsystemCorrelation) else restrict(P, sites)
    g = sc.gamma_diagonal
    if g.size and g.min() < -CLAMP_TOL:
        raise NumericalDefectError(f"negative Gamma diagonal {g.min():.3e}")
    g = np.clip(g, 0.0, None)
    return float(np.sum((4.0 * g) ** alpha))


@dataclass(frozen=True)
class EntropyReport:
    S: float
    L: float
    U: float
    U_tight: float
    U_peierls: float
    renyi: dict = field(default_factory=dict)

    def check_sandwich(self, slack: float = 1e-9) -> None:
        """Raise if ``L <= S <= U_tight <= U <= U_peierls`` fails beyond ``slack``."""
        chain = [("L", self.L), ("S", self.S), ("U_tight", self.U_tight), ("U", self.U),
                 ("U_peierls", self.U_peierls)]
        for (na, a), (nb, b) in zip(chain, chain[1:]):
            if a > b + slack:
                raise BoundViolationError(f"bound violation: {na}={a!r} > {nb}={b!r}")
        if min(v for _, v in chain) < -slack:
            raise BoundViolationError("negative entropy or bound")


def entropy_report(
    P: CorrelationMatrix,
    sites,
    renyi_alphas=(),
    alpha_tight: float = TIGHT_EXPONENT,
    cross_check: bool = True,
) -> EntropyReport:
    """All entropies and bounds for the subsystem ``sites`` in one pass."""
    sc = restrict(P, sites)
    return EntropyReport(
        S=entanglement_entropy(sc),
        L=lower_bound(P, sites, cross_check=cross_check),
        U=upper_bound(sc),
        U_tight=tightened_upper(sc, alpha_tight),
        U_peierls=peierls_upper(sc),
        renyi={float(a): renyi_entropy(sc, a) for a in renyi_alphas},
    )


@dataclass(frozen=True)
class BoundaryTerms:
    """Edge decomposition of the 1d lower and upper bounds for ``A = [-m, m]``.

    ``L_plus``/``L_minus`` split the lower bound by the side of the exterior
    site; ``Lcal_*`` are the edge sums with the inner index running past the
    opposite edge, ``R_*`` the far-corner remainders
    (``L_plus = Lcal_plus - R_plus`` for an untruncated window), ``Ucal_*``
    the edge upper terms with prefactor ``2^(3/2)``.
    """

    L_plus: float
    L_minus: float
    Lcal_plus: float
    Lcal_minus: float
    R_plus: float
    R_minus: float
    Ucal_plus: float
    Ucal_minus: float

    @property
    def L_total(self) -> float:
        return self.L_plus + self.L_minus

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def boundary_terms_1d(
    P: CorrelationMatrix, m: int, cutoff: int | None = None, center: int | None = None
) -> BoundaryTerms:
    """Edge terms of the lower/upper bounds of a centred 1d interval ``[-m, m]``.

    Parameters
    ----------
    P : CorrelationMatrix
        Projector of a chain (full or a window of it).
    m : int
        Half-width of the interval.
    cutoff : int, optional
        The half-infinite sums in ``Lcal_*`` and ``Ucal_*`` keep only sites
        within ``cutoff`` of the respective edge; ``None`` keeps everything
        covered by ``P``.
    center : int, optional
        Global index of coordinate 0; defaults to the middle of the chain.
    """
    if center is None:
        center = (P.n_total - 1) // 2
    x = P.sites - center
    Q = P.entries * P.entries
    xmin, xmax = int(x[0]), int(x[-1])
    if not (xmin <= -m and m <= xmax):
        raise ConfigError(f"interval [-{m}, {m}] is not covered by the correlation window")
    if len(x) != xmax - xmin + 1:
        raise ConfigError("boundary terms need a contiguous window")

    def span(lo, hi):
        lo, hi = max(lo, xmin), min(hi, xmax)
        if hi < lo:
            return slice(0, 0)
        return slice(lo - xmin, hi - xmin + 1)

    def block(rows, cols):
        return float(np.sum(Q[rows, cols]))

    def edge_upper(rows, cols):
        return 2.0**1.5 * float(np.sum(np.sqrt(np.sum(Q[rows, cols], axis=1))))

    big = xmax - xmin + 1
    K = big if cutoff is None else int(cutoff)
    inner = span(-m, m)
    right, left = span(m + 1, xmax), span(xmin, -m - 1)
    r_in, r_out = span(m - K + 1, m), span(m + 1, m + K)
    l_in, l_out = span(-m, -m + K - 1), span(-m - K, -m - 1)
    return BoundaryTerms(
        L_plus=4.0 * block(inner, right),
        L_minus=4.0 * block(inner, left),
        Lcal_plus=4.0 * block(r_in, r_out),
        Lcal_minus=4.0 * block(l_in, l_out),
        R_plus=4.0 * block(left, right),
        R_minus=4.0 * block(right, left),
        Ucal_plus=edge_upper(r_in, r_out),
        Ucal_minus=edge_upper(l_in, l_out),
    )


def fermi_momentum(mu: float, a: float) -> float:
    """Fermi momentum of the clean chain ``H = a Delta``: filling ``kappa / pi``."""
    if a == 0:
        raise ConfigError("the clean chain needs nonzero hopping")
    ratio = -mu / (2.0 * abs(a))
    if not -1 < ratio < 1:
        raise ConfigError(f"mu={mu} lies outside the band [-{2 * abs(a)}, {2 * abs(a)}]")
    return math.acos(ratio)


def ti_projector(kappa: float, n: int) -> CorrelationMatrix:
    """Sine kernel ``sin(kappa (j-k)) / (pi (j-k))`` on ``n`` consecutive sites.

    This is the infinite clean-chain Fermi projector restricted to ``n``
    sites, up to a gauge sign that no entropy depends on.
    """
    if not 0 < kappa < math.pi:
        raise ConfigError(f"kappa must lie in (0, pi), got {kappa}")
    t = np.arange(n)
    diff = t[:, None] - t[None, :]
    safe = np.where(diff == 0, 1, diff)
    K = np.where(diff == 0, kappa / math.pi, np.sin(kappa * diff) / (math.pi * safe))
    # a window of the infinite chain
    return CorrelationMatrix(K, mu=float("nan"), T=0.0, sites=t, n_total=sys.maxsize)
