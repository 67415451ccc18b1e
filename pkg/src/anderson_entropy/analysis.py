"""Post-processing of ensemble output.

Scaling fits use weighted least squares with ``1/stderr^2`` weights. Models
are compared by residual norm: one is *preferred* when its residual is below
``PREFERENCE_RATIO`` times that of each alternative, otherwise the comparison
is inconclusive.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.stats

from .ensemble import Density
from .errors import InsufficientDataError
from .lattice import make_rng

__all__ = [
    "MODELS",
    "PREFERENCE_RATIO",
    "ScalingFit",
    "OverlapReport",
    "SaturationReport",
    "ConvolutionReport",
    "VolumeLawReport",
    "fit_scaling",
    "preferred_model",
    "overlap_test",
    "ks_statistic",
    "ks_critical_value",
    "saturation_test",
    "convolution_check",
    "thermal_volume_check",
]

PREFERENCE_RATIO = 0.8

# name -> (parameter names, design columns as functions of (l, d))
MODELS = {
    "area": (("c",), lambda l, d: [l ** (d - 1)]),
    "area_log": (("c",), lambda l, d: [l ** (d - 1) * np.log(l)]),
    "log": (("a", "b"), lambda l, d: [np.ones_like(l), np.log(l)]),
    "volume": (("a", "b"), lambda l, d: [np.ones_like(l), l**d]),
    "bulk": (("c",), lambda l, d: [l**d]),
}


@dataclass(frozen=True)
class ScalingFit:
    """Result of ``fit_scaling``.

    ``residual_norm`` is the weighted (chi) norm used for model comparison;
    ``relative_residual`` is ``||y - fit|| / ||y||`` without weights.
    """

    model: str
    params: dict
    stderr: dict
    residual_norm: float
    relative_residual: float
    n_points: int
    weighted: bool

    def ci95(self, name: str) -> tuple[float, float]:
        half = 1.959963984540054 * self.stderr[name]
        return self.params[name] - half, self.params[name] + half

    def predict(self, l, d: int) -> np.ndarray:
        l = np.asarray(l, dtype=float)
        names, design = MODELS[self.model]
        cols = design(l, d)
        return sum(self.params[n] * c for n, c in zip(names, cols))


def _as_points(points):
    arr = np.asarray(
        [(p[0], p[1], np.nan if len(p) < 3 or p[2] is None else p[2]) for p in points], dtype=float
    )
    return arr[:, 0], arr[:, 1], arr[:, 2]


def fit_scaling(points, d: int, model: str) -> ScalingFit:
    """Fit ``(l, mean, stderr)`` points to one of ``MODELS``.

    Needs at least 4 distinct ``l`` spanning a factor 4. Without usable
    standard errors the fit is unweighted and parameter errors come from the
    residual scatter.
    """
    if model not in MODELS:
        raise ValueError(f"unknown model {model!r}; choose from {sorted(MODELS)}")
    l, y, err = _as_points(points)
    if len(np.unique(l)) < 4:
        raise InsufficientDataError("scaling fits need at least 4 distinct subsystem sizes")
    if l.max() < 4 * l.min():
        raise InsufficientDataError("subsystem sizes must span at least a factor 4")
    names, design = MODELS[model]
    X = np.column_stack(design(l, d))
    weighted = bool(np.all(np.isfinite(err)) and np.all(err > 0))
    w = 1.0 / err if weighted else np.ones_like(y)
    Xw, yw = X * w[:, None], y * w
    if np.linalg.matrix_rank(Xw) < X.shape[1]:
        raise InsufficientDataError("degenerate design matrix")
    beta, *_ = np.linalg.lstsq(Xw, yw, rcond=None)
    resid_w = yw - Xw @ beta
    cov = np.linalg.inv(Xw.T @ Xw)
    if not weighted:
        dof = len(y) - X.shape[1]
        cov = cov * (float(resid_w @ resid_w) / dof if dof > 0 else math.inf)
    resid = y - X @ beta
    ynorm = float(np.linalg.norm(y))
    return ScalingFit(
        model=model,
        params={n: float(b) for n, b in zip(names, beta)},
        stderr={n: float(math.sqrt(max(cov[i, i], 0.0))) for i, n in enumerate(names)},
        residual_norm=float(np.linalg.norm(resid_w)),
        relative_residual=float(np.linalg.norm(resid)) / ynorm if ynorm > 0 else math.inf,
        n_points=len(y),
        weighted=weighted,
    )


def preferred_model(fits, ratio: float = PREFERENCE_RATIO) -> str | None:
    """Name of the fit whose residual beats all others by ``ratio``, else ``None``."""
    fits = list(fits)
    best = min(fits, key=lambda f: f.residual_norm)
    for f in fits:
        if f is not best and not best.residual_norm < ratio * f.residual_norm:
            return None
    return best.model


@dataclass(frozen=True)
class OverlapReport:
    coefficient: float
    support_L: tuple[float, float]
    support_U: tuple[float, float]
    median_L: float
    median_U: float
    verdict: str

    @property
    def non_selfaveraging(self) -> bool:
        return self.verdict == "non-selfaveraging"


def overlap_test(pL: Density, pU: Density, threshold: float = 0.05) -> OverlapReport:
    """Overlap of the lower- and upper-bound densities on common bins.

    If the entropy tended to a deterministic value, every lower bound would sit
    below it and every upper bound above, so the two densities would be
    disjoint. The verdict is ``non-selfaveraging`` when the overlap coefficient
    exceeds ``threshold`` and each [1%, 99%] quantile interval contains the
    other density's median.
    """
    if pL.edges.shape != pU.edges.shape or not np.allclose(pL.edges, pU.edges, rtol=0, atol=0):
        raise ValueError("densities must share bin edges")
    coef = float(np.sum(np.minimum(pL.density, pU.density) * pL.widths))
    coef = min(max(coef, 0.0), 1.0)
    sL = (pL.quantile(0.01), pL.quantile(0.99))
    sU = (pU.quantile(0.01), pU.quantile(0.99))
    mL, mU = pL.median, pU.median
    contained = sL[0] <= mU <= sL[1] and sU[0] <= mL <= sU[1]
    verdict = "non-selfaveraging" if coef > threshold and contained else "selfaveraging-consistent"
    return OverlapReport(coef, sL, sU, mL, mU, verdict)


def ks_statistic(x, y) -> float:
    """Two-sample Kolmogorov-Smirnov distance ``sup |F_x - F_y|``."""
    return float(scipy.stats.ks_2samp(np.asarray(x), np.asarray(y)).statistic)


def ks_critical_value(n: int, m: int, alpha: float = 0.05) -> float:
    """Asymptotic two-sample critical value ``c(alpha) sqrt((n+m)/(n m))``."""
    c = math.sqrt(-math.log(alpha / 2.0) / 2.0)
    return c * math.sqrt((n + m) / (n * m))


@dataclass(frozen=True)
class SaturationReport:
    sizes: tuple
    distances: tuple
    critical_values: tuple
    max_distance: float
    saturated: bool


def saturation_test(samples_by_l: dict, alpha: float = 0.05, min_samples: int = 500) -> SaturationReport:
    """KS distances between distributions at successive subsystem sizes."""
    sizes = tuple(sorted(samples_by_l))
    if len(sizes) < 2:
        raise InsufficientDataError("saturation needs at least two subsystem sizes")
    for l in sizes:
        if len(samples_by_l[l]) < min_samples:
            raise InsufficientDataError(f"l={l}: {len(samples_by_l[l])} samples, need {min_samples}")
    dist, crit = [], []
    for a, b in zip(sizes, sizes[1:]):
        x, y = samples_by_l[a], samples_by_l[b]
        dist.append(ks_statistic(x, y))
        crit.append(ks_critical_value(len(x), len(y), alpha))
    saturated = all(dv < cv for dv, cv in zip(dist, crit))
    return SaturationReport(sizes, tuple(dist), tuple(crit), max(dist), saturated)


@dataclass(frozen=True)
class ConvolutionReport:
    distance: float
    critical_value: float
    consistent: bool
    n: int


def convolution_check(plus, minus, full, seed: int = 0, alpha: float = 0.05,
                      min_samples: int = 100) -> ConvolutionReport:
    """Compare ``full`` with the law of ``plus + minus`` under independence.

    The convolution sample pairs ``plus[i]`` with ``minus[perm[i]]`` for a
    seeded random permutation, which breaks any dependence between the two
    edge terms of the same realization.
    """
    plus, minus, full = (np.asarray(v, dtype=float) for v in (plus, minus, full))
    if min(len(plus), len(minus), len(full)) < min_samples:
        raise InsufficientDataError(f"convolution check needs >= {min_samples} samples")
    if len(plus) != len(minus):
        raise ValueError("edge samples must have equal length")
    conv = plus + minus[make_rng(seed).permutation(len(minus))]
    dist = ks_statistic(full, conv)
    crit = ks_critical_value(len(full), len(conv), alpha)
    return ConvolutionReport(dist, crit, dist < crit, len(full))


@dataclass(frozen=True)
class VolumeLawReport:
    b: float
    b_ci95: tuple[float, float]
    volume_fit: ScalingFit
    area_fit: ScalingFit
    preferred: str | None
    volume_law: bool = field(default=False)


def thermal_volume_check(points, d: int) -> VolumeLawReport:
    """Fit ``<S> = a + b l^d`` and test ``b > 0`` against the area model."""
    vol = fit_scaling(points, d, "volume")
    area = fit_scaling(points, d, "area")
    pref = preferred_model([vol, area])
    lo, hi = vol.ci95("b")
    return VolumeLawReport(
        b=vol.params["b"], b_ci95=(lo, hi), volume_fit=vol, area_fit=area, preferred=pref,
        volume_law=bool(lo > 0 and pref == "volume"),
    )
