"""Seeded Monte Carlo over disorder realizations.

Realization ``r`` draws its potential with seed ``base_seed ^ r``, so any
subset of an ensemble can be regenerated on its own. Records are produced in
realization order whatever the worker count, and every aggregate is a fold
over that ordered list, so statistics are bitwise reproducible.
"""

from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Iterator

import numpy as np
import scipy.stats

from .entropy import BoundaryTerms, boundary_terms_1d, entropy_report
from .errors import ConfigError, InsufficientDataError, NumericalDefectError, SpectralError
from .lattice import Boundary, LatticeSpec, PotentialKind, PotentialModel, assemble, sample_potential
from .spectral import (
    DENSE_SITE_LIMIT,
    eigendecompose,
    fermi_projector,
    integrated_dos,
    thermal_correlation,
    windowed_correlation,
)

__all__ = [
    "EnsembleConfig",
    "EnsembleRecord",
    "EnsembleStats",
    "EnsembleResult",
    "PiEstimate",
    "LocalizationFit",
    "CBounds",
    "Density",
    "BOUNDARY_KEYS",
    "realization_seed",
    "realize",
    "iter_records",
    "run_ensemble",
    "aggregate",
    "estimate_pi",
    "fit_localization",
    "compute_c_bounds",
    "histogram",
    "default_workers",
]

logger = logging.getLogger(__name__)

WORKERS_ENV = "ANDERSON_ENTROPY_WORKERS"
MAX_EXCLUDED_FRACTION = 0.01
MIN_CUTOFF = 32
BOUNDARY_KEYS = tuple(BoundaryTerms.__dataclass_fields__)
ENTROPY_KEYS = ("S", "L", "U", "U_tight", "U_peierls")


def default_workers() -> int:
    env = os.environ.get(WORKERS_ENV)
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


@dataclass(frozen=True)
class EnsembleConfig:
    """Definition of a disorder-ensemble experiment.

    ``cutoff`` is ``"full"`` (no truncation of the edge sums), ``"auto"``
    (``max(8 / gamma, 32)`` from a pilot fit of the decay of ``<|P_jk|>``), or
    an integer number of sites. ``windowed`` is ``"auto"`` (engaged above
    ``DENSE_SITE_LIMIT`` sites), ``True`` or ``False``.
    """

    d: int = 1
    L: int = 3001
    a: float = 0.1
    potential: str = "uniform"
    W: float = 1.0
    mu: float = -0.25
    T: float = 0.0
    boundary: str = "open"
    sizes: tuple[int, ...] = (151, 301, 601)
    realizations: int = 100
    base_seed: int = 0
    cutoff: str | int = "full"
    windowed: str | bool = "auto"
    renyi_alphas: tuple[float, ...] = (0.5, 2.0)
    pi_max_displacement: int | None = None
    pi_radius: int | None = None
    remainder_sizes: tuple[int, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "sizes", tuple(int(s) for s in self.sizes))
        object.__setattr__(self, "remainder_sizes", tuple(int(s) for s in self.remainder_sizes))
        object.__setattr__(self, "renyi_alphas", tuple(float(a) for a in self.renyi_alphas))
        if self.realizations < 1:
            raise ConfigError("realizations must be >= 1")
        if not self.sizes:
            raise ConfigError("at least one subsystem size is required")
        spec = self.lattice()
        for l in self.sizes + self.remainder_sizes:
            spec.with_l(l)
        if self.T < 0:
            raise ConfigError("temperature must be nonnegative")
        if self.remainder_sizes and (self.d != 1 or self.T != 0):
            raise ConfigError("remainder terms are defined for 1d projectors only")
        if not (self.cutoff in ("full", "auto") or (isinstance(self.cutoff, int) and self.cutoff > 0)):
            raise ConfigError(f"cutoff must be 'full', 'auto' or a positive integer, got {self.cutoff!r}")
        if self.windowed not in ("auto", True, False):
            raise ConfigError(f"windowed must be 'auto', true or false, got {self.windowed!r}")
        if self.use_window and self.d != 1:
            raise ConfigError(
                f"{spec.n_sites} sites exceed the dense limit and windowed mode is 1d only"
            )
        PotentialModel(PotentialKind(self.potential), self.W, 0)

    def lattice(self, l: int | None = None) -> LatticeSpec:
        return LatticeSpec(self.d, self.L, l or max(self.sizes), Boundary(self.boundary))

    def potential_model(self, seed: int) -> PotentialModel:
        return PotentialModel(PotentialKind(self.potential), self.W, seed)

    @property
    def use_window(self) -> bool:
        if self.windowed == "auto":
            return self.L**self.d > DENSE_SITE_LIMIT
        return bool(self.windowed)

    @property
    def max_displacement(self) -> int:
        if self.pi_max_displacement is not None:
            return self.pi_max_displacement
        return min(60 if self.d == 1 else 6, (self.L - 1) // 2)

    @property
    def with_boundary_terms(self) -> bool:
        return self.d == 1 and self.T == 0

    def to_dict(self) -> dict:
        out = asdict(self)
        for k in ("sizes", "renyi_alphas", "remainder_sizes"):
            out[k] = list(out[k])
        return out


def realization_seed(base_seed: int, index: int) -> int:
    return int(base_seed) ^ int(index)


@dataclass(frozen=True, eq=False)
class EnsembleRecord:
    """Everything measured on one disorder realization.

    ``values[l]`` maps quantity names (``S``, ``L``, ``U``, ``U_tight``,
    ``U_peierls``, ``renyi_<alpha>`` and, for 1d projectors, the boundary
    terms) to floats. ``pi_sq``/``pi_abs`` are site averages of
    ``|P_{j,j+delta}|^2`` and ``|P_{j,j+delta}|`` over ``displacements``.
    """

    index: int
    seed: int
    filling: float
    values: dict
    displacements: np.ndarray
    pi_sq: np.ndarray
    pi_abs: np.ndarray
    diag_mean: float
    remainders: dict = field(default_factory=dict)


def _displacement_grid(d: int, D: int) -> np.ndarray:
    axes = [np.arange(-D, D + 1)] * d
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)


def _window_sites(cfg: EnsembleConfig, cutoff: int) -> np.ndarray:
    c = (cfg.L - 1) // 2
    half = (max(cfg.sizes + cfg.remainder_sizes) - 1) // 2 + cutoff
    half = max(half, cfg.max_displacement + (cfg.pi_radius or 0))
    return np.arange(max(0, c - half), min(cfg.L, c + half + 1))


def _pi_samples(cfg: EnsembleConfig, spec: LatticeSpec, P) -> tuple:
    D = cfg.max_displacement
    disp = _displacement_grid(cfg.d, D)
    coords_in_window = spec.coordinates()[P.sites]
    reach = int(np.min(np.minimum(-coords_in_window.min(axis=0), coords_in_window.max(axis=0))))
    # stay clear of open edges by default
    R = min(reach - D, reach // 2)
    if cfg.pi_radius is not None:
        R = min(R, cfg.pi_radius)
    if R < 0:
        raise ConfigError("lattice too small for the requested displacement range")
    centre = _displacement_grid(cfg.d, R)
    j_local = P.local_index(spec.flat_index(centre))
    pi_sq = np.empty(len(disp))
    pi_abs = np.empty(len(disp))
    for i, delta in enumerate(disp):
        k_local = P.local_index(spec.flat_index(centre + delta))
        vals = P.entries[j_local, k_local]
        pi_sq[i] = np.mean(vals * vals)
        pi_abs[i] = np.mean(np.abs(vals))
    diag_mean = float(np.mean(P.entries[j_local, j_local]))
    return disp, pi_sq, pi_abs, diag_mean


def realize(cfg: EnsembleConfig, index: int, cutoff: int | None = None) -> EnsembleRecord:
    """Run realization ``index`` of ``cfg``.

    ``cutoff`` is the resolved truncation (``None`` = untruncated edge sums).
    """
    seed = realization_seed(cfg.base_seed, index)
    spec = cfg.lattice()
    V = sample_potential(cfg.potential_model(seed), spec.n_sites)
    model = assemble(spec, cfg.a, V)
    if cfg.use_window:
        if cutoff is None:
            raise ConfigError("windowed mode needs a finite cutoff")
        P = windowed_correlation(model, cfg.mu, _window_sites(cfg, cutoff), cfg.T)
        filling = float("nan")
    else:
        s = eigendecompose(model)
        filling = integrated_dos(s, cfg.mu)
        P = fermi_projector(s, cfg.mu) if cfg.T == 0 else thermal_correlation(s, cfg.mu, cfg.T)

    values = {}
    for l in cfg.sizes:
        rep = entropy_report(P, spec.subsystem_sites(l), cfg.renyi_alphas)
        rep.check_sandwich()
        row = {k: getattr(rep, k) for k in ENTROPY_KEYS}
        row.update({f"renyi_{a:g}": v for a, v in rep.renyi.items()})
        if cfg.with_boundary_terms:
            row.update(boundary_terms_1d(P, (l - 1) // 2, cutoff).as_dict())
        values[l] = row
    remainders = {}
    for l in cfg.remainder_sizes:
        bt = boundary_terms_1d(P, (l - 1) // 2, cutoff)
        remainders[l] = (bt.R_plus, bt.R_minus)
    disp, pi_sq, pi_abs, diag_mean = _pi_samples(cfg, spec, P)
    return EnsembleRecord(index, seed, filling, values, disp, pi_sq, pi_abs, diag_mean, remainders)


def _realize_safe(args):
    cfg, index, cutoff = args
    try:
        return realize(cfg, index, cutoff), None
    except SpectralError as exc:
        return None, f"realization {index} (seed {realization_seed(cfg.base_seed, index)}): {exc}"


def resolve_cutoff(cfg: EnsembleConfig) -> tuple[int | None, dict | None]:
    """Turn the cutoff policy into a number of sites (``None`` = untruncated).

    ``"auto"`` and windowed runs use a pilot realization on a chain of at most
    3001 sites: the fitted decay rate of ``<|P_jk|>`` sets the cutoff, and the
    truncated edge sums are compared against untruncated ones. The comparison
    is returned for the stats document.
    """
    if cfg.cutoff == "full" and not cfg.use_window:
        return None, None
    if isinstance(cfg.cutoff, int) and not cfg.use_window:
        return cfg.cutoff, None
    if cfg.d != 1:
        raise ConfigError("cutoff estimation is implemented for 1d chains")
    L_pilot = min(cfg.L, 3001)
    sizes = tuple(l for l in cfg.sizes if l <= L_pilot - 2 * cfg.max_displacement) or (
        min(L_pilot // 4 * 2 + 1, 301),
    )
    pilot = replace(
        cfg, L=L_pilot, sizes=sizes, remainder_sizes=(), windowed=False, cutoff="full",
        realizations=1, pi_radius=None,
    )
    record = realize(pilot, 0, None)
    abs_pi = _fold_displacements(record.displacements, record.pi_abs[None, :])[1][0]
    t = np.arange(len(abs_pi))
    sel = (t >= 1) & (abs_pi > 0)
    fit = fit_localization(t[sel], abs_pi[sel])
    if isinstance(cfg.cutoff, int):
        cutoff = cfg.cutoff
    elif fit.gamma > 0:
        cutoff = max(math.ceil(8.0 / fit.gamma), MIN_CUTOFF)
    else:
        raise NumericalDefectError(f"no decay found in pilot run (gamma={fit.gamma:.3g})")
    truncated = realize(pilot, 0, cutoff)
    report = {"L_pilot": L_pilot, "gamma": fit.gamma, "cutoff": cutoff, "max_rel_diff": {}}
    for l in sizes:
        full_row, cut_row = record.values[l], truncated.values[l]
        for key in ("Lcal_plus", "Lcal_minus", "Ucal_plus", "Ucal_minus"):
            denom = max(abs(full_row[key]), 1e-300)
            diff = abs(full_row[key] - cut_row[key]) / denom
            report["max_rel_diff"][key] = max(report["max_rel_diff"].get(key, 0.0), diff)
    tail = fit.C * math.exp(-fit.gamma * cutoff) / max(1e-300, -math.expm1(-fit.gamma))
    logger.info(
        "cutoff %d sites (gamma=%.3g); estimated |P| tail beyond cutoff %.2e", cutoff, fit.gamma, tail
    )
    report["tail_estimate"] = tail
    for l in cfg.sizes:
        if cutoff < l / 2:
            logger.warning("cutoff %d is below l/2 for l=%d; edge sums are truncated", cutoff, l)
    return cutoff, report


def iter_records(
    cfg: EnsembleConfig, workers: int = 1, cutoff: int | None = None, failures: list | None = None
) -> Iterator[EnsembleRecord]:
    """Yield records in realization order; failed realizations are logged and skipped."""
    jobs = [(cfg, r, cutoff) for r in range(cfg.realizations)]
    if workers <= 1:
        results = map(_realize_safe, jobs)
        pool = None
    else:
        pool = ProcessPoolExecutor(max_workers=workers)
        results = pool.map(_realize_safe, jobs, chunksize=max(1, len(jobs) // (8 * workers)))
    try:
        for record, err in results:
            if err is not None:
                logger.warning("excluded %s", err)
                if failures is not None:
                    failures.append(err)
                continue
            yield record
    finally:
        if pool is not None:
            pool.shutdown(cancel_futures=True)


@dataclass
class EnsembleResult:
    config: EnsembleConfig
    records: list
    stats: "EnsembleStats"
    failures: list
    cutoff: int | None


def run_ensemble(cfg: EnsembleConfig, workers: int = 1, on_record=None) -> EnsembleResult:
    """Run all realizations and aggregate them.

    Raises :class:`NumericalDefectError` on a bound violation or when more than
    1% of the realizations fail.
    """
    cutoff, validation = resolve_cutoff(cfg)
    failures: list = []
    records = []
    for rec in iter_records(cfg, workers, cutoff, failures):
        records.append(rec)
        if on_record is not None:
            on_record(rec)
    if len(failures) > MAX_EXCLUDED_FRACTION * cfg.realizations:
        raise NumericalDefectError(
            f"{len(failures)} of {cfg.realizations} realizations failed (limit 1%)"
        )
    stats = aggregate(cfg, records, excluded=len(failures))
    if validation is not None:
        stats.window_validation = validation
    return EnsembleResult(cfg, records, stats, failures, cutoff)


# -- statistics -----------------------------------------------------------------


def _moments(x: np.ndarray) -> dict:
    n = len(x)
    mean = float(np.mean(x))
    if n < 2:
        return {"mean": mean, "var": 0.0, "stderr": None, "n": n}
    var = float(np.var(x, ddof=1))
    return {"mean": mean, "var": var, "stderr": math.sqrt(var / n), "n": n}


@dataclass
class Density:
    """Histogram density: ``density[i]`` on ``[edges[i], edges[i+1])``."""

    edges: np.ndarray
    counts: np.ndarray
    density: np.ndarray

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.edges)

    @property
    def mass(self) -> float:
        return float(np.sum(self.density * self.widths))

    def quantile(self, q: float) -> float:
        """Quantile of the piecewise-uniform distribution."""
        cdf = np.concatenate([[0.0], np.cumsum(self.density * self.widths)])
        cdf /= cdf[-1]
        i = int(np.searchsorted(cdf, q, side="left"))
        i = min(max(i, 1), len(cdf) - 1)
        lo, hi = cdf[i - 1], cdf[i]
        frac = 0.0 if hi == lo else (q - lo) / (hi - lo)
        return float(self.edges[i - 1] + frac * (self.edges[i] - self.edges[i - 1]))

    @property
    def median(self) -> float:
        return self.quantile(0.5)

    def to_dict(self) -> dict:
        return {"edges": self.edges.tolist(), "counts": self.counts.tolist(),
                "density": self.density.tolist()}


def histogram(values, bins="fd", edges=None) -> Density:
    """Normalized histogram.

    ``bins="fd"`` (Freedman-Diaconis) is meant for 100 or more values;
    smaller samples fall back to Sturges' rule. Pass ``edges`` to reuse the
    binning of another histogram.
    """
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise InsufficientDataError("cannot histogram an empty sample")
    if edges is None:
        rule = bins if not (bins == "fd" and values.size < 100) else "sturges"
        edges = np.histogram_bin_edges(values, bins=rule)
    counts, edges = np.histogram(values, bins=np.asarray(edges, dtype=float))
    widths = np.diff(edges)
    density = counts / (counts.sum() * widths) if counts.sum() else np.zeros_like(widths)
    return Density(edges, counts, density)


def shared_histograms(*samples, bins="fd") -> list[Density]:
    """Histograms of several samples on one set of edges (from the pooled data)."""
    pooled = np.concatenate([np.asarray(s, dtype=float) for s in samples])
    rule = bins if not (bins == "fd" and pooled.size < 100) else "sturges"
    edges = np.histogram_bin_edges(pooled, bins=rule)
    return [histogram(s, edges=edges) for s in samples]


@dataclass
class PiEstimate:
    """Disorder averages of ``|P_{j,j+delta}|^2`` (``Pi``) and ``|P_{j,j+delta}|``.

    ``raw_*`` are indexed like ``displacements``; ``pi``, ``abs`` and their
    standard errors are symmetrized over sign flips and axis permutations and
    indexed by ``canonical`` (sorted absolute displacement tuples).
    """

    displacements: np.ndarray
    raw_mean: np.ndarray
    raw_stderr: np.ndarray
    canonical: list
    pi: np.ndarray
    pi_stderr: np.ndarray
    abs: np.ndarray
    abs_stderr: np.ndarray
    n_realizations: int

    def radial(self, which: str = "pi") -> tuple[np.ndarray, np.ndarray]:
        """Values along an axis, ``delta = (t, 0, ..., 0)`` for ``t = 0..D``."""
        vals, errs = (self.pi, self.pi_stderr) if which == "pi" else (self.abs, self.abs_stderr)
        out_v, out_e = [], []
        D = int(self.displacements.max())
        lookup = {c: i for i, c in enumerate(self.canonical)}
        d = self.displacements.shape[1]
        for t in range(D + 1):
            i = lookup[tuple(sorted((0,) * (d - 1) + (t,)))]
            out_v.append(vals[i])
            out_e.append(errs[i])
        return np.array(out_v), np.array(out_e)

    def marginal(self) -> np.ndarray:
        """``Pi^(1)_t``: Pi summed over the transverse coordinates, ``t = 0..D``."""
        D = int(self.displacements.max())
        col = np.abs(self.displacements[:, 0])
        out = np.zeros(D + 1)
        sym = self.pi_by_displacement()
        np.add.at(out, col, sym)
        # every |t| > 0 appears twice (+t and -t) along the first axis
        out[1:] /= 2.0
        return out

    def pi_by_displacement(self) -> np.ndarray:
        """Symmetrized Pi expanded back onto ``displacements``."""
        lookup = {c: i for i, c in enumerate(self.canonical)}
        keys = [tuple(sorted(np.abs(x).tolist())) for x in self.displacements]
        return self.pi[[lookup[k] for k in keys]]


def _fold_displacements(disp: np.ndarray, samples: np.ndarray):
    """Average per-realization samples (rows) over symmetry-equivalent displacements."""
    keys = [tuple(sorted(np.abs(x).tolist())) for x in disp]
    canonical = sorted(set(keys), key=lambda k: (sum(v * v for v in k), k))
    index = {k: i for i, k in enumerate(canonical)}
    col = np.array([index[k] for k in keys])
    folded = np.zeros((samples.shape[0], len(canonical)))
    np.add.at(folded.T, col, samples.T)
    folded /= np.bincount(col, minlength=len(canonical))
    return canonical, folded


def estimate_pi(records, min_realizations: int = 30) -> PiEstimate:
    """Estimate ``Pi_delta = <|P_{j,j+delta}|^2>`` with standard errors."""
    n = len(records)
    if n < min_realizations:
        raise InsufficientDataError(f"need >= {min_realizations} realizations, got {n}")
    disp = records[0].displacements
    sq = np.stack([r.pi_sq for r in records])
    ab = np.stack([r.pi_abs for r in records])

    def mean_err(x):
        m = x.mean(axis=0)
        e = x.std(axis=0, ddof=1) / math.sqrt(n) if n > 1 else np.full(x.shape[1], np.nan)
        return m, e

    raw_m, raw_e = mean_err(sq)
    canonical, f_sq = _fold_displacements(disp, sq)
    _, f_ab = _fold_displacements(disp, ab)
    pi_m, pi_e = mean_err(f_sq)
    ab_m, ab_e = mean_err(f_ab)
    return PiEstimate(disp, raw_m, raw_e, canonical, pi_m, pi_e, ab_m, ab_e, n)


@dataclass(frozen=True)
class LocalizationFit:
    """``value ~ C exp(-gamma |j|)`` from a least-squares fit of the log."""

    C: float
    gamma: float
    gamma_stderr: float
    gamma_ci95: tuple[float, float]
    log_C_stderr: float
    r_squared: float
    n_points: int

    @property
    def localized(self) -> bool:
        return self.gamma_ci95[0] > 0


def fit_localization(displacements, values, min_points: int = 5) -> LocalizationFit:
    """Fit ``log values = log C - gamma |j|``; nonpositive values are dropped."""
    x = np.abs(np.asarray(displacements, dtype=float))
    y = np.asarray(values, dtype=float)
    keep = y > 0
    x, y = x[keep], y[keep]
    if x.size < min_points:
        raise InsufficientDataError(f"need >= {min_points} positive points, got {x.size}")
    if np.ptp(x) == 0:
        raise InsufficientDataError("displacements must not all coincide")
    res = scipy.stats.linregress(x, np.log(y))
    gamma = -float(res.slope)
    dof = x.size - 2
    if dof > 0 and np.isfinite(res.stderr):
        half = float(scipy.stats.t.ppf(0.975, dof) * res.stderr)
        se, se_c = float(res.stderr), float(res.intercept_stderr)
    else:
        half, se, se_c = math.inf, math.inf, math.inf
    r2 = float(res.rvalue**2) if np.isfinite(res.rvalue) else 1.0
    return LocalizationFit(
        C=math.exp(res.intercept), gamma=gamma, gamma_stderr=se,
        gamma_ci95=(gamma - half, gamma + half), log_C_stderr=se_c, r_squared=r2,
        n_points=int(x.size),
    )


@dataclass(frozen=True)
class CBounds:
    c_minus: float
    c_plus: float
    tail_minus: float
    tail_plus: float
    consistent: bool


def compute_c_bounds(pi_marginal, d: int, fit_from: int = 1) -> CBounds:
    """Area-law constants from the axis marginal ``Pi^(1)_t`` (index ``t = 0..D``).

    ``c_minus = 8 d sum_{t>=1} t Pi_t`` and
    ``c_plus = 4 (2^d - 1) sum_{j>=0} (sum_{k>=1} Pi_{k+j})^(1/2)``, truncated
    at ``D``. The neglected tails are estimated from an exponential fit to the
    positive entries with ``t >= fit_from``; a nondecaying fit is rejected.
    """
    pi1 = np.asarray(pi_marginal, dtype=float)
    D = len(pi1) - 1
    t = np.arange(D + 1)
    tails = np.cumsum(pi1[::-1])[::-1]  # tails[s] = sum_{s <= t <= D} Pi_t

    tail_minus = tail_plus = 0.0
    sel = (t >= fit_from) & (pi1 > 0)
    if np.any(pi1[1:] > 0):
        try:
            fit = fit_localization(t[sel], pi1[sel])
        except InsufficientDataError:
            tail_minus = tail_plus = math.nan
        else:
            if not fit.gamma > 0:
                raise NumericalDefectError(f"Pi does not decay (gamma={fit.gamma:.3g})")
            q = math.exp(-fit.gamma)
            # sum_{t>D} t C q^t and sum_{j>=D} sqrt(C q^(j+1) / (1 - q))
            tail_minus = 8.0 * d * fit.C * q ** (D + 1) * ((D + 1) - D * q) / (1 - q) ** 2
            tail_plus = 4.0 * (2**d - 1) * math.sqrt(fit.C / (1 - q)) * q ** ((D + 1) / 2) / (
                1 - math.sqrt(q)
            )
            # the inner sums below D also miss sum_{t>D} C q^t
            tails = tails + fit.C * q ** (D + 1) / (1 - q)
    c_minus = 8.0 * d * float(np.sum(t[1:] * pi1[1:]))
    c_plus = 4.0 * (2**d - 1) * float(np.sum(np.sqrt(np.clip(tails[1:], 0.0, None))))
    consistent = c_minus <= c_plus
    if not consistent:
        logger.warning("c_minus=%.4g exceeds c_plus=%.4g", c_minus, c_plus)
    return CBounds(c_minus, c_plus, tail_minus, tail_plus, consistent)


@dataclass
class EnsembleStats:
    """Aggregates of an ensemble (see ``to_dict`` for the JSON layout)."""

    n_records: int
    excluded: int
    moments: dict
    histograms: dict
    pi: PiEstimate | None
    remainders: dict
    localization: LocalizationFit | None = None
    c_bounds: CBounds | None = None
    window_validation: dict | None = None
    filling: dict | None = None

    def to_dict(self) -> dict:
        out = {
            "n_records": self.n_records,
            "excluded": self.excluded,
            "moments": {str(l): v for l, v in self.moments.items()},
            "histograms": {
                str(l): {k: dens.to_dict() for k, dens in h.items()} for l, h in self.histograms.items()
            },
            "remainders": {str(l): v for l, v in self.remainders.items()},
            "filling": self.filling,
            "window_validation": self.window_validation,
            "pi": None,
            "localization": None if self.localization is None else asdict(self.localization),
            "c_bounds": None if self.c_bounds is None else asdict(self.c_bounds),
        }
        if self.pi is not None:
            p = self.pi
            out["pi"] = {
                "n_realizations": p.n_realizations,
                "displacements": [list(map(int, c)) for c in p.canonical],
                "pi": p.pi.tolist(),
                "pi_stderr": p.pi_stderr.tolist(),
                "abs": p.abs.tolist(),
                "abs_stderr": p.abs_stderr.tolist(),
            }
        return out


def aggregate(cfg: EnsembleConfig, records: list, excluded: int = 0) -> EnsembleStats:
    """Deterministic fold over records in realization order."""
    records = sorted(records, key=lambda r: r.index)
    if not records:
        raise InsufficientDataError("no records to aggregate")
    moments, hists = {}, {}
    for l in cfg.sizes:
        keys = records[0].values[l].keys()
        cols = {k: np.array([r.values[l][k] for r in records]) for k in keys}
        moments[l] = {k: _moments(v) for k, v in cols.items()}
        pL, pU = shared_histograms(cols["L"], cols["U_tight"])
        hists[l] = {"L": pL, "U_tight": pU}
    remainders = {}
    for l in cfg.remainder_sizes:
        rp = np.array([r.remainders[l][0] for r in records])
        rm = np.array([r.remainders[l][1] for r in records])
        remainders[l] = {"R_plus": _moments(rp), "R_minus": _moments(rm)}
    pi = estimate_pi(records, min_realizations=2) if len(records) >= 2 else None
    loc = cb = None
    if pi is not None and len(records) >= 30:
        vals, _ = pi.radial("abs")
        t = np.arange(len(vals))
        sel = (t >= min(5, len(vals) - 1)) & (t <= 50)
        try:
            loc = fit_localization(t[sel], vals[sel])
            if loc.gamma > 0:
                cb = compute_c_bounds(pi.marginal(), cfg.d)
        except (InsufficientDataError, NumericalDefectError) as exc:
            logger.info("no localization fit: %s", exc)
    fillings = np.array([r.filling for r in records])
    filling = _moments(fillings) if np.all(np.isfinite(fillings)) else None
    return EnsembleStats(len(records), excluded, moments, hists, pi, remainders, loc, cb,
                         filling=filling)
