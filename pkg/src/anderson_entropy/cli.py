"""Command-line interface: ``anderson-entropy {single,ensemble,analyze,ti}``.

Exit codes: 0 success, 2 configuration error, 3 numerical defect (bound
violation, broken projector, too many failed realizations), 4 I/O error.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import time
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__
from . import analysis as an
from .config import RunConfig, dump_config, load_config, parse_config
from .ensemble import WORKERS_ENV, default_workers, fit_localization, run_ensemble, shared_histograms
from .entropy import (
    boundary_terms_1d,
    entropy_report,
    fermi_momentum,
    lower_bound,
    restrict,
    entanglement_entropy,
    tightened_upper,
    ti_projector,
    upper_bound,
)
from .errors import ConfigError, InsufficientDataError, NumericalDefectError
from .io import (
    read_records_csv,
    read_stats_json,
    to_jsonable,
    write_histogram_csv,
    write_records_csv,
    write_records_json,
    write_stats_json,
)
from .lattice import assemble, sample_potential
from .spectral import eigendecompose, fermi_projector, integrated_dos, thermal_correlation
from .svg import density_overlay, scaling_plot

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_IO = 0, 2, 3, 4
ANALYSES = ("overlap", "saturation", "convolution", "scaling", "thermal", "localization")

logger = logging.getLogger("anderson_entropy")


class RunDir:
    """Output directory that keeps a manifest of everything written to it."""

    def __init__(self, path, command: str, cfg: RunConfig | None, manifest: str = "manifest.json"):
        self.path = Path(path)
        self.manifest = manifest
        self.command = command
        self.cfg = cfg
        self.outputs: list[str] = []
        self.status = "running"

    def __enter__(self):
        self.path.mkdir(parents=True, exist_ok=True)
        if self.cfg is not None:
            self.write_text("config.resolved.toml", dump_config(self.cfg))
        return self

    def file(self, name: str) -> Path:
        self.outputs.append(name)
        return self.path / name

    def write_text(self, name: str, text: str) -> Path:
        p = self.file(name)
        p.write_text(text)
        return p

    def write_json(self, name: str, obj) -> Path:
        return self.write_text(name, json.dumps(to_jsonable(obj), indent=1, sort_keys=True) + "\n")

    def __exit__(self, exc_type, exc, tb):
        self.status = "ok" if exc_type is None else f"failed: {exc_type.__name__}: {exc}"
        manifest = {
            "version": __version__,
            "command": self.command,
            "status": self.status,
            "outputs": self.outputs,
            "created": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
        }
        if self.cfg is not None:
            manifest["seed_schedule"] = "realization r uses seed base_seed XOR r"
            manifest["base_seed"] = self.cfg["ensemble"]["base_seed"]
        try:
            (self.path / self.manifest).write_text(json.dumps(manifest, indent=1) + "\n")
        except OSError:
            if exc_type is None:
                raise
        return False


# -- single ---------------------------------------------------------------------


def single_report(cfg: RunConfig, seed: int) -> dict:
    """Entropies and bounds of one realization for every configured size."""
    ec = cfg.ensemble_config()
    spec = ec.lattice()
    V = sample_potential(ec.potential_model(seed), spec.n_sites)
    s = eigendecompose(assemble(spec, ec.a, V))
    P = fermi_projector(s, ec.mu) if ec.T == 0 else thermal_correlation(s, ec.mu, ec.T)
    out = {"seed": seed, "filling": integrated_dos(s, ec.mu), "sizes": {}}
    for l in ec.sizes:
        rep = entropy_report(P, spec.subsystem_sites(l), ec.renyi_alphas)
        rep.check_sandwich()
        entry = {k: v for k, v in asdict(rep).items() if k != "renyi"}
        entry["renyi"] = {f"{a:g}": v for a, v in rep.renyi.items()}
        if ec.with_boundary_terms:
            cutoff = ec.cutoff if isinstance(ec.cutoff, int) else None
            entry["boundary_terms"] = boundary_terms_1d(P, (l - 1) // 2, cutoff).as_dict()
        out["sizes"][str(l)] = entry
    return out


def cmd_single(cfg: RunConfig, out: Path, seed: int, fmt: str) -> dict:
    report = single_report(cfg, seed)
    with RunDir(out, "single", cfg) as rd:
        rd.write_json("single.json", report)
        if fmt == "csv":
            lines = ["l,S,L,U,U_tight,U_peierls"]
            for l, e in report["sizes"].items():
                lines.append(",".join([l] + [repr(e[k]) for k in ("S", "L", "U", "U_tight", "U_peierls")]))
            rd.write_text("single.csv", "\n".join(lines) + "\n")
    for l, e in report["sizes"].items():
        print(f"l={l}: S={e['S']:.10g} L={e['L']:.10g} U={e['U']:.10g} "
              f"U_tight={e['U_tight']:.10g} U_peierls={e['U_peierls']:.10g}")
    return report


# -- ensemble -------------------------------------------------------------------


def _scaling_rows(moments: dict, sizes) -> list[str]:
    rows = ["l,mean_S,stderr_S,mean_L,stderr_L,mean_U,stderr_U,mean_U_tight,stderr_U_tight"]
    for l in sizes:
        m = moments[l]
        cells = [str(l)]
        for q in ("S", "L", "U", "U_tight"):
            se = m[q]["stderr"]
            cells += [repr(m[q]["mean"]), repr(se) if se is not None else "nan"]
        rows.append(",".join(cells))
    return rows


def cmd_ensemble(cfg: RunConfig, out: Path, workers: int, fmt: str):
    ec = cfg.ensemble_config()
    with RunDir(out, "ensemble", cfg) as rd:
        result = run_ensemble(ec, workers=workers)
        if fmt == "json":
            write_records_json(rd.file("records.json"), result.records, ec.renyi_alphas)
        # CSV is always written: the analyze command reads it
        write_records_csv(rd.file("records.csv"), result.records, ec.renyi_alphas)
        stats = result.stats.to_dict()
        stats["resolved_cutoff"] = result.cutoff
        stats["failures"] = result.failures
        write_stats_json(rd.file("stats.json"), ec.to_dict(), stats)
        for l, h in result.stats.histograms.items():
            for q, dens in h.items():
                write_histogram_csv(rd.file(f"hist_{q}_l{l}.csv"), dens)
            rd.write_text(f"overlay_l{l}.svg", density_overlay(
                {"lower bound L": h["L"], "upper bound U_tight": h["U_tight"]},
                title=f"bound densities, l={l}", xlabel="bits"))
        rd.write_text("scaling.csv", "\n".join(_scaling_rows(result.stats.moments, ec.sizes)) + "\n")
    logger.info("%d records written to %s", len(result.records), out)
    return result


# -- analyze --------------------------------------------------------------------


def _group(records: dict, column: str) -> dict:
    out = {}
    for l in np.unique(records["l"]):
        mask = records["l"] == l
        order = np.argsort(records["realization"][mask], kind="stable")
        out[int(l)] = records[column][mask][order]
    return out


def _points(records: dict, column: str):
    pts = []
    for l, vals in sorted(_group(records, column).items()):
        se = float(np.std(vals, ddof=1) / math.sqrt(len(vals))) if len(vals) > 1 else None
        pts.append((l, float(np.mean(vals)), se))
    return pts


def analyze_run(run_dir, selection=ANALYSES, cfg: RunConfig | None = None) -> dict:
    """Run the selected analyses on an ensemble directory; returns the report."""
    run_dir = Path(run_dir)
    doc = read_stats_json(run_dir / "stats.json")
    records = read_records_csv(run_dir / "records.csv")
    rcfg = doc["config"]
    d = int(rcfg["d"])
    acfg = (cfg or parse_config({}))["analysis"]
    sizes = sorted(int(l) for l in np.unique(records["l"]))
    report: dict = {"run": str(run_dir), "figures": {}}

    def attempt(name, fn):
        try:
            report[name] = fn()
        except (InsufficientDataError, ValueError) as exc:
            report[name] = {"skipped": str(exc)}

    if "overlap" in selection:
        def overlap():
            res = {}
            L_by, U_by = _group(records, "L"), _group(records, "U_tight")
            for l in acfg["overlap_sizes"] or sizes:
                pL, pU = shared_histograms(L_by[l], U_by[l])
                rep = an.overlap_test(pL, pU, acfg["overlap_threshold"])
                res[str(l)] = asdict(rep)
                report["figures"][f"overlap_l{l}"] = density_overlay(
                    {"lower bound L": pL, "upper bound U_tight": pU},
                    title=f"bound densities, l={l}", xlabel="bits")
            return res
        attempt("overlap", overlap)

    if "saturation" in selection:
        def saturation():
            chosen = acfg["saturation_sizes"] or sizes
            by = _group(records, "L")
            return asdict(an.saturation_test({l: by[l] for l in chosen}, acfg["ks_alpha"]))
        attempt("saturation", saturation)

    if "convolution" in selection:
        def convolution():
            l = acfg["convolution_size"] if acfg["convolution_size"] > 0 else max(sizes)
            plus, minus, full = (_group(records, c)[l] for c in ("Lcal_plus", "Lcal_minus", "L"))
            if np.all(np.isnan(plus)):
                raise ValueError("records carry no boundary terms")
            rep = an.convolution_check(plus, minus, full, seed=acfg["convolution_seed"],
                                       alpha=acfg["ks_alpha"])
            return {"l": l, **asdict(rep)}
        attempt("convolution", convolution)

    if "scaling" in selection:
        def scaling():
            res = {}
            for q in ("S", "L", "U"):
                pts = _points(records, q)
                fits = {m: an.fit_scaling(pts, d, m) for m in an.MODELS}
                res[q] = {
                    "points": pts,
                    "fits": {m: asdict(f) for m, f in fits.items()},
                    "preferred_one_parameter": an.preferred_model(
                        [fits["area"], fits["area_log"], fits["bulk"]]),
                    "preferred_log_vs_area": an.preferred_model([fits["area"], fits["area_log"]]),
                }
                if q == "S":
                    l_, m_, e_ = zip(*pts)
                    report["figures"]["scaling_S"] = scaling_plot(
                        l_, m_, e_, {f"fit {k}": fits[k] for k in ("area", "area_log", "log")},
                        d=d, title="mean entanglement entropy")
            return res
        attempt("scaling", scaling)

    if "thermal" in selection and float(rcfg["T"]) > 0:
        def thermal():
            rep = an.thermal_volume_check(_points(records, "S"), d)
            return asdict(rep)
        attempt("thermal", thermal)

    if "localization" in selection:
        def localization():
            pi = doc["stats"].get("pi")
            if not pi:
                raise ValueError("no correlator statistics in stats.json")
            disp = [c for c in pi["displacements"] if all(v == 0 for v in c[:-1])]
            vals = {c[-1]: v for c, v in zip(pi["displacements"], pi["abs"]) if c in disp}
            t = np.array([x for x in sorted(vals) if 5 <= x <= 50])
            fit = fit_localization(t, np.array([vals[x] for x in t]))
            return {**asdict(fit), "localized": fit.localized}
        attempt("localization", localization)
    return report


def cmd_analyze(run_dir: Path, selection, out: Path | None, cfg: RunConfig | None) -> dict:
    report = analyze_run(run_dir, selection, cfg)
    figures = report.pop("figures")
    with RunDir(out or run_dir, "analyze", None, "analysis_manifest.json") as rd:
        rd.write_json("analysis.json", report)
        for name, svg in figures.items():
            rd.write_text(f"{name}.svg", svg)
    for key in ("overlap", "saturation", "convolution", "thermal", "localization"):
        if key in report:
            print(f"{key}: {json.dumps(to_jsonable(report[key]))[:300]}")
    return report


# -- translation-invariant reference --------------------------------------------


def ti_sweep(kappa: float, sizes) -> list[dict]:
    rows = []
    for l in sizes:
        P = ti_projector(kappa, l)
        sc = restrict(P, np.arange(l))
        rows.append({
            "l": int(l),
            "S": entanglement_entropy(sc),
            "L": lower_bound(P, np.arange(l), cross_check=False),
            "U": upper_bound(sc),
            "U_tight": tightened_upper(sc),
        })
    return rows


def ti_fit(rows) -> dict:
    """Fit the lower bound to ``a + b ln l`` and compare with a constant."""
    pts = [(r["l"], r["L"], None) for r in rows]
    log_fit = an.fit_scaling(pts, 1, "log")
    const = an.fit_scaling(pts, 1, "area")
    return {
        "log_fit": asdict(log_fit),
        "constant_fit": asdict(const),
        "slope_natural_log": log_fit.params["b"],
        "slope_log2": log_fit.params["b"] * math.log(2.0),
        "reference_4_over_pi2": 4.0 / math.pi**2,
        "preferred": an.preferred_model([log_fit, const]),
    }


def cmd_ti(cfg: RunConfig, out: Path) -> dict:
    kappa = cfg["ti"]["kappa"]
    if kappa <= 0:
        kappa = fermi_momentum(cfg["model"]["mu"], cfg["model"]["a"])
    rows = ti_sweep(kappa, cfg["ti"]["sizes"])
    fit = ti_fit(rows)
    with RunDir(out, "ti", cfg) as rd:
        lines = ["l,S,L,U,U_tight"] + [
            ",".join([str(r["l"])] + [repr(r[k]) for k in ("S", "L", "U", "U_tight")]) for r in rows
        ]
        rd.write_text("ti.csv", "\n".join(lines) + "\n")
        rd.write_json("ti_fit.json", {"kappa": kappa, **fit})
        lf = an.fit_scaling([(r["l"], r["L"], None) for r in rows], 1, "log")
        rd.write_text("ti_scaling.svg", scaling_plot(
            [r["l"] for r in rows], [r["L"] for r in rows], None, {"a + b ln l": lf},
            title=f"clean chain lower bound, kappa={kappa:.4g}", ylabel="L (bits)"))
    print(f"kappa={kappa:.6g} slope(ln l)={fit['slope_natural_log']:.6g} "
          f"reference 4/pi^2={fit['reference_4_over_pi2']:.6g} preferred={fit['preferred']}")
    return fit


# -- entry point ----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="anderson-entropy",
        description="Entanglement entropy and its bounds for disordered free fermions.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", type=Path, help="TOML configuration file")
        p.add_argument("--out", type=Path, help="output directory (overrides [run] out)")
        p.add_argument("-v", "--verbose", action="count", default=0)
        return p

    p = common(sub.add_parser("single", help="one disorder realization"))
    p.add_argument("--seed", type=int, help="potential seed (overrides [single] seed)")
    p.add_argument("--format", choices=("csv", "json"))

    p = common(sub.add_parser("ensemble", help="disorder ensemble"))
    p.add_argument("--workers", type=int,
                   help=f"worker processes (default: ${WORKERS_ENV} or all cores)")
    p.add_argument("--format", choices=("csv", "json"))

    p = common(sub.add_parser("analyze", help="post-process an ensemble directory"))
    p.add_argument("run_dir", type=Path)
    p.add_argument("--only", default=",".join(ANALYSES),
                   help=f"comma-separated subset of {','.join(ANALYSES)}")

    common(sub.add_parser("ti", help="clean-chain (sine kernel) reference sweep"))
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * args.verbose
    logging.basicConfig(level=max(level, logging.DEBUG), format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config) if args.config else parse_config({})
        out = args.out or Path(cfg["run"]["out"])
        fmt = getattr(args, "format", None) or cfg["run"]["format"]
        if args.command == "single":
            seed = args.seed if args.seed is not None else cfg["single"]["seed"]
            cmd_single(cfg, out, seed, fmt)
        elif args.command == "ensemble":
            workers = args.workers or cfg["run"]["workers"] or default_workers()
            cmd_ensemble(cfg, out, workers, fmt)
        elif args.command == "analyze":
            selection = tuple(s.strip() for s in args.only.split(",") if s.strip())
            bad = set(selection) - set(ANALYSES)
            if bad:
                raise ConfigError(f"unknown analyses: {', '.join(sorted(bad))}")
            cmd_analyze(args.run_dir, selection, args.out, cfg if args.config else None)
        elif args.command == "ti":
            cmd_ti(cfg, out)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalDefectError as exc:
        print(f"numerical defect: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
