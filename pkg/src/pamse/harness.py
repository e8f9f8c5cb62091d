"""Scenario runner: config parsing, experiment dispatch and report emission.

Configs are JSON with per-scenario schemas; thresholds live in the config so
acceptance runs are auditable. Every report embeds its full config and an
environment fingerprint, and re-running a report's config reproduces every
number (fixed seeds, index-ordered trial merges).
"""

from __future__ import annotations

import json
import os
import platform
import sys
from dataclasses import asdict, dataclass, field

import numpy as np

from . import montecarlo as mc
from . import variational as var
from .exact import OperatorSpec, exact_lambda_profile, exact_moment
from .irw import WeightFunction, compare_se_irw
from .lattice import Torus, green, srw_kernel

_SCHEMAS = {
    "comparison_suite": {
        "required": {"d": int, "L": int, "rhos": list, "t": float, "seed": int},
        "optional": {"weight_values": list, "box": list, "tolerance": float},
    },
    "exact_vs_mc": {
        "required": {"d": int, "L": int, "rho": float, "kappa": float, "p": int,
                     "t": float, "n": int, "seed": int},
        "optional": {"gamma": float, "n_sigma": float, "rel_tol": float,
                     "n_workers": int},
    },
    "kappa_sweep": {
        "required": {"d": int, "L": int, "rho": float, "p": int, "kappas": list,
                     "seed": int},
        "optional": {"gamma": float, "convexity_tol": float, "t_ref": float},
    },
    "intermittency_kappa0": {
        "required": {"d": int, "L": int, "rho": float, "p_list": list, "t": float,
                     "seed": int},
        "optional": {"gamma": float, "min_gap": float},
    },
    "recurrent_trend": {
        "required": {"d": int, "L": int, "rho": float, "kappa": float,
                     "t_grid": list, "n": int, "seed": int},
        "optional": {"gamma": float, "n_workers": int},
    },
    "asymptotic_probe": {
        "required": {"d": int, "kappa": float, "t": float, "n": int, "seed": int},
        "optional": {"shift": float, "rel_tol": float, "n_workers": int},
    },
    "field_checks": {
        "required": {"d": int, "T": float, "kappa": float, "n_eta": int, "seed": int},
        "optional": {"L": int, "rho": float, "norm_tol": float, "limit_kappa": float,
                     "limit_tol": float},
    },
}


@dataclass
class ScenarioConfig:
    scenario: str
    params: dict
    output_path: str | None = None

    @classmethod
    def from_file(cls, path: str) -> "ScenarioConfig":
        with open(path) as fh:
            raw = json.load(fh)
        return cls(scenario=raw.get("scenario", ""), params=raw.get("params", {}),
                   output_path=raw.get("output_path"))

    def to_dict(self) -> dict:
        return {"scenario": self.scenario, "params": self.params,
                "output_path": self.output_path}


class ConfigError(ValueError):
    pass


def validate_config(cfg: ScenarioConfig) -> None:
    if cfg.scenario not in _SCHEMAS:
        raise ConfigError(f"unknown scenario {cfg.scenario!r}; "
                          f"known: {sorted(_SCHEMAS)}")
    schema = _SCHEMAS[cfg.scenario]
    for key, typ in schema["required"].items():
        if key not in cfg.params:
            raise ConfigError(f"{cfg.scenario}: missing required key {key!r}")
        val = cfg.params[key]
        if typ is float and isinstance(val, int):
            continue
        if not isinstance(val, typ):
            raise ConfigError(f"{cfg.scenario}: key {key!r} must be {typ.__name__}")
    known = set(schema["required"]) | set(schema["optional"])
    for key in cfg.params:
        if key not in known:
            raise ConfigError(f"{cfg.scenario}: unknown key {key!r}")
    if "t_grid" in cfg.params and len(cfg.params["t_grid"]) == 0:
        raise ConfigError("empty t_grid")
    if "kappas" in cfg.params and len(cfg.params["kappas"]) == 0:
        raise ConfigError("empty kappa grid")


def _env_fingerprint() -> dict:
    return {
        "python": sys.version.split()[0],
        "numpy": np.__version__,
        "platform": platform.platform(),
    }


@dataclass
class Report:
    scenario: str
    config: dict
    rows: list
    flags: dict
    passed: bool
    env: dict = field(default_factory=_env_fingerprint)

    def to_json(self, path: str | None = None) -> str:
        text = json.dumps(asdict(self), indent=2, default=_jsonable)
        if path:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        return text

    @classmethod
    def from_json(cls, path: str) -> "Report":
        with open(path) as fh:
            raw = json.load(fh)
        return cls(scenario=raw["scenario"], config=raw["config"], rows=raw["rows"],
                   flags=raw["flags"], passed=raw["passed"], env=raw.get("env", {}))


def _jsonable(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    return repr(obj)


# ---------------------------------------------------------------------------
# Scenario implementations.
# ---------------------------------------------------------------------------


def _run_comparison_suite(p: dict) -> Report:
    torus = Torus(p["d"], p["L"])
    kernel = srw_kernel(p["d"])
    t = float(p["t"])
    tol = float(p.get("tolerance", 1e-10))
    box = p.get("box", [[0] * p["d"], [1] + [0] * (p["d"] - 1), [2] + [0] * (p["d"] - 1)])
    values = p.get("weight_values", [1.0, -1.0])
    weights = []
    for v in values:
        weights.append(("point", WeightFunction((((0,) * p["d"], (0.0, t), float(v)),))))
        weights.append(("box", WeightFunction(tuple(
            (tuple(s), (0.0, t), float(v) / len(box)) for s in box))))
    rows = []
    ok = True
    for rho in p["rhos"]:
        for tag, K in weights:
            rep = compare_se_irw(torus, kernel, float(rho), K, t, seed=p["seed"])
            rows.append({"rho": rho, "weight": tag,
                         "sign": K.sign, "se": rep.se_value, "irw": rep.irw_value,
                         "margin": rep.margin, "violation": rep.violation})
            ok = ok and rep.margin >= -tol
    return Report("comparison_suite", {}, rows,
                  {"all_margins_nonnegative": ok}, ok)


def _run_exact_vs_mc(p: dict) -> Report:
    params = mc.ModelParams(d=p["d"], L=p["L"], rho=p["rho"], kappa=p["kappa"],
                            p=p["p"], gamma=p.get("gamma", 1.0))
    spec = OperatorSpec(torus=params.torus, kernel=params.catalyst_kernel,
                        kappa=params.kappa, p=params.p, rho=params.rho,
                        gamma=params.gamma)
    t = float(p["t"])
    exact_val = exact_moment(spec, t)
    est = mc.estimate_moment(params, t, p["n"], p["seed"],
                             n_workers=p.get("n_workers", 1))
    n_sigma = float(p.get("n_sigma", 3.0))
    rel_tol = float(p.get("rel_tol", 0.02))
    within = est.within(exact_val, n_sigma)
    rel = abs(est.mean - exact_val) / exact_val
    ok = within and rel <= rel_tol
    rows = [{"t": t, "exact": exact_val, "mc": est.mean, "stderr": est.stderr,
             "n": est.n, "rel_gap": rel}]
    return Report("exact_vs_mc", {}, rows,
                  {"within_sigma": within, "rel_gap_ok": rel <= rel_tol}, ok)


def _run_kappa_sweep(p: dict) -> Report:
    torus = Torus(p["d"], p["L"])
    kernel = srw_kernel(p["d"])
    tol = float(p.get("convexity_tol", 1e-9))
    rows = []
    lams = []
    for kap in p["kappas"]:
        spec = OperatorSpec(torus=torus, kernel=kernel, kappa=float(kap),
                            p=p["p"], rho=p["rho"], gamma=p.get("gamma", 1.0))
        top = var.top_eigenvalue(spec)
        row = {"kappa": kap, "mu": top.mu, "lambda": top.lam,
               "residual": top.residual, "converged": top.converged}
        if p.get("t_ref"):
            row["Lambda_at_t_ref"] = float(
                exact_lambda_profile(spec, [float(p["t_ref"])])[0])
        rows.append(row)
        lams.append(top.lam)
    lams = np.asarray(lams)
    non_increasing = bool(np.all(np.diff(lams) <= tol))
    second = np.diff(lams, 2)
    convex = bool(np.all(second >= -tol)) if len(second) else True
    ok = non_increasing and convex and all(r["converged"] for r in rows)
    return Report("kappa_sweep", {}, rows,
                  {"non_increasing": non_increasing, "convex": convex}, ok)


def _run_intermittency_kappa0(p: dict) -> Report:
    torus = Torus(p["d"], p["L"])
    kernel = srw_kernel(p["d"])
    t = float(p["t"])
    min_gap = float(p.get("min_gap", 1e-6))
    rows = []
    lam_prev = None
    strict = True
    holder = True
    for order in p["p_list"]:
        spec = OperatorSpec(torus=torus, kernel=kernel, kappa=0.0, p=int(order),
                            rho=p["rho"], gamma=p.get("gamma", 1.0))
        lam = float(exact_lambda_profile(spec, [t])[0])
        rows.append({"p": order, "Lambda": lam, "t": t})
        if lam_prev is not None:
            strict = strict and (lam - lam_prev > min_gap)
            holder = holder and (lam >= lam_prev - 1e-12)
        lam_prev = lam
    return Report("intermittency_kappa0", {}, rows,
                  {"strictly_increasing": strict, "holder_monotone": holder},
                  strict and holder)


def _run_recurrent_trend(p: dict) -> Report:
    params = mc.ModelParams(d=p["d"], L=p["L"], rho=p["rho"], kappa=p["kappa"],
                            p=1, gamma=p.get("gamma", 1.0))
    run = mc.lambda_curve(params, p["t_grid"], p["n"], p["seed"],
                          n_workers=p.get("n_workers", 1))
    rows = [{"t": float(t), "Lambda": float(l), "stderr": float(e)}
            for t, l, e in zip(run.t_grid, run.lambdas, run.lambda_err)]
    diffs = np.diff(run.lambdas)
    ci = 4.0 * np.sqrt(run.lambda_err[1:] ** 2 + run.lambda_err[:-1] ** 2)
    trend = bool(np.all(diffs >= -ci))
    bounds = run.bounds_ok()
    rows.append({"plateau": run.plateau, "plateau_err": run.plateau_err,
                 "fit_window": list(run.fit_window)})
    return Report("recurrent_trend", {}, rows,
                  {"non_decreasing_within_ci": trend, "bounds_ok": bounds},
                  trend and bounds)


def _run_asymptotic_probe(p: dict) -> Report:
    est, ref = mc.asymptotic_probe(p["d"], p["kappa"], p["t"], p["n"], p["seed"],
                                   shift=p.get("shift", 0.0),
                                   n_workers=p.get("n_workers", 1))
    rel_tol = float(p.get("rel_tol", 0.05))
    rel = abs(est.mean - ref) / ref
    ok = rel <= rel_tol
    rows = [{"mc_mean": est.mean, "stderr": est.stderr, "reference": ref,
             "rel_gap": rel, "n": est.n}]
    return Report("asymptotic_probe", {}, rows, {"within_rel_tol": ok}, ok)


def _run_field_checks(p: dict) -> Report:
    from .fields import PsiSpec, k_kernels, psi_bounds_check, recommended_side

    d = p["d"]
    T = float(p["T"])
    kappa = float(p["kappa"])
    L = p.get("L") or recommended_side(d, T, kappa)
    trs = Torus(d, L)
    spec = PsiSpec(kappa=kappa, T=T, torus=trs, rho=p.get("rho", 0.5))
    rep = psi_bounds_check(spec, p["n_eta"], p["seed"])
    kk = k_kernels(spec)
    norm_tol = float(p.get("norm_tol", 1e-6))
    off_ok = kk.k_off_norm_bound <= 8 * d * T**2 + 1e-9
    closed_ok = abs(kk.k_diag_norm - kk.closed_form_norm) <= norm_tol
    limit_kappa = float(p.get("limit_kappa", 1e3))
    spec_hi = PsiSpec(kappa=limit_kappa, T=T, torus=trs, rho=p.get("rho", 0.5))
    kk_hi = k_kernels(spec_hi)
    limit_tol = float(p.get("limit_tol", 1e-3))
    limit_ok = abs(kk_hi.k_diag_norm - kk_hi.kappa_limit_norm) <= limit_tol
    rows = [{
        "L": L, "psi_max_site_diff": rep.max_site_diff,
        "psi_max_swap_diff": rep.max_swap_diff,
        "psi_swap_square_sum": rep.max_swap_square_sum,
        "quad_nodes": rep.quad_nodes,
        "k_diag_norm": kk.k_diag_norm, "k_diag_closed_form": kk.closed_form_norm,
        "k_off_norm_bound": kk.k_off_norm_bound, "k_off_limit": 8 * d * T**2,
        "k_diag_norm_at_high_kappa": kk_hi.k_diag_norm,
        "kappa_limit_value": kk_hi.kappa_limit_norm,
    }]
    flags = {"psi_bounds": rep.passed, "k_off_bound": off_ok,
             "k_diag_closed_form": closed_ok, "k_diag_kappa_limit": limit_ok}
    return Report("field_checks", {}, rows, flags, all(flags.values()))


_RUNNERS = {
    "comparison_suite": _run_comparison_suite,
    "exact_vs_mc": _run_exact_vs_mc,
    "kappa_sweep": _run_kappa_sweep,
    "intermittency_kappa0": _run_intermittency_kappa0,
    "recurrent_trend": _run_recurrent_trend,
    "asymptotic_probe": _run_asymptotic_probe,
    "field_checks": _run_field_checks,
}


def run_scenario(cfg: ScenarioConfig) -> Report:
    validate_config(cfg)
    report = _RUNNERS[cfg.scenario](cfg.params)
    report.config = cfg.to_dict()
    if cfg.output_path:
        os.makedirs(os.path.dirname(cfg.output_path) or ".", exist_ok=True)
        report.to_json(cfg.output_path)
    return report


# ---------------------------------------------------------------------------
# Figure data emission.
# ---------------------------------------------------------------------------


def emit_figures_data(report: Report, outdir: str) -> list:
    """One columnar file per curve: (kappa, lambda_p, ci) plus the dashed
    large-kappa asymptote rho + rho (1 - rho) G_d / (2 d kappa)."""
    os.makedirs(outdir, exist_ok=True)
    written = []
    if report.scenario == "kappa_sweep":
        params = report.config.get("params", {})
        d = int(params.get("d", 1))
        rho = float(params.get("rho", 0.5))
        pth = os.path.join(outdir, f"lambda_vs_kappa_p{params.get('p', 1)}.dat")
        rows = [r for r in report.rows if "kappa" in r]
        asym = _asymptote_column(d, rho, [r["kappa"] for r in rows])
        with open(pth, "w") as fh:
            fh.write("# kappa lambda_p ci asymptote\n")
            for r, a in zip(rows, asym):
                ci = 100.0 * r.get("residual", 0.0)
                fh.write(f"{r['kappa']!r} {r['lambda']!r} {ci!r} {a!r}\n")
        written.append(pth)
    elif report.scenario == "recurrent_trend":
        pth = os.path.join(outdir, "lambda_vs_t.dat")
        with open(pth, "w") as fh:
            fh.write("# t Lambda ci\n")
            for r in report.rows:
                if "t" in r:
                    fh.write(f"{r['t']!r} {r['Lambda']!r} {4.0 * r['stderr']!r}\n")
        written.append(pth)
    else:
        pth = os.path.join(outdir, f"{report.scenario}.dat")
        keys = sorted({k for r in report.rows for k in r
                       if isinstance(r.get(k), (int, float))})
        with open(pth, "w") as fh:
            fh.write("# " + " ".join(keys) + "\n")
            for r in report.rows:
                fh.write(" ".join(repr(float(r[k])) if k in r else "nan"
                                  for k in keys) + "\n")
        written.append(pth)
    return written


def _asymptote_column(d: int, rho: float, kappas) -> list:
    if d < 3:
        return [float("nan")] * len(kappas)
    gd = green(srw_kernel(d))
    return [rho + rho * (1 - rho) * gd / (2 * d * k) if k > 0 else float("nan")
            for k in kappas]


def parse_figure_file(path: str):
    """Round-trip reader for emitted figure files: (header_keys, rows)."""
    with open(path) as fh:
        header = fh.readline().lstrip("# ").split()
        rows = [[float(v) for v in line.split()] for line in fh if line.strip()]
    return header, rows
