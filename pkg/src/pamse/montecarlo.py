"""Feynman-Kac Monte Carlo for moments and Lyapunov exponents, plus walk
statistics and the large-diffusion Gaussian-regime probe.

Every trial draws its own generator from (base_seed, trial_index), so results
are bitwise reproducible and independent of worker count or execution order;
parallel runs merge trial arrays by index.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .exclusion import build_schedule
from .lattice import Kernel, Torus, heat1d, srw_kernel, green


@dataclass
class McEstimate:
    mean: float
    stderr: float
    n: int
    seed: object
    log_mean: float | None = None
    log_stderr: float | None = None
    seconds: float = 0.0

    def within(self, value: float, n_sigma: float) -> bool:
        return abs(self.mean - value) <= n_sigma * self.stderr

    def to_record(self, **params) -> dict:
        rec = dict(params)
        rec.update(mean=self.mean, stderr=self.stderr, n=self.n,
                   seed=list(flat_seed(self.seed)), seconds=self.seconds)
        if self.log_mean is not None:
            rec.update(log_mean=self.log_mean, log_stderr=self.log_stderr)
        return rec


def write_records(path: str, records) -> None:
    """Append line-delimited JSON records (one estimate per line)."""
    import json

    with open(path, "a") as fh:
        for rec in records:
            fh.write(json.dumps(rec, default=float) + "\n")


@dataclass(frozen=True)
class ModelParams:
    """Catalyst/reactant model on a finite torus."""

    d: int
    L: int
    rho: float
    kappa: float
    p: int = 1
    gamma: float = 1.0

    @property
    def torus(self) -> Torus:
        return Torus(self.d, self.L)

    @property
    def catalyst_kernel(self) -> Kernel:
        return srw_kernel(self.d, rate=1.0)

    @property
    def walker_rate(self) -> float:
        return 2.0 * self.d * self.kappa


def flat_seed(seed) -> tuple:
    """Flatten arbitrarily nested seed material into a tuple of ints."""
    if isinstance(seed, (list, tuple)):
        out = []
        for s in seed:
            out.extend(flat_seed(s))
        return tuple(out)
    return (int(seed),)


def _run_trials(worker, n: int, n_workers: int, chunk: int = 256) -> np.ndarray:
    """Map worker(trial_range) -> array over trials, merged in index order."""
    if n_workers <= 1:
        return worker(range(n))
    ranges = [range(lo, min(lo + chunk, n)) for lo in range(0, n, chunk)]
    try:
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            parts = list(pool.map(worker, ranges))
    except (OSError, PermissionError):  # restricted environments: fall back
        return worker(range(n))
    return np.concatenate(parts)


def _logmeanexp(w: np.ndarray) -> float:
    m = float(np.max(w))
    return m + float(np.log(np.mean(np.exp(w - m))))


def effective_sample_size(w: np.ndarray) -> float:
    """(sum e^w)^2 / sum e^2w: collapses when a few trials dominate."""
    m = float(np.max(w))
    e = np.exp(w - m)
    return float(e.sum() ** 2 / np.sum(e**2))


def _jackknife_log_stderr(w: np.ndarray) -> float:
    """Stderr of log-mean-exp by leave-one-out jackknife."""
    n = len(w)
    m = float(np.max(w))
    e = np.exp(w - m)
    s = e.sum()
    loo = np.log((s - e) / (n - 1)) + m
    return float(np.sqrt((n - 1) * np.var(loo)))


@dataclass
class _MomentTrialSpec:
    params: ModelParams
    t: float
    seed: object
    initial_bits: np.ndarray | None = None
    walker_resamples: int = 1

    def __call__(self, trials) -> np.ndarray:
        return _moment_trials(self.params, self.t, self.seed, trials,
                              self.initial_bits, self.walker_resamples)


def _moment_trials(params: ModelParams, t: float, seed, trials,
                   initial_bits=None, walker_resamples: int = 1) -> np.ndarray:
    """Per-trial exponents int_0^t gamma sum_q xi_s(X_q(s)) ds."""
    torus = params.torus
    kernel = params.catalyst_kernel
    n_sites = torus.n_sites
    walker_rate = params.walker_rate
    d, p, gamma = params.d, params.p, params.gamma
    # neighbour table for walkers (the 2d unit moves)
    moves = []
    for j in range(d):
        for sign in (1, -1):
            vec = tuple(sign if i == j else 0 for i in range(d))
            moves.append(torus.shift_table(vec))
    moves = np.stack(moves)
    out = np.empty(len(trials))
    for k, trial in enumerate(trials):
        rng = np.random.default_rng(flat_seed(seed) + (trial,))
        if initial_bits is None:
            bits0 = (rng.random(n_sites) < params.rho).astype(np.uint8)
        else:
            bits0 = np.array(initial_bits, dtype=np.uint8)
        sched = build_schedule(torus, kernel, t, rng)
        accs = np.empty(walker_resamples)
        for rep in range(walker_resamples):
            bits = bits0.copy()
            if walker_rate > 0:
                n_jumps = rng.poisson(walker_rate * t * p)
                jump_times = np.sort(rng.random(n_jumps) * t)
                jump_who = rng.integers(0, p, n_jumps)
                jump_dir = rng.integers(0, 2 * d, n_jumps)
            else:
                jump_times = np.empty(0)
                jump_who = jump_dir = np.empty(0, dtype=int)
            walkers = np.zeros(p, dtype=int)  # all start at the origin site
            acc = 0.0
            t_prev = 0.0
            ei = wi = 0
            ev_times = sched.times
            n_ev, n_w = len(ev_times), len(jump_times)
            while True:
                t_ev = ev_times[ei] if ei < n_ev else np.inf
                t_wk = jump_times[wi] if wi < n_w else np.inf
                t_next = min(t_ev, t_wk, t)
                acc += (t_next - t_prev) * float(bits[walkers].sum())
                if t_next >= t:
                    break
                if t_ev <= t_wk:
                    a, b = sched.bond_a[ei], sched.bond_b[ei]
                    bits[a], bits[b] = bits[b], bits[a]
                    ei += 1
                else:
                    q = jump_who[wi]
                    walkers[q] = moves[jump_dir[wi], walkers[q]]
                    wi += 1
                t_prev = t_next
            accs[rep] = gamma * acc
        m = accs.max()
        out[k] = m + np.log(np.mean(np.exp(accs - m)))  # log of walker-average
    return out


def estimate_moment(params: ModelParams, t: float, n: int, seed,
                    n_workers: int = 1, initial_bits=None,
                    walker_resamples: int = 1) -> McEstimate:
    """E_{nu_rho} E_{0..0} exp[int_0^t gamma sum_q xi_s(X_q(s)) ds] by direct
    Feynman-Kac sampling; the exponent is integrated exactly over the merged
    event times of the link schedule and the walker jumps.

    initial_bits pins the catalyst start instead of sampling it (diagnostics);
    walker_resamples > 1 reuses each catalyst trajectory for several
    independent walker draws (variance reduction; still unbiased, the trial
    weight being the walker-average of the exponential)."""
    if n < 2:
        raise ValueError("need at least two trials")
    import time as _time

    t0 = _time.time()
    w = _run_trials(_MomentTrialSpec(params, t, seed, initial_bits,
                                     walker_resamples), n, n_workers)
    vals = np.exp(w)
    ess = effective_sample_size(w)
    if ess < 0.01 * n:
        import warnings

        warnings.warn(
            f"exponential weights are heavy-tailed (effective sample size "
            f"{ess:.0f} of {n}); increase the trial count by ~{n / max(ess, 1):.0f}x "
            f"or shorten the horizon", RuntimeWarning, stacklevel=2)
    return McEstimate(
        mean=float(vals.mean()),
        stderr=float(vals.std(ddof=1) / np.sqrt(n)),
        n=n, seed=seed,
        log_mean=_logmeanexp(w),
        log_stderr=_jackknife_log_stderr(w),
        seconds=_time.time() - t0,
    )


@dataclass
class LyapunovRun:
    params: ModelParams
    t_grid: np.ndarray
    lambdas: np.ndarray
    lambda_err: np.ndarray
    plateau: float
    plateau_err: float
    fit_window: tuple
    scaled: bool = False
    estimates: list = field(default_factory=list)

    def bounds_ok(self) -> bool:
        """Jensen floor gamma*rho and the trivial ceiling gamma (4 sigma),
        for every grid value and for the fitted plateau."""
        g = self.params.gamma
        lo = g * self.params.rho - 4 * self.lambda_err
        hi = g + 4 * self.lambda_err
        fin = np.isfinite(self.lambdas)
        grid_ok = bool(np.all(self.lambdas[fin] >= lo[fin])
                       and np.all(self.lambdas[fin] <= hi[fin]))
        slack = 4 * max(self.plateau_err, float(np.max(self.lambda_err, initial=0.0)))
        plateau_ok = (g * self.params.rho - slack <= self.plateau
                      <= g + slack)
        return grid_ok and plateau_ok


def lambda_curve(params: ModelParams, t_grid, n: int, seed, scaled: bool = False,
                 n_workers: int = 1) -> LyapunovRun:
    """Lambda_p(t) over a time grid with a linear-in-1/t plateau fit over the
    last third. scaled=True returns the kappa-rescaled variant (time divided
    by kappa, prefactor 1/kappa)."""
    t_grid = np.asarray(t_grid, dtype=float)
    if np.any(np.diff(t_grid) <= 0) or np.any(t_grid <= 0):
        raise ValueError("t grid must be positive and increasing")
    lambdas, errs, ests = [], [], []
    for i, t in enumerate(t_grid):
        t_run = t / params.kappa if scaled else t
        est = estimate_moment(params, t_run, n, [seed, i], n_workers=n_workers)
        scale = params.p * t_run * (params.kappa if scaled else 1.0)
        lambdas.append(est.log_mean / scale)
        errs.append(est.log_stderr / scale)
        ests.append(est)
    lambdas = np.asarray(lambdas)
    errs = np.asarray(errs)
    k0 = max(0, len(t_grid) - max(2, len(t_grid) // 3))
    if len(t_grid) - k0 < 2:
        raise ValueError("fit window too short")
    x = 1.0 / t_grid[k0:]
    A = np.stack([np.ones_like(x), x], axis=1)
    coef, res, *_ = np.linalg.lstsq(A, lambdas[k0:], rcond=None)
    cov_scale = np.linalg.inv(A.T @ A)[0, 0]
    plateau_err = float(np.sqrt(cov_scale) * np.sqrt(np.mean(errs[k0:] ** 2)
                                                     * len(x)))
    return LyapunovRun(
        params=params, t_grid=t_grid, lambdas=lambdas, lambda_err=errs,
        plateau=float(coef[0]), plateau_err=plateau_err,
        fit_window=(float(t_grid[k0]), float(t_grid[-1])), scaled=scaled,
        estimates=ests,
    )


# ---------------------------------------------------------------------------
# Path-blocking lower bound and the range of the catalyst walk.
# ---------------------------------------------------------------------------


def range_mean(kernel: Kernel, t: float, n: int, seed) -> McEstimate:
    """E R_t: mean number of distinct sites visited up to time t."""
    if n < 2:
        raise ValueError("need at least two trials")
    offsets = np.stack([np.asarray(v) for v, _ in kernel.offsets])
    weights = np.array([w for _, w in kernel.offsets])
    vals = np.empty(n)
    for trial in range(n):
        rng = np.random.default_rng(flat_seed(seed) + (trial,))
        n_jumps = rng.poisson(kernel.rate * t)
        if n_jumps == 0:
            vals[trial] = 1.0
            continue
        steps = offsets[rng.choice(len(offsets), size=n_jumps, p=weights)]
        path = np.vstack([np.zeros((1, kernel.d), dtype=int), np.cumsum(steps, axis=0)])
        vals[trial] = len({tuple(r) for r in path})
    return McEstimate(mean=float(vals.mean()),
                      stderr=float(vals.std(ddof=1) / np.sqrt(n)),
                      n=n, seed=seed)


@dataclass
class BlockingBound:
    mc_bound: float
    analytic_bound: float
    p_catalyst_full: McEstimate
    p_walker_stays: McEstimate
    range_estimate: McEstimate
    t: float

    @property
    def degenerate(self) -> bool:
        return not np.isfinite(self.mc_bound)


def blocking_lower_bound(params: ModelParams, box_sites, t: float, n: int,
                         seed) -> BlockingBound:
    """Lower bound gamma + (1/t) log[ P(catalyst fills Q up to t) *
    P(walker stays in Q up to t) ] with both probabilities Monte Carlo, plus
    the analytic sub-bound rho^{|Q| E R_t} for the catalyst factor."""
    torus = params.torus
    kernel = params.catalyst_kernel
    box = np.asarray([torus.index(s) if not np.isscalar(s) else int(s)
                      for s in box_sites], dtype=int)
    full_hits = 0
    for trial in range(n):
        rng = np.random.default_rng(flat_seed(seed) + (1, trial))
        bits = (rng.random(torus.n_sites) < params.rho).astype(np.uint8)
        if not np.all(bits[box]):
            continue
        sched = build_schedule(torus, kernel, t, rng)
        ok = True
        for a, b, tt in zip(sched.bond_a, sched.bond_b, sched.times):
            bits[a], bits[b] = bits[b], bits[a]
            if (a in box or b in box) and not np.all(bits[box]):
                ok = False
                break
        full_hits += ok
    p_full = full_hits / n
    p_full_est = McEstimate(p_full, float(np.sqrt(max(p_full * (1 - p_full), 1e-300) / n)), n, seed)

    d = params.d
    moves = []
    for j in range(d):
        for sign in (1, -1):
            vec = tuple(sign if i == j else 0 for i in range(d))
            moves.append(torus.shift_table(vec))
    moves = np.stack(moves)
    box_set = set(int(b) for b in box)
    origin = torus.index((0,) * d)
    stay_hits = 0
    for trial in range(n):
        rng = np.random.default_rng(flat_seed(seed) + (2, trial))
        site = origin
        inside = origin in box_set
        if inside:
            n_jumps = rng.poisson(params.walker_rate * t)
            dirs = rng.integers(0, 2 * d, n_jumps)
            for k in dirs:
                site = int(moves[k, site])
                if site not in box_set:
                    inside = False
                    break
        stay_hits += inside
    p_stay = stay_hits / n
    p_stay_est = McEstimate(p_stay, float(np.sqrt(max(p_stay * (1 - p_stay), 1e-300) / n)), n, seed)

    rng_est = range_mean(kernel, t, max(n // 4, 2), flat_seed(seed) + (3,))
    if t == 0:
        mc_bound = params.gamma
        analytic = params.gamma
    elif p_full > 0 and p_stay > 0:
        mc_bound = params.gamma + (np.log(p_full) + np.log(p_stay)) / t
        analytic = (params.gamma
                    + (len(box) * rng_est.mean * np.log(params.rho)) / t
                    + np.log(p_stay) / t if p_stay > 0 else -np.inf)
    else:
        mc_bound = -np.inf
        analytic = -np.inf
    return BlockingBound(mc_bound=float(mc_bound), analytic_bound=float(analytic),
                         p_catalyst_full=p_full_est, p_walker_stays=p_stay_est,
                         range_estimate=rng_est, t=t)


# ---------------------------------------------------------------------------
# Large-kappa Gaussian-regime probe.
# ---------------------------------------------------------------------------


@dataclass
class _ProbeTrialSpec:
    d: int
    kappa: float
    t: float
    shift: float
    seed: object
    v_nodes: np.ndarray
    v_weights: np.ndarray

    def __call__(self, trials) -> np.ndarray:
        return _probe_trials(self, trials)


def _probe_nodes(t: float, n_panels: int = 14, nodes_per_panel: int = 12):
    """Composite GL grid in the lag variable, geometric toward 0."""
    edges = np.concatenate([[0.0], np.geomspace(min(0.25, t / 4), t, n_panels)])
    x, w = np.polynomial.legendre.leggauss(nodes_per_panel)
    nodes, weights = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        nodes.append(0.5 * (b - a) * x + 0.5 * (a + b))
        weights.append(0.5 * (b - a) * w)
    return np.concatenate(nodes), np.concatenate(weights)


def _probe_trials(spec: _ProbeTrialSpec, trials) -> np.ndarray:
    d, kappa, t, shift = spec.d, spec.kappa, spec.t, spec.shift
    rate = 2.0 * d
    # per-coordinate heat tables at each lag node, rate-1 d-dim clock
    tables = []
    for v in spec.v_nodes:
        w_time = v / kappa + shift
        tau = w_time / d
        m_max = int(np.ceil(tau + 10.0 * np.sqrt(tau + 1.0) + 8))
        tables.append((m_max, heat1d(np.arange(-m_max, m_max + 1), tau)))
    out = np.empty(len(trials))
    for k, trial in enumerate(trials):
        rng = np.random.default_rng(flat_seed(spec.seed) + (trial,))
        n_jumps = rng.poisson(rate * t)
        tau_jump = np.sort(rng.random(n_jumps) * t)
        axes = rng.integers(0, d, n_jumps)
        signs = rng.integers(0, 2, n_jumps) * 2 - 1
        steps = np.zeros((n_jumps, d), dtype=np.int64)
        steps[np.arange(n_jumps), axes] = signs
        pos = np.vstack([np.zeros((1, d), dtype=np.int64), np.cumsum(steps, axis=0)])
        total = 0.0
        for (m_max, tab), v, wgt in zip(tables, spec.v_nodes, spec.v_weights):
            if v >= t:
                continue
            # inner integral over s of p(X_s, X_{s+v}) with the walk frozen
            # between jumps: breakpoints where either X_s or X_{s+v} moves
            cuts = np.unique(np.concatenate([[0.0], tau_jump, tau_jump - v,
                                             [t - v]]))
            cuts = cuts[(cuts >= 0.0) & (cuts <= t - v)]
            mids = 0.5 * (cuts[:-1] + cuts[1:])
            seg = np.diff(cuts)
            i_s = np.searchsorted(tau_jump, mids, side="right")
            i_u = np.searchsorted(tau_jump, mids + v, side="right")
            z = pos[i_u] - pos[i_s]
            inside = np.all(np.abs(z) <= m_max, axis=1)
            if not np.any(inside):
                continue
            idx = z[inside] + m_max
            p = np.ones(int(inside.sum()))
            for j in range(d):
                p *= tab[idx[:, j]]
            total += wgt * float(seg[inside] @ p)
        out[k] = total / t
    return out


def asymptotic_probe(d: int, kappa: float, t: float, n: int, seed,
                     shift: float = 0.0, n_workers: int = 1):
    """MC mean of (1/t) int_0^t ds int_s^t du p_{(u-s)/kappa + shift}(X_s, X_u)
    for the rate-2d walk on Z^d, against the first-order reference
    G_{shift} / (2 d 1[kappa]).

    Returns (McEstimate, reference_value).
    """
    if d < 3:
        raise ValueError("transient dimensions only (d >= 3)")
    if n < 2:
        raise ValueError("need at least two trials")
    v_nodes, v_weights = _probe_nodes(t)
    spec = _ProbeTrialSpec(d=d, kappa=kappa, t=t, shift=shift, seed=seed,
                           v_nodes=v_nodes, v_weights=v_weights)
    vals = _run_trials(spec, n, n_workers)
    est = McEstimate(mean=float(vals.mean()),
                     stderr=float(vals.std(ddof=1) / np.sqrt(n)),
                     n=n, seed=seed)
    one_kappa = 1.0 + 1.0 / (2 * d * kappa)
    kernel = srw_kernel(d)
    reference = green(kernel, t_min=shift) / (2 * d * one_kappa)
    return est, reference


def probe_frozen_value(d: int, kappa: float, t: float, shift: float = 0.0) -> float:
    """Skeleton-quadrature value of the probe for a walk with no jumps,
    which must match (1/t) iint p_{(u-s)/kappa + shift}(0, 0) du ds."""
    v_nodes, v_weights = _probe_nodes(t)
    zero = np.zeros(1, dtype=int)
    total = 0.0
    for v, w in zip(v_nodes, v_weights):
        if v >= t:
            continue
        tau = (v / kappa + shift) / d
        total += w * (t - v) * float(heat1d(zero, tau)[0] ** d)
    return total / t
