"""Seeded Monte Carlo campaigns behind the CLI commands.

Each campaign runs independent (environment, walk) trials with substream
seeds derived from one master seed, reduces in trial order, and returns
CSV-ready rows plus verdict dicts. The normalizations are regime-aware:
kappa in (1,2) targets the spectrally negative stable reference laws,
kappa = 2 the Brownian laws with the sqrt(n log n) correction, kappa > 2
the Brownian laws with the two-child correlation constant.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import limits, stats, walk
from ._rng import derive_seed
from .env import environment_survives, level_weights_batch
from .kernel import STATUS_BUDGET
from .law import MarkLaw

__all__ = [
    "Constants",
    "trial_seeds",
    "w_hat_batch",
    "theorem2_campaign",
    "theorem1_campaign",
    "theorem3_campaign",
    "corollary_campaign",
    "W_DEPTH",
]

W_DEPTH = 15  # additive-martingale depth used as the W_inf proxy


@dataclass
class Constants:
    """Plug-in limit constants for one law (estimated or exact)."""

    kappa: float
    C_inf: float | None = None
    c_inf_bold: float | None = None
    c_kappa: float | None = None
    c0: float | None = None

    def local_time_scale(self, n: float) -> float:
        """a_n with W * L^n / a_n converging to the unit reference sup law."""
        k = self.kappa
        if k > 2.0:
            return math.sqrt(self.c0 * n)
        if k == 2.0:
            return math.sqrt(self.C_inf * self.c_kappa * n * math.log(n) / 2.0)
        g = abs(math.gamma(1.0 - k))
        return (self.C_inf * self.c_kappa * g / 2.0) ** (1.0 / k) * n ** (1.0 / k)

    def return_time_scale(self, p: float) -> float:
        """b_p with T^p / (W^{kappa and 2} b_p) converging to the unit
        first-passage law."""
        k = self.kappa
        if k > 2.0:
            return p**2 / self.c0
        if k == 2.0:
            return p**2 / (math.log(p) * self.C_inf * self.c_kappa)
        g = abs(math.gamma(1.0 - k))
        return 2.0 * p**k / (self.C_inf * self.c_kappa * g)

    @property
    def gamma(self) -> float:
        """Index of the reference stable process (2 means Brownian)."""
        return self.kappa if self.kappa < 2.0 else 2.0

    @property
    def w_power(self) -> float:
        return min(self.kappa, 2.0)


def _map_trials(fn, n_trials: int, threads: int) -> None:
    """Run fn(t) for t in range(n_trials): independent tasks writing to
    disjoint preallocated slots, so the reduction order is the index order
    no matter how completion interleaves."""
    if threads <= 1:
        for t in range(n_trials):
            fn(t)
        return
    with ThreadPoolExecutor(max_workers=threads) as ex:
        for _ in ex.map(fn, range(n_trials)):
            pass


def trial_seeds(master: int, experiment: str, n_trials: int):
    env = np.array(
        [derive_seed(master, experiment, t, "env") for t in range(n_trials)],
        dtype=np.uint64,
    )
    wlk = np.array(
        [derive_seed(master, experiment, t, "walk") for t in range(n_trials)],
        dtype=np.uint64,
    )
    return env, wlk


def w_hat_batch(
    law: MarkLaw, env_seeds, depth: int = W_DEPTH, chunk: int = 128
) -> np.ndarray:
    """Additive martingale at `depth` per environment, chunked to bound the
    (environments x mean_offspring^depth) intermediate arrays."""
    seeds = np.asarray(env_seeds, dtype=np.uint64)
    out = np.empty(seeds.size)
    for i in range(0, seeds.size, chunk):
        w, alive = level_weights_batch(law, seeds[i : i + chunk], depth)
        out[i : i + chunk] = np.where(alive, w, 0.0)
    return out


def _laplace_rows(experiment, z_by_n, gamma, kind, lambdas, n_trials):
    """Empirical-vs-reference transform rows and per-n max distances."""
    rows = []
    dists = {}
    for n, z in z_by_n.items():
        emp = stats.empirical_laplace(z, lambdas)
        worst = 0.0
        for rec in emp:
            lam = rec["lambda"]
            if kind == "SUP":
                ref = limits.ml_laplace(gamma, lam)
            else:
                ref = limits.hit_laplace(gamma, 1.0, lam)
            diff = abs(rec["value"] - ref)
            worst = max(worst, diff)
            rows.append(
                {
                    "experiment": experiment,
                    "n": n,
                    "lambda": lam,
                    "empirical": rec["value"],
                    "se": rec["se"],
                    "reference": ref,
                    "abs_diff": diff,
                    "n_trials": n_trials,
                }
            )
        dists[n] = worst
    return rows, dists


def theorem2_campaign(
    law: MarkLaw,
    consts: Constants,
    master_seed: int,
    n_trials: int = 2000,
    m_grid=(10**5, 10**6),
    lambdas=(0.5, 1.0, 2.0),
    w_depth: int = W_DEPTH,
    tol: float = 0.05,
    threads: int = 1,
) -> dict:
    """Local-time marginal test: W_hat * L^n / a_n against the sup law.

    Runs each trial to max(m_grid) steps, snapshotting the parent local
    time L^m at every grid point; one distance per n is the worst absolute
    transform error over the lambda grid. Verdicts: distance at the
    largest n below tol, and no increase across the n grid."""
    m_grid = sorted(int(m) for m in m_grid)
    env_seeds, walk_seeds = trial_seeds(master_seed, "theorem2", n_trials)
    L = np.empty((n_trials, len(m_grid)), dtype=np.int64)

    def one(t: int) -> None:
        res = walk.simulate_time_grid(
            law, int(env_seeds[t]), int(walk_seeds[t]), m_grid,
            budget=m_grid[-1] + 1,
        )
        L[t] = res["snap_L"]

    _map_trials(one, n_trials, threads)
    w = w_hat_batch(law, env_seeds, w_depth)

    z_by_n = {
        n: w * L[:, j] / consts.local_time_scale(n)
        for j, n in enumerate(m_grid)
    }
    rows, dists = _laplace_rows(
        "theorem2", z_by_n, consts.gamma, "SUP", lambdas, n_trials
    )
    dist_seq = [dists[n] for n in m_grid]
    verdicts = [
        stats.verdict_row(
            "theorem2", f"laplace_dist_n{m_grid[-1]}", dist_seq[-1], tol,
            dist_seq[-1] < tol, n_trials=n_trials,
        ),
        stats.verdict_row(
            "theorem2", "laplace_dist_trend",
            dist_seq[-1] - dist_seq[0], 0.0,
            all(b <= a for a, b in zip(dist_seq, dist_seq[1:])),
            distances={str(n): dists[n] for n in m_grid},
        ),
    ]
    return {"rows": rows, "verdicts": verdicts, "distances": dists, "z": z_by_n}


def theorem1_campaign(
    law: MarkLaw,
    consts: Constants,
    master_seed: int,
    n_trials: int = 2000,
    p_grid=(100, 1000),
    lambdas=(0.5, 1.0, 2.0),
    w_depth: int = W_DEPTH,
    tol: float = 0.05,
    z_budget: float = 14.0,
    w_ref: float = 2.0,
    step_cap: int = 3 * 10**7,
    threads: int = 1,
) -> dict:
    """Return-time marginal test: T^p / (W^k b_p) against the passage law.

    The step budget is z_budget * w_ref^k * b_p(max p): a trial still
    short of its last crossing then sits at normalized depth >= z_budget
    for typical environments, so censoring it as +inf (contributing 0 to
    every e^{-lambda Z}) biases the transform by at most e^{-lambda
    z_budget} plus the small-W remainder. step_cap additionally bounds any
    single trial: the kernel arena costs about 18 bytes per step on a
    recurrent walk (0.23 nodes grown per step, ten 8-byte slots each), so
    3e7 steps ~ 0.6 GB; censored-at-cap trials have Z far in the
    transform's exponentially damped tail."""
    p_grid = sorted(int(p) for p in p_grid)
    env_seeds, walk_seeds = trial_seeds(master_seed, "theorem1", n_trials)
    budget = min(
        int(z_budget * w_ref**consts.w_power * consts.return_time_scale(p_grid[-1])),
        int(step_cap),
    )
    T = np.full((n_trials, len(p_grid)), -1, dtype=np.int64)
    censored = np.zeros(n_trials, dtype=bool)

    def one(t: int) -> None:
        res = walk.simulate_excursion_grid(
            law, int(env_seeds[t]), int(walk_seeds[t]), p_grid,
            budget=budget, raise_on_budget=False,
        )
        got = res["snap_T"].size
        T[t, :got] = res["snap_T"]
        censored[t] = res["status"] == STATUS_BUDGET

    _map_trials(one, n_trials, threads)
    n_censored = int(censored.sum())
    w = w_hat_batch(law, env_seeds, w_depth)

    z_by_n = {}
    for j, p in enumerate(p_grid):
        z = np.where(
            T[:, j] >= 0,
            T[:, j] / (w**consts.w_power * consts.return_time_scale(p)),
            np.inf,
        )
        z_by_n[p] = z
    rows, dists = _laplace_rows(
        "theorem1", z_by_n, consts.gamma, "HIT", lambdas, n_trials
    )
    dist_seq = [dists[p] for p in p_grid]
    verdicts = [
        stats.verdict_row(
            "theorem1", f"laplace_dist_p{p_grid[-1]}", dist_seq[-1], tol,
            dist_seq[-1] < tol, n_trials=n_trials, n_censored=n_censored,
        ),
        stats.verdict_row(
            "theorem1", "laplace_dist_trend",
            dist_seq[-1] - dist_seq[0], 0.0,
            all(b <= a for a, b in zip(dist_seq, dist_seq[1:])),
            distances={str(p): dists[p] for p in p_grid},
        ),
    ]
    return {"rows": rows, "verdicts": verdicts, "distances": dists, "z": z_by_n}


def _kappa_n(kappa: float, n: int) -> float:
    if kappa == 2.0:
        return n**2 / math.log(n)
    return float(n) ** min(kappa, 2.0)


def theorem3_campaign(
    law: MarkLaw,
    consts: Constants,
    master_seed: int,
    n_trials: int = 160,
    n_grid=(10**3, 10**4),
    budget: int = 3 * 10**7,
    shrink: float = 0.7,
    threads: int = 1,
) -> dict:
    """Range-vs-time test: per trial the uniform error
    sup_{p<=n} |R at T^p - (c_inf/2) T^p| / kappa_n, medianed over trials.

    Snapshots every crossing up to max(n_grid). A trial that exhausts the
    step budget before crossing n contributes +inf for that n (the median
    absorbs the censored fraction, which stays well under half at the
    default budget; the budget itself is memory-bound, see the arena cost
    note on theorem1_campaign). Verdict: the median shrinks by at least
    the factor `shrink` going from the first to the last n."""
    n_grid = sorted(int(n) for n in n_grid)
    n_max = n_grid[-1]
    env_seeds, walk_seeds = trial_seeds(master_seed, "theorem3", n_trials)
    half_c = consts.c_inf_bold / 2.0
    sup_err = np.full((n_trials, len(n_grid)), np.inf)
    censored = np.zeros(n_trials, dtype=bool)
    p_all = np.arange(1, n_max + 1)

    def one(t: int) -> None:
        res = walk.simulate_excursion_grid(
            law, int(env_seeds[t]), int(walk_seeds[t]), p_all,
            budget=budget, raise_on_budget=False,
        )
        censored[t] = res["status"] == STATUS_BUDGET
        got = res["snap_T"].size
        if got == 0:
            return
        err = np.abs(res["snap_R"] - half_c * res["snap_T"])
        run_max = np.maximum.accumulate(err)
        for j, n in enumerate(n_grid):
            if got >= n:
                sup_err[t, j] = run_max[n - 1] / _kappa_n(consts.kappa, n)

    _map_trials(one, n_trials, threads)
    n_censored = int(censored.sum())
    med = np.median(sup_err, axis=0)
    rows = [
        {
            "experiment": "theorem3",
            "n": n,
            "median_sup_err": med[j],
            "n_trials": n_trials,
            "n_censored_at_n": int(np.isinf(sup_err[:, j]).sum()),
        }
        for j, n in enumerate(n_grid)
    ]
    ratio = med[-1] / med[0] if med[0] > 0 else np.inf
    verdicts = [
        stats.verdict_row(
            "theorem3", "median_sup_ratio", float(ratio), shrink,
            bool(ratio <= shrink), n_trials=n_trials, n_censored=n_censored,
            medians={str(n): float(m) for n, m in zip(n_grid, med)},
        )
    ]
    return {"rows": rows, "verdicts": verdicts, "medians": med, "sup_err": sup_err}


def corollary_campaign(
    law: MarkLaw,
    kappa: float,
    master_seed: int,
    n_walkers: int = 10**4,
    n_grid=(100, 215, 464, 1000, 2154, 4641, 10000),
    tol: float = 0.1,
    threads: int = 1,
) -> dict:
    """Parent-return-probability decay: slope of log P(X_{2n+1} = e*)
    against log n, compared with -(1 - 1/(kappa and 2)).

    One cohort serves every grid point: each walker runs once to the
    largest 2n+1 and the arrival indicator at time 2n+1 is read off as
    the local-time increment L^{2n+1} - L^{2n}. Environments are drawn
    fresh per walker under the survival conditioning (vacuous for laws
    with minimum offspring 1)."""
    n_grid = sorted(int(n) for n in n_grid)
    env_seeds, walk_seeds = trial_seeds(master_seed, "corollary", n_walkers)
    m_grid = []
    for n in n_grid:
        m_grid.extend((2 * n, 2 * n + 1))
    hits = np.zeros((n_walkers, len(n_grid)), dtype=np.int8)
    rejected = np.zeros(n_walkers, dtype=np.int64)

    def one(t: int) -> None:
        env = int(env_seeds[t])
        while not environment_survives(law, env):
            rejected[t] += 1
            env = derive_seed(env, "corollary-resample", int(rejected[t]), "env")
        res = walk.simulate_time_grid(
            law, env, int(walk_seeds[t]), m_grid, budget=m_grid[-1] + 1
        )
        L = res["snap_L"]
        hits[t] = L[1::2] - L[0::2]

    _map_trials(one, n_walkers, threads)
    counts = hits.sum(axis=0, dtype=np.int64)
    n_rejected = int(rejected.sum())
    p_hat = counts / n_walkers
    keep = counts > 0
    fit = stats.loglog_slope(
        np.asarray(n_grid, dtype=float)[keep], p_hat[keep], weights=counts[keep]
    )
    target = -(1.0 - 1.0 / min(kappa, 2.0))
    err = abs(fit["slope"] - target)
    rows = [
        {
            "experiment": "corollary",
            "n": n,
            "p_hat": p_hat[j],
            "count": int(counts[j]),
            "n_walkers": n_walkers,
        }
        for j, n in enumerate(n_grid)
    ]
    verdicts = [
        stats.verdict_row(
            "corollary", "loglog_slope", fit["slope"], target,
            bool(err <= tol), ci=fit["ci"], tol=tol, n_walkers=n_walkers,
            n_rejected=n_rejected,
        )
    ]
    return {"rows": rows, "verdicts": verdicts, "fit": fit, "p_hat": p_hat}
