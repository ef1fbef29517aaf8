"""Excursion trees sampled directly from their branching law, regeneration
sets, and the moment sums behind the forest hypotheses.

One excursion of the walk (from the root until e* is hit) visits a random
subtree; attaching to every visited node x its edge local time N_x turns the
pair (visited set, counts) into a multi-type branching tree: conditionally on
N_x = k and on the environment at x, the children counts are negative
multinomial: the total is the number of failures before the k-th success in
Bernoulli(p_back) trials, split multinomially among the children, where
p_back = 1/(1 + sum_i e^{-a_i}) and the split weights are proportional to
e^{-a_i} for the child marks a_i (the potential level at x cancels).

The regeneration set at level l collects the x with |x| > l, N_x = 1 and
N >= 2 along the whole ancestor path strictly between level l and x. For
l = 0 the condition "all proper non-root ancestors have N >= 2" coincides
with the first-passage indicator G1(x) = 1 used by the forest transform, so
the hypothesis sums below can all be evaluated by the same pruned traversal
that never descends below a count-1 node.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .env import MarkedTree
from .law import MarkLaw
from .walk import StepBudgetExceeded

__all__ = [
    "ExcursionTree",
    "RegenSet",
    "sample_children_counts",
    "sample_excursion_tree",
    "excursion_tree_from_walk",
    "extract_regen",
    "regen_monotonicity_diag",
    "regen_density_diag",
    "hypothesis_sums_batch",
    "to_newick",
    "NB_INVERSION_MAX_K",
]

NB_INVERSION_MAX_K = 64
DEFAULT_NODE_BUDGET = 10**8


@dataclass
class ExcursionTree:
    """Visited subtree of one run to tau^p with edge counts N_x > 0.

    Arrays indexed by a compact node id, root first, parents before
    children (DFS emission order of the sampler)."""

    parent: np.ndarray
    gen: np.ndarray
    N: np.ndarray
    V: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.parent)

    @property
    def root_count(self) -> int:
        return int(self.N[0])


@dataclass
class RegenSet:
    ids: tuple[int, ...]
    level: int

    @property
    def cardinal(self) -> int:
        return len(self.ids)


def _nb_failures(k: int, p: float, rng: np.random.Generator) -> int:
    """Failures before the k-th success, Bernoulli(p) trials.

    CDF inversion for k below NB_INVERSION_MAX_K (falling back when p^k
    underflows), Gamma-Poisson mixture otherwise."""
    if p >= 1.0:
        return 0
    q = 1.0 - p
    if k < NB_INVERSION_MAX_K:
        pmf = p**k
        if pmf > 1e-290:
            u = rng.random()
            cdf = pmf
            m = 0
            while u >= cdf:
                pmf *= q * (k + m) / (m + 1)
                m += 1
                cdf += pmf
                if m > 10**9:  # pragma: no cover - defensive
                    break
            return m
    g = rng.gamma(shape=k, scale=q / p)
    return int(rng.poisson(g))


def sample_children_counts(
    k: int, p_back: float, p_children, rng: np.random.Generator
) -> list[int]:
    """Negative-multinomial children counts for a node crossed k times.

    Total M = failures before the k-th success in Bernoulli(p_back) trials;
    M is then split multinomially with weights p_children / (1 - p_back)."""
    p_children = np.asarray(p_children, dtype=np.float64)
    total = p_back + p_children.sum()
    if abs(total - 1.0) > 1e-12:
        raise ValueError(f"probabilities sum to {total!r}")
    if k < 1:
        raise ValueError("k must be >= 1")
    d = len(p_children)
    if d == 0 or p_back >= 1.0:
        return [0] * d
    m = _nb_failures(k, p_back, rng)
    if m == 0:
        return [0] * d
    split = rng.multinomial(m, p_children / (1.0 - p_back))
    return [int(v) for v in split]


def sample_excursion_tree(
    tree: MarkedTree,
    p: int,
    rng: np.random.Generator,
    node_budget: int = DEFAULT_NODE_BUDGET,
    keep_env_ids: bool = False,
    regen_prune_level: int | None = None,
) -> ExcursionTree:
    """Sample (visited set, counts) at tau^p directly on a quenched
    environment, no walk involved: explicit-stack DFS applying
    sample_children_counts at every node with count >= 1.

    With regen_prune_level = l the recursion stops below any node deeper
    than l whose count is 1. Such a node blocks the level-l regeneration
    predicate for all its descendants, so extract_regen at any level >= l is
    unaffected, while the sampled tree stays small even though the full
    excursion tree has infinite expected size in the sub-diffusive regime."""
    if p < 1:
        raise ValueError("p must be >= 1")
    parent = [-1]
    gen = [0]
    N = [p]
    V = [0.0]
    env_ids = [0]
    stack = [(0, 0)]  # (output id, environment node id)
    while stack:
        out_id, env_id = stack.pop()
        if (
            regen_prune_level is not None
            and gen[out_id] > regen_prune_level
            and N[out_id] == 1
        ):
            continue
        kids = tree.grow(env_id)
        if not kids:
            continue
        wx = math.exp(-tree.V[env_id])
        ws = np.array([math.exp(-tree.V[c]) for c in kids])
        tot = wx + ws.sum()
        counts = sample_children_counts(N[out_id], wx / tot, ws / tot, rng)
        for c, kc in zip(kids, counts):
            if kc == 0:
                continue
            cid = len(parent)
            if cid > node_budget:
                raise StepBudgetExceeded(
                    f"excursion tree exceeded {node_budget} nodes"
                )
            parent.append(out_id)
            gen.append(gen[out_id] + 1)
            N.append(kc)
            V.append(tree.V[c])
            env_ids.append(c)
            stack.append((cid, c))
    out = ExcursionTree(
        parent=np.array(parent, dtype=np.int64),
        gen=np.array(gen, dtype=np.int64),
        N=np.array(N, dtype=np.int64),
        V=np.array(V),
    )
    if keep_env_ids:
        out.env_ids = np.array(env_ids, dtype=np.int64)
    return out


def excursion_tree_from_walk(kernel_result) -> ExcursionTree:
    """Compact (visited, N) tree out of a kernel run that collected its
    arena (run must have stopped at a tau^p)."""
    nd = kernel_result["tree_ndown"]
    keep = nd > 0
    keep[0] = True
    idx = np.flatnonzero(keep)
    remap = -np.ones(len(nd), dtype=np.int64)
    remap[idx] = np.arange(len(idx))
    par = kernel_result["tree_parent"][idx]
    par = np.where(par >= 0, remap[par], -1)
    return ExcursionTree(
        parent=par,
        gen=kernel_result["tree_gen"][idx],
        N=nd[idx],
        V=kernel_result["tree_V"][idx],
    )


def extract_regen(source, level: int) -> RegenSet:
    """Regeneration set: x with |x| > level, N_x = 1 and N >= 2 along the
    ancestor path strictly between level and |x|. DFS filter; the result is
    an antichain by construction (asserted)."""
    if isinstance(source, ExcursionTree):
        parent, gen, N = source.parent, source.gen, source.N
    else:
        parent, gen, N = source["parent"], source["gen"], source["N"]
    n = len(parent)
    ok = np.zeros(n, dtype=bool)
    ok[0] = True
    ids = []
    # parents precede children in every source we build
    for x in range(1, n):
        pa = parent[x]
        ok[x] = ok[pa] and (gen[pa] <= level or N[pa] >= 2)
        if ok[x] and gen[x] > level and N[x] == 1:
            ids.append(x)
    picked = set(ids)
    for x in ids:
        pa = parent[x]
        while pa > 0:
            assert pa not in picked, "regeneration set not an antichain"
            pa = parent[pa]
    return RegenSet(ids=tuple(ids), level=level)


# ----------------------------------------------------------------------------
# Walk-based diagnostics


def regen_monotonicity_diag(
    law: MarkLaw,
    seed_pairs,
    p_max: int,
    level: int,
    budget: int = 10**8,
) -> float:
    """Fraction of walks whose regeneration sets are nested in p:
    set(p) included in set(p+1) for all p < p_max.

    Each p is a deterministic re-run of the same trajectory (equal seeds):
    the run to tau^{p+1} extends the run to tau^p step for step, so kernel
    arena node ids are stable across the reruns and identify nodes."""
    from . import kernel

    good = 0
    total = 0
    for env_seed, walk_seed in seed_pairs:
        sets = []
        okrun = True
        for p in range(1, p_max + 1):
            res = kernel.run_walk(
                law.tables(), env_seed, walk_seed, kernel.MODE_CROSSINGS, p,
                np.array([p], dtype=np.int64), budget=budget,
                collect_tree=True,
            )
            if res["status"] != 0:
                okrun = False
                break
            rs = extract_regen(
                {
                    "parent": res["tree_parent"],
                    "gen": res["tree_gen"],
                    "N": res["tree_ndown"],
                },
                level,
            )
            sets.append(set(rs.ids))
        if not okrun:
            continue
        total += 1
        if all(a <= b for a, b in zip(sets, sets[1:])):
            good += 1
    return good / total if total else float("nan")


def regen_density_diag(
    law: MarkLaw,
    n_values,
    r: float,
    alphas,
    seed_pairs,
    w_depth: int = 20,
    budget: int = 10**9,
):
    """Empirical sup over alpha of |B^{floor(alpha n^r)}_l / n^r - alpha W|,
    with l = ceil((log n)^2) and W the level-w_depth martingale value of the
    same environment. Returns rows (n, mean sup-deviation, trials used)."""
    from . import kernel
    from .env import additive_martingale

    rows = []
    for n in n_values:
        ell = int(math.ceil(math.log(n) ** 2))
        devs = []
        for env_seed, walk_seed in seed_pairs:
            t = MarkedTree(law, env_seed)
            W = additive_martingale(t, w_depth)
            sup_dev = 0.0
            usable = True
            for a in alphas:
                p = max(1, int(a * n**r))
                res = kernel.run_walk(
                    law.tables(), env_seed, walk_seed,
                    kernel.MODE_CROSSINGS, p, np.array([p], dtype=np.int64),
                    budget=budget, collect_tree=True,
                )
                if res["status"] != 0:
                    usable = False
                    break
                tr = excursion_tree_from_walk(res)
                B = extract_regen(tr, ell).cardinal
                sup_dev = max(sup_dev, abs(B / n**r - a * W))
            if usable:
                devs.append(sup_dev)
        rows.append((n, float(np.mean(devs)) if devs else float("nan"), len(devs)))
    return rows


# ----------------------------------------------------------------------------
# Batched annealed sampler of the pruned excursion top (criterion inputs)


def _nb_failures_batch(k: np.ndarray, p: float, rng: np.random.Generator):
    """Vectorized _nb_failures at fixed p: same inversion for k < 64, same
    Gamma-Poisson beyond."""
    out = np.zeros(len(k), dtype=np.int64)
    small = k < NB_INVERSION_MAX_K
    if p <= 1e-290:
        small[:] = False
    if small.any():
        ks = k[small]
        pmf = p ** ks.astype(np.float64)
        ok = pmf > 1e-290
        if not ok.all():
            small_idx = np.flatnonzero(small)
            small[small_idx[~ok]] = False
            ks = k[small]
            pmf = p ** ks.astype(np.float64)
        if small.any():
            q = 1.0 - p
            u = rng.random(len(ks))
            cdf = pmf.copy()
            m = np.zeros(len(ks), dtype=np.int64)
            act = u >= cdf
            step = 0
            while act.any():
                pmf[act] *= q * (ks[act] + step) / (step + 1)
                cdf[act] += pmf[act]
                m[act] += 1
                step += 1
                act &= u >= cdf
            out[small] = m
    big = ~small
    if big.any():
        g = rng.gamma(shape=k[big].astype(np.float64), scale=(1.0 - p) / p)
        out[big] = rng.poisson(g)
    return out


def hypothesis_sums_batch(
    law: MarkLaw, n_samples: int, rng: np.random.Generator, max_depth: int = 10**6
):
    """Per-sample sums over fresh single-excursion trees, pruned below
    count-1 nodes (all summands live on nodes whose proper non-root
    ancestors have N >= 2, so nothing is lost):

        B      number of nodes with N = 1 on the pruned support
               (the level-0 regeneration count),
        nu     sum of N over the pruned support,
        nu_t   number of pruned-support nodes.

    Environments are annealed: each node draws a fresh atom; potential
    levels cancel from the transition probabilities, so no V is tracked.
    Returns dict of arrays, each of length n_samples."""
    cum, off, lens, flat = law.tables()
    n_atoms = len(lens)
    # per-atom back-step probability and child split weights
    p_back = np.empty(n_atoms)
    splits = []
    for a in range(n_atoms):
        wa = np.exp(-flat[off[a] : off[a] + lens[a]])
        s = wa.sum()
        p_back[a] = 1.0 / (1.0 + s)
        splits.append(wa / s if s > 0 else wa)

    B = np.zeros(n_samples, dtype=np.int64)
    nu = np.zeros(n_samples, dtype=np.int64)
    nu_t = np.zeros(n_samples, dtype=np.int64)

    sample_id = np.arange(n_samples, dtype=np.int64)
    counts = np.ones(n_samples, dtype=np.int64)  # root counts: p = 1
    depth = 0
    while sample_id.size:
        depth += 1
        if depth > max_depth:
            raise StepBudgetExceeded("pruned excursion sampler ran too deep")
        atoms = np.searchsorted(cum, rng.random(sample_id.size), side="right")
        next_sid = []
        next_cnt = []
        for a in range(n_atoms):
            sel = np.flatnonzero(atoms == a)
            if sel.size == 0 or lens[a] == 0:
                continue
            m = _nb_failures_batch(counts[sel], p_back[a], rng)
            pos = np.flatnonzero(m > 0)
            if pos.size == 0:
                continue
            kid_counts = rng.multinomial(m[pos], splits[a])
            sid = sample_id[sel[pos]]
            for j in range(lens[a]):
                kc = kid_counts[:, j]
                nz = kc > 0
                if not nz.any():
                    continue
                csid = sid[nz]
                ck = kc[nz]
                ones = ck == 1
                np.add.at(B, csid[ones], 1)
                np.add.at(nu, csid, ck)
                np.add.at(nu_t, csid, 1)
                deeper = ~ones
                if deeper.any():
                    next_sid.append(csid[deeper])
                    next_cnt.append(ck[deeper])
        if next_sid:
            sample_id = np.concatenate(next_sid)
            counts = np.concatenate(next_cnt)
        else:
            break
    return {"B": B, "nu": nu, "nu_tilde": nu_t}


def to_newick(tree: ExcursionTree) -> str:
    """Newick-like dump with N and V annotations per node."""
    children: list[list[int]] = [[] for _ in range(len(tree))]
    for x in range(1, len(tree)):
        children[tree.parent[x]].append(x)

    def render(x: int) -> str:
        v = 0.0 if tree.V is None else float(tree.V[x])
        label = f"n{x}[N={int(tree.N[x])},V={v:.6g}]"
        if not children[x]:
            return label
        return "(" + ",".join(render(c) for c in children[x]) + ")" + label

    return render(0) + ";"
