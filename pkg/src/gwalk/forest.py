"""Two-type forest transform for count-labeled trees.

A count-labeled tree (one excursion's visited subtree, or any synthetic
source) carries an integer count beta(x) >= 1 per node with beta(root) = 1.
The transform re-encodes a forest of such trees as a two-type forest whose
type-1 Lukasiewicz path turns the cumulative weights

    F_p = sum of beta_star over the first p trees,
    beta_star(x) = beta(x) + sum of beta over the children of x,

into first-passage functionals of an integer path. Pipeline:

    TypedTree  --skeletonize-->  SkeletonTree  --finalize-->  FinalTree
                                                      |
                                         lukasiewicz(forest) -> path

Every identity checked here is an exact integer equality per sample, never
an asymptotic statement: node counts are preserved by skeletonize, the
final tree has exactly sum(beta_star) vertices, its root offspring count
equals twice the count-weighted size of the first type-1 generation, and
the cumulative weight F_p is p plus the child total of the first
first-passage-many type-1 vertices.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .env import MarkedTree
from .excursion import ExcursionTree, sample_excursion_tree
from .law import MarkLaw
from .walk import StepBudgetExceeded

__all__ = [
    "TypedTree",
    "SkeletonTree",
    "FinalTree",
    "LukasiewiczPath",
    "typed_tree",
    "typed_from_excursion",
    "sample_typed_forest",
    "skeletonize",
    "finalize",
    "transform",
    "lukasiewicz",
    "check_tree_identities",
    "hypothesis_check",
    "invariance_diag",
    "write_path_csv",
    "typed_to_newick",
    "final_to_newick",
]


# ---------------------------------------------------------------------------
# typed source trees


@dataclass
class TypedTree:
    """Count-labeled tree in canonical preorder.

    parent[0] = -1 and parent[j] < j; nodes are listed in depth-first
    preorder (children of equal parents consecutive in visit order).
    beta_star and g1 are cached at construction:

        beta_star(x) = beta(x) + sum of beta over children of x,
        g1(x)        = number of strict ancestors of x with beta = 1.

    Build through typed_tree() or typed_from_excursion(), which reorder
    arbitrary topologically sorted input into preorder.
    """

    parent: np.ndarray
    beta: np.ndarray
    gen: np.ndarray
    beta_star: np.ndarray
    g1: np.ndarray

    def __len__(self) -> int:
        return len(self.parent)

    def validate(self) -> None:
        """Recompute every derived field from scratch and compare.

        Naive per-node loops on purpose: this is the independent route
        against the vectorized construction."""
        n = len(self)
        assert self.parent[0] == -1 and self.beta[0] == 1
        for j in range(1, n):
            assert 0 <= self.parent[j] < j
            assert self.beta[j] >= 1
        # preorder: an explicit recursive traversal must emit 0..n-1
        children: list[list[int]] = [[] for _ in range(n)]
        for j in range(1, n):
            children[self.parent[j]].append(j)
        order = []
        stack = [0]
        while stack:
            x = stack.pop()
            order.append(x)
            stack.extend(reversed(children[x]))
        assert order == list(range(n)), "node order is not a preorder"
        for j in range(n):
            bs = self.beta[j] + sum(self.beta[c] for c in children[j])
            assert bs == self.beta_star[j]
            g = 0
            z = self.parent[j]
            d = 0
            while z != -1:
                g += 1 if self.beta[z] == 1 else 0
                z = self.parent[z]
                d += 1
            assert g == self.g1[j]
            assert d == self.gen[j]


def typed_tree(parent, beta) -> TypedTree:
    """Canonicalize (parent, beta) arrays into a TypedTree.

    Input only needs parents before children; nodes are re-numbered by a
    left-to-right depth-first traversal (children in ascending input id)."""
    parent = np.asarray(parent, dtype=np.int64)
    beta = np.asarray(beta, dtype=np.int64)
    n = parent.size
    if n == 0 or parent[0] != -1:
        raise ValueError("need a nonempty tree with parent[0] = -1")
    if beta.size != n:
        raise ValueError("parent and beta lengths differ")
    if beta[0] != 1:
        raise ValueError("root count must be 1")
    if (beta < 1).any():
        raise ValueError("counts must be >= 1")
    if n > 1 and not (parent[1:] < np.arange(1, n)).all():
        raise ValueError("parents must precede children")

    cnt = np.bincount(parent[1:], minlength=n)
    start = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(cnt, out=start[1:])
    kid = np.argsort(parent[1:], kind="stable").astype(np.int64) + 1

    pos = np.empty(n, dtype=np.int64)
    new_parent = np.empty(n, dtype=np.int64)
    new_beta = np.empty(n, dtype=np.int64)
    gen = np.empty(n, dtype=np.int64)
    g1 = np.empty(n, dtype=np.int64)
    stack = [0]
    k = 0
    while stack:
        x = stack.pop()
        pos[x] = k
        new_beta[k] = beta[x]
        px = parent[x]
        if px < 0:
            new_parent[k] = -1
            gen[k] = 0
            g1[k] = 0
        else:
            pp = pos[px]
            new_parent[k] = pp
            gen[k] = gen[pp] + 1
            g1[k] = g1[pp] + (1 if new_beta[pp] == 1 else 0)
        k += 1
        s, e = start[x], start[x + 1]
        if e > s:
            stack.extend(kid[s:e][::-1])

    beta_star = new_beta.copy()
    if n > 1:
        np.add.at(beta_star, new_parent[1:], new_beta[1:])
    return TypedTree(new_parent, new_beta, gen, beta_star, g1)


def typed_from_excursion(exc: ExcursionTree) -> TypedTree:
    """Excursion tree (root count 1) as a typed source tree."""
    if exc.root_count != 1:
        raise ValueError(
            "forest source trees need root count 1; sample at p = 1"
        )
    return typed_tree(exc.parent, exc.N)


def sample_typed_forest(
    law: MarkLaw,
    n_trees: int,
    rng: np.random.Generator,
    node_budget: int = 200_000,
    max_resample: int = 200,
) -> list[TypedTree]:
    """n_trees independent single-excursion trees, fresh environment each.

    A tree blowing through node_budget is redrawn with a fresh seed, so the
    returned sample is size-truncated; fine for exact-identity checks,
    which hold tree by tree, but do not feed it to tail estimators."""
    out: list[TypedTree] = []
    retries = 0
    while len(out) < n_trees:
        env = MarkedTree(law, int(rng.integers(0, 2**63)))
        try:
            exc = sample_excursion_tree(env, 1, rng, node_budget=node_budget)
        except StepBudgetExceeded:
            retries += 1
            if retries > max_resample:
                raise
            continue
        out.append(typed_from_excursion(exc))
    return out


def _level_groups(gen: np.ndarray):
    """Indices grouped by generation, ascending, root level excluded."""
    if gen.size <= 1:
        return
    idx = np.argsort(gen, kind="stable")
    levels = gen[idx]
    top = int(levels[-1])
    bounds = np.searchsorted(levels, np.arange(top + 2))
    for g in range(1, top + 1):
        yield idx[bounds[g] : bounds[g + 1]]


# ---------------------------------------------------------------------------
# skeleton


@dataclass
class SkeletonTree:
    """Skeleton of the two-type rebuild, same node ids as the source.

    Node j sits at generation g1(source j); its parent is the nearest
    strict ancestor carrying beta = 1. t1 is 1 on beta = 1 nodes and 0
    elsewhere (those are leaves here); b2 carries beta_star over."""

    parent: np.ndarray
    t1: np.ndarray
    b2: np.ndarray
    gen: np.ndarray

    def __len__(self) -> int:
        return len(self.parent)


def skeletonize(t: TypedTree) -> SkeletonTree:
    """Rebuild the tree with every node re-attached at its g1 generation.

    Rules, applied to the depth-first node sequence: node count is kept;
    the j-th skeleton node sits at generation g1 of the j-th source node;
    beta != 1 source nodes become leaves typed (0, beta_star) while
    beta = 1 nodes keep their children and are typed (1, beta_star)."""
    n = len(t)
    is_one = t.beta == 1
    anchor = np.full(n, -1, dtype=np.int64)
    for ids in _level_groups(t.gen):
        p = t.parent[ids]
        anchor[ids] = np.where(is_one[p], p, anchor[p])
    gen = t.g1.copy()
    if n > 1:
        # re-attachment must reproduce the g1 generations exactly
        assert (anchor[1:] < np.arange(1, n)).all()
        # leaf rule: only beta = 1 nodes may hold children
        assert is_one[anchor[1:]].all()
        assert (gen[1:] == gen[anchor[1:]] + 1).all()
    return SkeletonTree(
        parent=anchor,
        t1=is_one.astype(np.int64),
        b2=t.beta_star.copy(),
        gen=gen,
    )


# ---------------------------------------------------------------------------
# final tree


@dataclass
class FinalTree:
    """Binary-typed tree after leaf padding, in preorder.

    Each skeleton node x brings b2(x) - 1 extra type-0 leaves: attached to
    x itself when x is type 1, and to the parent of x when x is type 0.
    skel_pos maps skeleton ids to their position here."""

    parent: np.ndarray
    type1: np.ndarray
    skel_pos: np.ndarray

    def __len__(self) -> int:
        return len(self.parent)

    def child_counts(self) -> np.ndarray:
        return np.bincount(self.parent[1:], minlength=len(self))

    @property
    def root_offspring(self) -> int:
        """Number of depth-1 vertices."""
        return int(np.count_nonzero(self.parent == 0))

    @property
    def depth1_type1(self) -> int:
        """Number of depth-1 vertices of type 1."""
        return int(np.count_nonzero((self.parent == 0) & (self.type1 == 1)))


def _run_fill(starts: np.ndarray, lengths: np.ndarray):
    """Concatenated arange(start, start+length) per run."""
    total = int(lengths.sum())
    if total == 0:
        return np.empty(0, dtype=np.int64)
    ends = np.cumsum(lengths)
    out = np.arange(total, dtype=np.int64) - np.repeat(ends - lengths, lengths)
    return out + np.repeat(starts, lengths)


def finalize(s: SkeletonTree) -> FinalTree:
    """Pad the skeleton with its type-0 leaves.

    Fully vectorized: skeleton subtree x occupies the contiguous preorder
    block [pos(x), pos(x) + S(x)) of the final tree, where S sums b2 over
    the skeleton subtree; the padding leaves of a type-0 node follow it
    inside its own slot, those of a type-1 node close its block."""
    n = len(s)
    par = s.parent
    b2 = s.b2
    t1 = s.t1

    # subtree sums of b2, deepest levels first
    S = b2.copy()
    groups = list(_level_groups(s.gen))
    for ids in reversed(groups):
        np.add.at(S, par[ids], S[ids])

    # exclusive prefix sums of S over each sibling block
    presum = np.zeros(n, dtype=np.int64)
    if n > 1:
        kid = np.argsort(par[1:], kind="stable").astype(np.int64) + 1
        sizes = S[kid]
        csum = np.cumsum(sizes) - sizes
        grp = par[kid]
        first = np.flatnonzero(np.r_[True, grp[1:] != grp[:-1]])
        runs = np.diff(np.r_[first, kid.size])
        presum[kid] = csum - np.repeat(csum[first], runs)

    # preorder positions, shallow levels first
    pos = np.zeros(n, dtype=np.int64)
    for ids in groups:
        pos[ids] = pos[par[ids]] + 1 + presum[ids]

    total = int(S[0])
    fparent = np.full(total, -2, dtype=np.int64)
    ftype = np.zeros(total, dtype=np.int64)
    fparent[pos] = np.where(par >= 0, pos[np.maximum(par, 0)], -1)
    ftype[pos] = t1

    pads = b2 - 1
    has = pads > 0
    ones = has & (t1 == 1)
    zeros = has & (t1 == 0)
    if ones.any():
        st = pos[ones] + S[ones] - pads[ones]
        idx = _run_fill(st, pads[ones])
        fparent[idx] = np.repeat(pos[ones], pads[ones])
    if zeros.any():
        idx = _run_fill(pos[zeros] + 1, pads[zeros])
        fparent[idx] = np.repeat(fparent[pos[zeros]], pads[zeros])

    assert not (fparent == -2).any(), "padding left holes"
    if total > 1:
        assert (fparent[1:] < np.arange(1, total)).all()
        assert (fparent[1:] >= 0).all()
    # type-1 vertices form a rooted connected subtree
    t1_ids = np.flatnonzero(ftype == 1)
    assert t1_ids.size == 0 or t1_ids[0] == 0
    deeper = t1_ids[t1_ids > 0]
    assert (ftype[fparent[deeper]] == 1).all()
    return FinalTree(parent=fparent, type1=ftype, skel_pos=pos)


def transform(t: TypedTree) -> FinalTree:
    return finalize(skeletonize(t))


def check_tree_identities(t: TypedTree) -> dict:
    """Exact per-tree identities of the transform, as booleans.

    skeleton_count : the skeleton keeps the node count
    final_count    : the final tree has sum(beta_star) vertices
    offspring      : root offspring = 2 * sum of beta over the first
                     type-1 generation {g1 = 1}
    type1_depth1   : depth-1 type-1 vertices = #{g1 = 1, beta = 1}
    """
    s = skeletonize(t)
    f = finalize(s)
    lvl1 = t.g1 == 1
    return {
        "skeleton_count": len(s) == len(t),
        "final_count": len(f) == int(t.beta_star.sum()),
        "offspring": f.root_offspring == 2 * int(t.beta[lvl1].sum()),
        "type1_depth1": f.depth1_type1
        == int(np.count_nonzero(lvl1 & (t.beta == 1))),
    }


# ---------------------------------------------------------------------------
# Lukasiewicz path over a forest


@dataclass
class LukasiewiczPath:
    """Path data of a forest of final trees, concatenated in tree order.

    v1[k]  = sum over the first k type-1 vertices of (type-1 children - 1)
    d[k]   = total children (both types) of the first k type-1 vertices
    f_p[p] = cumulative vertex count of the first p trees
    k1_p[p] = cumulative type-1 vertex count of the first p trees

    Type-0 vertices are always leaves, so d over type-1 vertices already
    accounts for every non-root vertex of the forest.
    """

    v1: np.ndarray
    d: np.ndarray
    f_p: np.ndarray
    k1_p: np.ndarray
    _neg_max: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        if self._neg_max is None:
            self._neg_max = np.maximum.accumulate(-self.v1)

    @property
    def n_trees(self) -> int:
        return len(self.f_p) - 1

    def first_passage(self, p: int) -> int:
        """inf{k >= 1 : -v1[k] = p}, the size of the first p type-1 trees."""
        if not 1 <= p <= self.n_trees:
            raise ValueError("p out of range")
        k = int(np.searchsorted(self._neg_max, p, side="left"))
        assert self.v1[k] == -p
        return k

    def f(self, p: int) -> int:
        return int(self.f_p[p])

    def f_bar(self, m: int) -> int:
        """sup{p >= 0 : F_p <= m} on the sampled prefix."""
        return int(np.searchsorted(self.f_p, m, side="right")) - 1

    def d_bar(self, m: int) -> int:
        """sup{k >= 0 : d[k] <= m} on the sampled prefix."""
        return int(np.searchsorted(self.d, m, side="right")) - 1

    def max_drop(self, k: int) -> int:
        """max of -v1 over 0..k, i.e. the prefix maximum clamped at 0.

        The clamp is the tight convention for the sandwich bounds: a
        negative prefix maximum means no tree has closed yet, which
        forces f_bar = 0 on that prefix."""
        if k < 1:
            return 0
        return int(self._neg_max[min(k, len(self.v1) - 1)])

    def check_identities(self, m_grid=None, g_choices=(1, "half")) -> dict:
        """Exact per-sample path identities over the whole forest.

        first_passage : cumulative type-1 sizes are the first-passage
                        times of -v1 through every level p
        forest_type   : F_p = p + d(first_passage(p)) for every p
        sandwich      : min(g, max_drop(d_bar(m - g))) <= f_bar(m)
                        <= max_drop(d_bar(m)) on the valid m range
        """
        ps = np.arange(1, self.n_trees + 1)
        ks = np.searchsorted(self._neg_max, ps, side="left")
        fp_ok = bool(
            (self.v1[ks] == -ps).all() and (ks == self.k1_p[1:]).all()
        )
        ft_ok = bool((self.f_p[1:] == ps + self.d[ks]).all())

        if m_grid is None:
            top = int(self.d[-1]) - 1
            m_grid = np.unique(np.linspace(2, max(top, 2), 64, dtype=np.int64))
        sw_ok = True
        checked = 0
        for m in np.asarray(m_grid, dtype=np.int64):
            m = int(m)
            if m < 2 or m > int(self.d[-1]) - 1:
                continue
            fb = self.f_bar(m)
            hi = self.max_drop(self.d_bar(m))
            if fb > hi:
                sw_ok = False
            for g in g_choices:
                g = m // 2 if g == "half" else int(g)
                if not 1 <= g < m:
                    continue
                lo = min(g, self.max_drop(self.d_bar(m - g)))
                if lo > fb:
                    sw_ok = False
            checked += 1
        return {
            "first_passage": fp_ok,
            "forest_type": ft_ok,
            "sandwich": sw_ok,
            "sandwich_points": checked,
        }


def lukasiewicz(forest: Sequence[FinalTree]) -> LukasiewiczPath:
    """Path encoding of a forest of final trees, tree order preserved.

    The DFS of the type-1 subforest is the preorder of each tree
    restricted to its type-1 vertices (type-0 vertices are leaves, so the
    restriction is a connected rooted subtree)."""
    n1_parts = []
    nfull_parts = []
    sizes = np.empty(len(forest), dtype=np.int64)
    k1 = np.empty(len(forest), dtype=np.int64)
    for i, f in enumerate(forest):
        cnt = f.child_counts()
        mask = f.type1 == 1
        t1_children = np.zeros(len(f), dtype=np.int64)
        deeper = np.flatnonzero(mask)
        deeper = deeper[deeper > 0]
        if deeper.size:
            np.add.at(t1_children, f.parent[deeper], 1)
        n1_parts.append(t1_children[mask])
        nfull_parts.append(cnt[mask])
        sizes[i] = len(f)
        k1[i] = int(mask.sum())

    n1 = np.concatenate(n1_parts) if n1_parts else np.empty(0, np.int64)
    nf = np.concatenate(nfull_parts) if nfull_parts else np.empty(0, np.int64)
    v1 = np.zeros(len(n1) + 1, dtype=np.int64)
    np.cumsum(n1 - 1, out=v1[1:])
    d = np.zeros(len(nf) + 1, dtype=np.int64)
    np.cumsum(nf, out=d[1:])
    f_p = np.zeros(len(forest) + 1, dtype=np.int64)
    np.cumsum(sizes, out=f_p[1:])
    k1_p = np.zeros(len(forest) + 1, dtype=np.int64)
    np.cumsum(k1, out=k1_p[1:])
    return LukasiewiczPath(v1=v1, d=d, f_p=f_p, k1_p=k1_p)


# ---------------------------------------------------------------------------
# statistics on the forest law


def hypothesis_check(trees: Iterable[TypedTree]) -> dict:
    """MC report of the three first-generation sums with their SEs.

    Per tree: b = #{g1 = 1, beta = 1} (also the type-1 root offspring of
    the rebuilt tree), nu_hat = sum of beta over {g1 = 1},
    nu_tilde_hat = #{g1 = 1}. sigma1_sq is the sample variance of b with a
    fourth-moment standard error."""
    b = []
    nu = []
    nut = []
    for t in trees:
        lvl1 = t.g1 == 1
        b.append(int(np.count_nonzero(lvl1 & (t.beta == 1))))
        nu.append(int(t.beta[lvl1].sum()))
        nut.append(int(np.count_nonzero(lvl1)))
    b = np.asarray(b, dtype=np.float64)
    nu = np.asarray(nu, dtype=np.float64)
    nut = np.asarray(nut, dtype=np.float64)
    n = len(b)
    if n < 2:
        raise ValueError("need at least two trees")
    var_b = b.var(ddof=1)
    m4 = ((b - b.mean()) ** 4).mean()
    return {
        "n": n,
        "b_mean": float(b.mean()),
        "b_se": float(b.std(ddof=1) / math.sqrt(n)),
        "nu_mean": float(nu.mean()),
        "nu_se": float(nu.std(ddof=1) / math.sqrt(n)),
        "nu_tilde_mean": float(nut.mean()),
        "nu_tilde_se": float(nut.std(ddof=1) / math.sqrt(n)),
        "sigma1_sq": float(var_b),
        "sigma1_sq_se": float(math.sqrt(max(m4 - var_b**2, 0.0) / n)),
    }


def _gamma_n(n: int, gamma: float, log_correction: bool) -> float:
    if log_correction:
        return math.sqrt(n * math.log(n))
    return n ** (1.0 / gamma)


def invariance_diag(
    size_sampler: Callable[[np.random.Generator, int], np.ndarray],
    n_grid: Sequence[int],
    rng: np.random.Generator,
    gamma: float,
    nu: float,
    sigma1_sq: float | None = None,
    c_gamma: float | None = None,
    alpha: float = 1.0,
    t: float = 1.0,
    lambdas: Sequence[float] = (0.5, 1.0, 2.0),
    n_rep: int = 400,
) -> list[dict]:
    """Laplace-distance table of the scaled (F, F_bar) marginals.

    size_sampler(rng, k) draws k independent per-tree weights
    S_i = sum(beta_star) so each replicate assembles one forest prefix;
    F_p and F_bar(m) only depend on those totals. Marginals
    F_floor(alpha * g_n) / n and F_bar(floor(t n)) / g_n are compared, at
    each lambda, with the first-passage and running-supremum transforms of
    the limit process using the plug-in constants:

        finite-variance case  (gamma = 2, sigma1_sq given): g_n = sqrt(n)
        2-stable tail case    (gamma = 2, c_gamma given):   g_n = sqrt(n log n)
        gamma in (1, 2), c_gamma given:                     g_n = n^(1/gamma)

    Returns one row per (n, marginal, lambda) plus a distance row per
    (n, marginal); distances should trend down along n_grid."""
    from . import limits

    if gamma == 2.0:
        if (sigma1_sq is None) == (c_gamma is None):
            raise ValueError("gamma = 2 needs exactly one of sigma1_sq, c_gamma")
        scale2 = sigma1_sq if sigma1_sq is not None else c_gamma
        log_corr = c_gamma is not None
    else:
        if not 1.0 < gamma < 2.0:
            raise ValueError("gamma must lie in (1, 2]")
        if c_gamma is None:
            raise ValueError("gamma < 2 needs c_gamma")
        log_corr = False

    rows: list[dict] = []
    for n in n_grid:
        gn = _gamma_n(int(n), gamma, log_corr)
        p_target = int(alpha * gn)
        m_target = int(t * n)
        f_scaled = np.empty(n_rep)
        fbar_scaled = np.empty(n_rep)
        for r in range(n_rep):
            need = max(p_target, 16)
            sizes = size_sampler(rng, need)
            csum = np.cumsum(sizes)
            while csum[-1] <= m_target:
                extra = size_sampler(rng, max(need, 1024))
                csum = np.concatenate([csum, csum[-1] + np.cumsum(extra)])
            f_scaled[r] = (csum[p_target - 1] if p_target >= 1 else 0.0) / n
            fbar_scaled[r] = (
                np.searchsorted(csum, m_target, side="right") / gn
            )

        if gamma == 2.0:
            # first passage of B through alpha, running sup of B at t
            c_tau = 2.0 * nu / scale2
            a_sup = math.sqrt(scale2 * t / (2.0 * nu))
        else:
            big_c = c_gamma * abs(math.gamma(1.0 - gamma))
            c_tau = 2.0 * nu / big_c
            a_sup = (big_c * t / (2.0 * nu)) ** (1.0 / gamma)

        for name, sample in (("F", f_scaled), ("F_bar", fbar_scaled)):
            dist = 0.0
            for lam in lambdas:
                emp = float(np.mean(np.exp(-lam * sample)))
                se = float(np.std(np.exp(-lam * sample)) / math.sqrt(n_rep))
                if name == "F":
                    ref = limits.hit_laplace(gamma, alpha, c_tau * lam)
                else:
                    ref = limits.ml_laplace(gamma, a_sup * lam)
                rows.append(
                    {
                        "n": int(n),
                        "marginal": name,
                        "lambda": lam,
                        "empirical": emp,
                        "reference": float(ref),
                        "abs_err": abs(emp - ref),
                        "se": se,
                    }
                )
                dist = max(dist, abs(emp - ref))
            rows.append(
                {
                    "n": int(n),
                    "marginal": name,
                    "lambda": None,
                    "distance": dist,
                }
            )
    return rows


# ---------------------------------------------------------------------------
# dumps


def write_path_csv(path: LukasiewiczPath, dest) -> None:
    """Rows (k, V1_k, D_k) for the whole forest path."""
    close = False
    if isinstance(dest, (str, bytes)) or hasattr(dest, "__fspath__"):
        dest = open(dest, "w", newline="")
        close = True
    try:
        w = csv.writer(dest)
        w.writerow(["k", "V1", "D"])
        for k in range(len(path.v1)):
            w.writerow([k, int(path.v1[k]), int(path.d[k])])
    finally:
        if close:
            dest.close()


def _newick(parent: np.ndarray, label) -> str:
    n = len(parent)
    children: list[list[int]] = [[] for _ in range(n)]
    for x in range(1, n):
        children[parent[x]].append(x)

    out = []

    def render(x: int) -> str:
        if not children[x]:
            return label(x)
        return "(" + ",".join(render(c) for c in children[x]) + ")" + label(x)

    import sys

    old = sys.getrecursionlimit()
    sys.setrecursionlimit(max(old, n + 100))
    try:
        out.append(render(0))
    finally:
        sys.setrecursionlimit(old)
    return out[0] + ";"


def typed_to_newick(t: TypedTree) -> str:
    return _newick(
        t.parent,
        lambda x: f"n{x}[b={int(t.beta[x])},bs={int(t.beta_star[x])},g1={int(t.g1[x])}]",
    )


def final_to_newick(f: FinalTree) -> str:
    return _newick(f.parent, lambda x: f"n{x}[t={int(f.type1[x])}]")
