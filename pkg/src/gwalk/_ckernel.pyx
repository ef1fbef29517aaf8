# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled walk kernel, the bit-identical twin of ``_pykernel``.

Semantics, RNG stream and floating-point operation order are the same as the
pure-Python reference; the parity test compares the two on shared seeds. See
_pykernel.py for the full contract.
"""

from libc.math cimport exp
from libc.stdlib cimport free, malloc, realloc

import numpy as np

cimport numpy as cnp

cnp.import_array()

cdef extern from *:
    """
    #include <stdint.h>
    static const uint64_t GW_GOLDEN = 0x9E3779B97F4A7C15ULL;
    static const uint64_t GW_ROOT_SALT = 0xD1B54A32D192ED03ULL;
    static inline uint64_t gw_mix64(uint64_t x) {
        x ^= x >> 30;
        x *= 0xBF58476D1CE4E5B9ULL;
        x ^= x >> 27;
        x *= 0x94D049BB133111EBULL;
        x ^= x >> 31;
        return x;
    }
    """
    ctypedef unsigned long long uint64_t
    uint64_t GW_GOLDEN
    uint64_t GW_ROOT_SALT
    uint64_t gw_mix64(uint64_t x) nogil

cdef double TWO_NEG53 = 1.0 / 9007199254740992.0

MASK = (1 << 64) - 1

MODE_STEPS = 0
MODE_CROSSINGS = 1
STATUS_OK = 0
STATUS_BUDGET = 2

KERNEL_IMPL = "compiled"


cdef struct Arena:
    cnp.int64_t cap
    cnp.int64_t n
    cnp.int64_t *parent
    double *V
    double *w
    double *totw
    uint64_t *key
    cnp.int64_t *gen
    cnp.int64_t *nchild
    cnp.int64_t *child0
    cnp.int64_t *n_down
    cnp.int64_t *n_up


cdef int arena_reserve(Arena *A, cnp.int64_t want) except -1:
    cdef cnp.int64_t cap = A.cap
    if want <= cap:
        return 0
    while cap < want:
        cap *= 2
    A.parent = <cnp.int64_t *> realloc(A.parent, cap * sizeof(cnp.int64_t))
    A.V = <double *> realloc(A.V, cap * sizeof(double))
    A.w = <double *> realloc(A.w, cap * sizeof(double))
    A.totw = <double *> realloc(A.totw, cap * sizeof(double))
    A.key = <uint64_t *> realloc(A.key, cap * sizeof(uint64_t))
    A.gen = <cnp.int64_t *> realloc(A.gen, cap * sizeof(cnp.int64_t))
    A.nchild = <cnp.int64_t *> realloc(A.nchild, cap * sizeof(cnp.int64_t))
    A.child0 = <cnp.int64_t *> realloc(A.child0, cap * sizeof(cnp.int64_t))
    A.n_down = <cnp.int64_t *> realloc(A.n_down, cap * sizeof(cnp.int64_t))
    A.n_up = <cnp.int64_t *> realloc(A.n_up, cap * sizeof(cnp.int64_t))
    if (A.parent == NULL or A.V == NULL or A.w == NULL or A.totw == NULL
            or A.key == NULL or A.gen == NULL or A.nchild == NULL
            or A.child0 == NULL or A.n_down == NULL or A.n_up == NULL):
        raise MemoryError()
    A.cap = cap
    return 0


cdef void arena_free(Arena *A):
    free(A.parent); free(A.V); free(A.w); free(A.totw); free(A.key)
    free(A.gen); free(A.nchild); free(A.child0); free(A.n_down); free(A.n_up)


def run_walk(law_tables, env_seed, walker_seed, mode, limit, snaps,
             budget=10**10, depth_cap=-1, collect_tree=False, explicit=None):
    """Compiled counterpart of _pykernel.run_walk (same signature)."""
    cdef cnp.ndarray[cnp.int64_t, ndim=1] snaps_a = \
        np.ascontiguousarray(snaps, dtype=np.int64)
    cdef cnp.int64_t nsnap = snaps_a.shape[0]
    cdef cnp.ndarray[cnp.int64_t, ndim=1] snap_idx = np.empty(nsnap, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] snap_L = np.empty(nsnap, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] snap_R = np.empty(nsnap, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] snap_T = np.empty(nsnap, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] snap_tau = np.empty(nsnap, dtype=np.int64)

    cdef cnp.ndarray[cnp.float64_t, ndim=1] atom_cum_a
    cdef cnp.ndarray[cnp.int64_t, ndim=1] atom_off_a
    cdef cnp.ndarray[cnp.int64_t, ndim=1] atom_len_a
    cdef cnp.ndarray[cnp.float64_t, ndim=1] marks_a
    cdef double *atom_cum = NULL
    cdef cnp.int64_t *atom_off = NULL
    cdef cnp.int64_t *atom_len = NULL
    cdef double *marks_flat = NULL

    cdef uint64_t eseed = <uint64_t> (env_seed & MASK)
    cdef uint64_t wseed = <uint64_t> (walker_seed & MASK)

    cdef Arena A
    A.cap = 1024
    A.n = 0
    A.parent = <cnp.int64_t *> malloc(A.cap * sizeof(cnp.int64_t))
    A.V = <double *> malloc(A.cap * sizeof(double))
    A.w = <double *> malloc(A.cap * sizeof(double))
    A.totw = <double *> malloc(A.cap * sizeof(double))
    A.key = <uint64_t *> malloc(A.cap * sizeof(uint64_t))
    A.gen = <cnp.int64_t *> malloc(A.cap * sizeof(cnp.int64_t))
    A.nchild = <cnp.int64_t *> malloc(A.cap * sizeof(cnp.int64_t))
    A.child0 = <cnp.int64_t *> malloc(A.cap * sizeof(cnp.int64_t))
    A.n_down = <cnp.int64_t *> malloc(A.cap * sizeof(cnp.int64_t))
    A.n_up = <cnp.int64_t *> malloc(A.cap * sizeof(cnp.int64_t))

    cdef cnp.ndarray[cnp.int64_t, ndim=1] exp_parent
    cdef cnp.ndarray[cnp.float64_t, ndim=1] exp_V
    cdef cnp.int64_t i, j, pa, c0
    cdef double sacc

    try:
        if explicit is None:
            atom_cum_a = np.ascontiguousarray(law_tables[0], dtype=np.float64)
            atom_off_a = np.ascontiguousarray(law_tables[1], dtype=np.int64)
            atom_len_a = np.ascontiguousarray(law_tables[2], dtype=np.int64)
            marks_a = np.ascontiguousarray(law_tables[3], dtype=np.float64)
            atom_cum = &atom_cum_a[0]
            atom_off = &atom_off_a[0]
            atom_len = &atom_len_a[0]
            marks_flat = &marks_a[0]
            A.n = 1
            A.parent[0] = -1
            A.V[0] = 0.0
            A.w[0] = 1.0
            A.totw[0] = 0.0
            A.key[0] = gw_mix64(eseed ^ GW_ROOT_SALT)
            A.gen[0] = 0
            A.nchild[0] = -1
            A.child0[0] = -1
            A.n_down[0] = 0
            A.n_up[0] = 0
        else:
            exp_parent = np.ascontiguousarray(explicit["parent"], dtype=np.int64)
            exp_V = np.ascontiguousarray(explicit["V"], dtype=np.float64)
            A.n = exp_parent.shape[0]
            if A.n == 0 or exp_parent[0] != -1:
                raise ValueError("explicit tree must list the root first")
            arena_reserve(&A, A.n)
            for i in range(A.n):
                A.parent[i] = exp_parent[i]
                A.V[i] = exp_V[i]
                A.w[i] = exp(-A.V[i])
                A.key[i] = 0
                A.nchild[i] = 0
                A.child0[i] = -1
                A.n_down[i] = 0
                A.n_up[i] = 0
            for i in range(1, A.n):
                pa = A.parent[i]
                if A.nchild[pa] == 0:
                    A.child0[pa] = i
                elif A.child0[pa] + A.nchild[pa] != i:
                    raise ValueError("children must be consecutive")
                A.nchild[pa] += 1
            for i in range(A.n):
                sacc = A.w[i]
                c0 = A.child0[i]
                for j in range(A.nchild[i]):
                    sacc += A.w[c0 + j]
                A.totw[i] = sacc
            A.gen[0] = 0
            for i in range(1, A.n):
                A.gen[i] = A.gen[A.parent[i]] + 1

        return _run_loop(&A, atom_cum, atom_off, atom_len, marks_flat,
                         wseed, <int> mode, <cnp.int64_t> limit,
                         snaps_a, nsnap, snap_idx, snap_tau, snap_T, snap_L,
                         snap_R, <cnp.int64_t> budget, <cnp.int64_t> depth_cap,
                         1 if collect_tree else 0)
    finally:
        arena_free(&A)


cdef _run_loop(Arena *A, double *atom_cum, cnp.int64_t *atom_off,
               cnp.int64_t *atom_len, double *marks_flat, uint64_t state,
               int mode, cnp.int64_t limit,
               cnp.ndarray[cnp.int64_t, ndim=1] snaps,
               cnp.int64_t nsnap,
               cnp.ndarray[cnp.int64_t, ndim=1] snap_idx,
               cnp.ndarray[cnp.int64_t, ndim=1] snap_tau,
               cnp.ndarray[cnp.int64_t, ndim=1] snap_T,
               cnp.ndarray[cnp.int64_t, ndim=1] snap_L,
               cnp.ndarray[cnp.int64_t, ndim=1] snap_R,
               cnp.int64_t budget, cnp.int64_t depth_cap, bint collect_tree):
    cdef cnp.int64_t pos = 0, m = 0, t_ex = 0, L = 0, R = 1
    cdef int status = STATUS_OK
    cdef cnp.int64_t si = 0
    cdef bint done = False
    cdef cnp.int64_t x, k, dest, c, last, base, a, j, gx, i
    cdef double u, vx, vc, wc, s
    cdef uint64_t kx
    cdef cnp.ndarray[cnp.int64_t, ndim=1] tp, tg, tnd, tnu, tnc
    cdef cnp.ndarray[cnp.float64_t, ndim=1] tv

    while not done:
        if m >= budget:
            status = STATUS_BUDGET
            break
        if pos == -1:
            m += 1
            A.n_down[0] += 1
            pos = 0
            if mode == 1:
                while si < nsnap and snaps[si] == L:
                    snap_idx[si] = L
                    snap_tau[si] = m
                    snap_T[si] = t_ex
                    snap_L[si] = L
                    snap_R[si] = R
                    si += 1
                if L >= limit:
                    done = True
            if mode == 0:
                while si < nsnap and snaps[si] == m:
                    snap_idx[si] = m
                    snap_tau[si] = m
                    snap_T[si] = t_ex
                    snap_L[si] = L
                    snap_R[si] = R
                    si += 1
                if m >= limit:
                    done = True
            continue

        x = pos
        if A.nchild[x] == -1:
            kx = A.key[x]
            u = <double> (kx >> 11) * TWO_NEG53
            a = 0
            while u >= atom_cum[a]:
                a += 1
            if depth_cap >= 0 and A.gen[x] >= depth_cap:
                k = 0
            else:
                k = atom_len[a]
            A.nchild[x] = k
            A.child0[x] = A.n
            arena_reserve(A, A.n + k)
            base = atom_off[a]
            vx = A.V[x]
            gx = A.gen[x] + 1
            s = A.w[x]
            for j in range(k):
                vc = vx + marks_flat[base + j]
                wc = exp(-vc)
                s += wc
                c = A.n + j
                A.parent[c] = x
                A.V[c] = vc
                A.w[c] = wc
                A.totw[c] = 0.0
                A.key[c] = gw_mix64(kx ^ ((<uint64_t> (j + 2)) * GW_GOLDEN))
                A.gen[c] = gx
                A.nchild[c] = -1
                A.child0[c] = -1
                A.n_down[c] = 0
                A.n_up[c] = 0
            A.n += k
            A.totw[x] = s

        k = A.nchild[x]
        if k == 0:
            dest = A.parent[x]
        else:
            state = state + GW_GOLDEN
            u = <double> (gw_mix64(state) >> 11) * TWO_NEG53
            u *= A.totw[x]
            if u < A.w[x]:
                dest = A.parent[x]
            else:
                u -= A.w[x]
                c = A.child0[x]
                last = c + k - 1
                while c < last and u >= A.w[c]:
                    u -= A.w[c]
                    c += 1
                dest = c

        m += 1
        t_ex += 1
        if dest == A.parent[x]:
            A.n_up[x] += 1
            if dest == -1:
                L += 1
        else:
            if A.n_down[dest] == 0:
                R += 1
            A.n_down[dest] += 1
        pos = dest

        if mode == 0:
            while si < nsnap and snaps[si] == m:
                snap_idx[si] = m
                snap_tau[si] = m
                snap_T[si] = t_ex
                snap_L[si] = L
                snap_R[si] = R
                si += 1
            if m >= limit:
                done = True

    out = {
        "status": status,
        "m": m,
        "t_ex": t_ex,
        "L": L,
        "R": R,
        "pos": pos,
        "nodes_grown": A.n,
        "snap_idx": np.asarray(snap_idx[:si]).copy(),
        "snap_tau": np.asarray(snap_tau[:si]).copy(),
        "snap_T": np.asarray(snap_T[:si]).copy(),
        "snap_L": np.asarray(snap_L[:si]).copy(),
        "snap_R": np.asarray(snap_R[:si]).copy(),
    }
    if collect_tree:
        tp = np.empty(A.n, dtype=np.int64)
        tg = np.empty(A.n, dtype=np.int64)
        tv = np.empty(A.n, dtype=np.float64)
        tnd = np.empty(A.n, dtype=np.int64)
        tnu = np.empty(A.n, dtype=np.int64)
        tnc = np.empty(A.n, dtype=np.int64)
        for i in range(A.n):
            tp[i] = A.parent[i]
            tg[i] = A.gen[i]
            tv[i] = A.V[i]
            tnd[i] = A.n_down[i]
            tnu[i] = A.n_up[i]
            tnc[i] = A.nchild[i]
        out["tree_parent"] = tp
        out["tree_gen"] = tg
        out["tree_V"] = tv
        out["tree_ndown"] = tnd
        out["tree_nup"] = tnu
        out["tree_nchild"] = tnc
    return out
