"""Hot loops of the simulator.

Everything here is written in the numba-compatible subset and compiled by
``triadic._jit.njit`` (or run as plain Python when JIT is disabled).  State
lives in flat numpy arrays, including two open-addressing hash tables that
map vertex pairs to edge ids and edge/vertex pairs to triangle ids; ``GraphState`` in
:mod:`triadic.simulator` owns them and passes them in.

Vertex i carries label i - 2.  Pair keys are ``u << 32 | v`` with u < v;
triangle keys are ``edge_id(a, b) << 32 | c`` with a < b < c.

Counter layout (``ctr``): n, vertex count, edge count, triangle count.
Outcome layout (``out``): branch, a, b, c, edges created, new vertex flag.
"""
import numpy as np

from ._jit import njit

SHIFT = 32

BRANCH_NEW_PREF = 0
BRANCH_NEW_UNIF = 1
BRANCH_OLD_PREF = 2
BRANCH_OLD_UNIF = 3
BRANCH_NAMES = ("new-preferential", "new-uniform", "old-preferential", "old-uniform")

C_N, C_V, C_E, C_T = 0, 1, 2, 3


# ---------------------------------------------------------------- Fenwick tree

@njit
def fenwick_add(tree, i, delta):
    """Add ``delta`` to element i (0-based).  ``len(tree) - 1`` is a power of two."""
    size = tree.shape[0] - 1
    j = i + 1
    while j <= size:
        tree[j] += delta
        j += j & (-j)


@njit
def fenwick_prefix(tree, i):
    """Sum of elements 0..i-1."""
    s = 0
    j = i
    while j > 0:
        s += tree[j]
        j -= j & (-j)
    return s


@njit
def fenwick_find(tree, u):
    """Element e with prefix(e) <= u < prefix(e+1), for 0 <= u < total."""
    size = tree.shape[0] - 1
    pos = 0
    step = size
    while step > 0:
        nxt = pos + step
        if nxt <= size and tree[nxt] <= u:
            pos = nxt
            u -= tree[nxt]
        step >>= 1
    return pos


@njit
def fenwick_build(weights, count, size):
    tree = np.zeros(size + 1, dtype=np.int64)
    for i in range(count):
        tree[i + 1] += weights[i]
    for j in range(1, size + 1):
        parent = j + (j & (-j))
        if parent <= size:
            tree[parent] += tree[j]
    return tree


# ------------------------------------------------------------------- selection

@njit
def uniform_distinct(rng, population, count, out):
    """Fill out[:count] with distinct labels, uniformly over subsets (rejection)."""
    a = rng.integers(0, population)
    out[0] = a
    b = rng.integers(0, population)
    while b == a:
        b = rng.integers(0, population)
    out[1] = b
    if count == 3:
        c = rng.integers(0, population)
        while c == a or c == b:
            c = rng.integers(0, population)
        out[2] = c


@njit
def select(rng, p, q, r, ctr, eu, ev, etree, ta, tb, tc, ttree, sel):
    """Draw the interacting triple for the next step without mutating state.

    Writes (a, b, c) into sel[0:3]; for new-vertex branches sel[2] is the index
    the new vertex will get.  sel[3] / sel[4] receive the id of a sampled edge /
    triangle (-1 otherwise).  Returns the branch code.
    """
    n = ctr[C_N]
    nv = ctr[C_V]
    sel[3] = -1
    sel[4] = -1
    if rng.random() < p:
        if rng.random() < r:
            e = fenwick_find(etree, rng.integers(0, 3 * (n + 1)))
            sel[0] = eu[e]
            sel[1] = ev[e]
            sel[3] = e
            branch = BRANCH_NEW_PREF
        else:
            uniform_distinct(rng, nv, 2, sel)
            branch = BRANCH_NEW_UNIF
        sel[2] = nv
    else:
        if rng.random() < q:
            t = fenwick_find(ttree, rng.integers(0, n + 1))
            sel[0] = ta[t]
            sel[1] = tb[t]
            sel[2] = tc[t]
            sel[4] = t
            branch = BRANCH_OLD_PREF
        else:
            uniform_distinct(rng, nv, 3, sel)
            branch = BRANCH_OLD_UNIF
    return branch


# ------------------------------------------------------------------ hash table
# Open addressing with linear probing; keys >= 0, empty slots hold -1.  The
# owner keeps the load factor below 1/2 by calling ``ht_rebuild`` ahead of time.

@njit
def _slot(key, mask):
    hi = key >> SHIFT
    lo = key & 0xFFFFFFFF
    h = (hi * 2654435761) ^ (lo * 2146121005)
    h ^= h >> 29
    return h & mask


@njit
def ht_get(keys, vals, key):
    mask = keys.shape[0] - 1
    i = _slot(key, mask)
    while True:
        k = keys[i]
        if k == key:
            return vals[i]
        if k < 0:
            return -1
        i = (i + 1) & mask


@njit
def ht_insert(keys, vals, key, val):
    mask = keys.shape[0] - 1
    i = _slot(key, mask)
    while keys[i] >= 0:
        i = (i + 1) & mask
    keys[i] = key
    vals[i] = val


@njit
def ht_rebuild(keys, vals, size):
    new_keys = np.full(size, -1, dtype=np.int64)
    new_vals = np.zeros(size, dtype=np.int64)
    for i in range(keys.shape[0]):
        if keys[i] >= 0:
            ht_insert(new_keys, new_vals, keys[i], vals[i])
    return new_keys, new_vals


# -------------------------------------------------------------------- mutation

@njit
def _occ_index(value, cap):
    return value if value <= cap else cap + 1


@njit
def _bump_edge(eid, ew, etree):
    ew[eid] += 1
    fenwick_add(etree, eid, 1)


@njit
def _new_edge(u, v, key, eu, ev, ew, etree, ekeys, evals, degree, ctr):
    eid = ctr[C_E]
    ctr[C_E] = eid + 1
    ht_insert(ekeys, evals, key, eid)
    eu[eid] = u
    ev[eid] = v
    ew[eid] = 1
    degree[u] += 1
    degree[v] += 1
    fenwick_add(etree, eid, 1)
    return eid


@njit
def _edge(u, v, known_new, eu, ev, ew, etree, ekeys, evals, degree, ctr, res):
    """Increment edge u < v, creating it if absent.  res[0]=id, res[1]=created."""
    key = (u << SHIFT) | v
    eid = -1 if known_new else ht_get(ekeys, evals, key)
    if eid >= 0:
        _bump_edge(eid, ew, etree)
        res[0] = eid
        res[1] = 0
    else:
        res[0] = _new_edge(u, v, key, eu, ev, ew, etree, ekeys, evals, degree, ctr)
        res[1] = 1


@njit
def apply_triple(a, b, c, is_new, known_edge, known_tri, weight, degree, birth,
                 eu, ev, ew, etree, ekeys, evals, ta, tb, tc, tw, te, ttree, tkeys, tvals,
                 occ, ctr, out):
    """Carry out one interaction among vertex indices a, b, c.

    ``is_new``: c is the vertex being born (index == vertex count).
    ``known_edge``: id of edge (a, b) when the caller already knows it, else -1.
    ``known_tri``: id of triangle {a, b, c} when already known, else -1.
    """
    n = ctr[C_N]
    wcap = occ.shape[0] - 2
    dcap = occ.shape[1] - 2
    for x in (a, b, c):
        if not (is_new and x == c):
            occ[_occ_index(weight[x], wcap), _occ_index(degree[x], dcap)] -= 1
    if is_new:
        nv = ctr[C_V]
        weight[nv] = 0
        degree[nv] = 0
        birth[nv] = n + 1
        ctr[C_V] = nv + 1
    created = 0
    if known_tri >= 0:
        for s in range(3):
            _bump_edge(te[known_tri, s], ew, etree)
        tid = known_tri
    else:
        # canonical order a < b < c (a new vertex has the largest index)
        if a > b:
            a, b = b, a
        if b > c:
            b, c = c, b
        if a > b:
            a, b = b, a
        res = np.empty(2, dtype=np.int64)
        if known_edge >= 0:
            _bump_edge(known_edge, ew, etree)
            res[0] = known_edge
            res[1] = 0
        else:
            _edge(a, b, False, eu, ev, ew, etree, ekeys, evals, degree, ctr, res)
        eab = res[0]
        created += res[1]
        _edge(a, c, is_new, eu, ev, ew, etree, ekeys, evals, degree, ctr, res)
        eac = res[0]
        created += res[1]
        _edge(b, c, is_new, eu, ev, ew, etree, ekeys, evals, degree, ctr, res)
        ebc = res[0]
        created += res[1]
        tkey = (eab << SHIFT) | c
        tid = -1 if is_new else ht_get(tkeys, tvals, tkey)
        if tid < 0:
            tid = ctr[C_T]
            ctr[C_T] = tid + 1
            ht_insert(tkeys, tvals, tkey, tid)
            ta[tid] = a
            tb[tid] = b
            tc[tid] = c
            tw[tid] = 0
            te[tid, 0] = eab
            te[tid, 1] = eac
            te[tid, 2] = ebc
    tw[tid] += 1
    fenwick_add(ttree, tid, 1)
    for x in (a, b, c):
        weight[x] += 1
        occ[_occ_index(weight[x], wcap), _occ_index(degree[x], dcap)] += 1
    ctr[C_N] = n + 1
    out[4] = created
    return created


@njit
def advance(rng, p, q, r, nsteps, weight, degree, birth, eu, ev, ew, etree, ekeys, evals,
            ta, tb, tc, tw, te, ttree, tkeys, tvals, occ, ctr, out):
    """Run ``nsteps`` steps.  The last step's outcome is left in ``out``."""
    sel = np.empty(5, dtype=np.int64)
    for _ in range(nsteps):
        branch = select(rng, p, q, r, ctr, eu, ev, etree, ta, tb, tc, ttree, sel)
        is_new = branch == BRANCH_NEW_PREF or branch == BRANCH_NEW_UNIF
        out[0] = branch
        out[1] = sel[0]
        out[2] = sel[1]
        out[3] = sel[2]
        out[5] = 1 if is_new else 0
        apply_triple(sel[0], sel[1], sel[2], is_new, sel[3], sel[4], weight, degree, birth,
                     eu, ev, ew, etree, ekeys, evals, ta, tb, tc, tw, te, ttree, tkeys, tvals,
                     occ, ctr, out)


# ------------------------------------------------------------------ kernel test

@njit
def _adjacent(u, v, ekeys, evals):
    if u > v:
        u, v = v, u
    return ht_get(ekeys, evals, (u << SHIFT) | v) >= 0


@njit
def tabulate_transitions(rng, p, q, r, trials, watch, ctr, eu, ev, etree, ta, tb, tc, ttree, ekeys, evals):
    """Sample ``trials`` independent next-step selections from a frozen state.

    Returns counts[len(watch), 9] over cells
    0 new-pref +1, 1 new-unif +1, 2 new-unif +2, 3 old-pref +0, 4 old-unif +0,
    5 old-unif +1, 6 old-unif +2, 7 idle, 8 anything else (must stay empty),
    and the number of trials that created a vertex.
    """
    counts = np.zeros((watch.shape[0], 9), dtype=np.int64)
    sel = np.empty(5, dtype=np.int64)
    births = 0
    nv = ctr[C_V]
    for _ in range(trials):
        branch = select(rng, p, q, r, ctr, eu, ev, etree, ta, tb, tc, ttree, sel)
        if branch == BRANCH_NEW_PREF or branch == BRANCH_NEW_UNIF:
            births += 1
        for i in range(watch.shape[0]):
            v = watch[i]
            slot = -1
            for s in range(3):
                if sel[s] == v:
                    slot = s
            if slot < 0:
                counts[i, 7] += 1
                continue
            dd = 0
            for s in range(3):
                if s != slot:
                    o = sel[s]
                    if o >= nv or not _adjacent(v, o, ekeys, evals):
                        dd += 1
            cell = 8
            if branch == BRANCH_NEW_PREF:
                if dd == 1:
                    cell = 0
            elif branch == BRANCH_NEW_UNIF:
                if dd == 1:
                    cell = 1
                elif dd == 2:
                    cell = 2
            elif branch == BRANCH_OLD_PREF:
                if dd == 0:
                    cell = 3
            else:
                cell = 4 + dd
            counts[i, cell] += 1
    return counts, births
