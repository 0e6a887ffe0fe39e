"""Discrete-time simulation of the three-vertex interaction graph."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from . import kernels as K
from ._jit import backend_name
from .params import ModelParams

SNAPSHOT_VERSION = 1
RNG_ALGORITHM = "numpy.random.PCG64 seeded via numpy.random.SeedSequence(seed)"

__all__ = [
    "InvariantError",
    "StepOutcome",
    "Checkpoint",
    "GraphState",
    "init",
    "step",
    "run",
    "WeightedIndex",
    "sample_uniform_distinct",
]


class InvariantError(AssertionError):
    """The graph state violates one of the model's bookkeeping identities."""


@dataclass(frozen=True)
class StepOutcome:
    branch: str
    triple: tuple[int, int, int]  # vertex labels
    created_edges: int
    new_vertex: int | None


@dataclass
class Checkpoint:
    n: int
    V: int
    occupancy: np.ndarray  # counts[w, d] incl. overflow row/column
    tracked: dict[int, tuple[int, int]] = field(default_factory=dict)  # label -> (W, D)
    max_weight: int = 0
    max_degree: int = 0


def _pow2_at_least(k: int) -> int:
    size = 1
    while size < k:
        size <<= 1
    return size


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))


class GraphState:
    """Evolving weighted graph plus the sampling indices and the RNG.

    Vertex ``i`` in the arrays carries label ``i - 2``; the starting triangle
    is labelled -2, -1, 0.  ``occupancy[w, d]`` counts vertices of weight w and
    degree d, with the last row/column collecting everything above the caps.
    """

    def __init__(self, params: ModelParams, seed: int = 0, w_cap: int = 64, d_cap: int = 128,
                 capacity: int = 1024):
        self.params = params
        self.seed = int(seed)
        self.rng = make_rng(self.seed)
        self.w_cap = int(w_cap)
        self.d_cap = int(d_cap)
        self.ctr = np.zeros(4, dtype=np.int64)
        self.out = np.zeros(6, dtype=np.int64)
        self.ekeys = np.full(16, -1, dtype=np.int64)
        self.evals = np.zeros(16, dtype=np.int64)
        self.tkeys = np.full(16, -1, dtype=np.int64)
        self.tvals = np.zeros(16, dtype=np.int64)
        self.occ = np.zeros((self.w_cap + 2, self.d_cap + 2), dtype=np.int64)
        self._alloc(capacity + 3, 3 * capacity + 3, capacity + 1)

    # ---------------------------------------------------------------- storage

    def _alloc(self, vcap, ecap, tcap):
        self.weight = np.zeros(vcap, dtype=np.int64)
        self.degree = np.zeros(vcap, dtype=np.int64)
        self.birth = np.zeros(vcap, dtype=np.int64)
        ecap = _pow2_at_least(ecap)
        tcap = _pow2_at_least(tcap)
        self.eu = np.zeros(ecap, dtype=np.int64)
        self.ev = np.zeros(ecap, dtype=np.int64)
        self.ew = np.zeros(ecap, dtype=np.int64)
        self.etree = np.zeros(ecap + 1, dtype=np.int64)
        self.ta = np.zeros(tcap, dtype=np.int64)
        self.tb = np.zeros(tcap, dtype=np.int64)
        self.tc = np.zeros(tcap, dtype=np.int64)
        self.tw = np.zeros(tcap, dtype=np.int64)
        self.te = np.zeros((tcap, 3), dtype=np.int64)
        self.ttree = np.zeros(tcap + 1, dtype=np.int64)
        self._grow_tables(ecap, tcap)

    def _grow_tables(self, ecap, tcap):
        # keep hash tables at most half full
        if len(self.ekeys) < 2 * ecap:
            self.ekeys, self.evals = K.ht_rebuild(self.ekeys, self.evals, _pow2_at_least(2 * ecap))
        if len(self.tkeys) < 2 * tcap:
            self.tkeys, self.tvals = K.ht_rebuild(self.tkeys, self.tvals, _pow2_at_least(2 * tcap))

    def reserve(self, steps: int):
        """Make room for ``steps`` more steps (each adds <= 1 vertex, 3 edges, 1 triangle)."""
        nv, ne, nt = int(self.ctr[K.C_V]), int(self.ctr[K.C_E]), int(self.ctr[K.C_T])
        need_v, need_e, need_t = nv + steps, ne + 3 * steps, nt + steps
        if need_v > len(self.weight):
            size = max(need_v, 2 * len(self.weight))
            for name in ("weight", "degree", "birth"):
                old = getattr(self, name)
                new = np.zeros(size, dtype=np.int64)
                new[:nv] = old[:nv]
                setattr(self, name, new)
        if need_e > len(self.eu):
            size = _pow2_at_least(need_e)
            for name in ("eu", "ev", "ew"):
                old = getattr(self, name)
                new = np.zeros(size, dtype=np.int64)
                new[:ne] = old[:ne]
                setattr(self, name, new)
            self.etree = K.fenwick_build(self.ew, ne, size)
        if need_t > len(self.ta):
            size = _pow2_at_least(need_t)
            for name in ("ta", "tb", "tc", "tw", "te"):
                old = getattr(self, name)
                new = np.zeros((size,) + old.shape[1:], dtype=np.int64)
                new[:nt] = old[:nt]
                setattr(self, name, new)
            self.ttree = K.fenwick_build(self.tw, nt, size)
        self._grow_tables(len(self.eu), len(self.ta))

    def _state_args(self):
        return (self.weight, self.degree, self.birth, self.eu, self.ev, self.ew, self.etree,
                self.ekeys, self.evals, self.ta, self.tb, self.tc, self.tw, self.te, self.ttree,
                self.tkeys, self.tvals, self.occ, self.ctr, self.out)

    # ----------------------------------------------------------------- views

    @property
    def n(self) -> int:
        return int(self.ctr[K.C_N])

    @property
    def num_vertices(self) -> int:
        return int(self.ctr[K.C_V])

    @property
    def num_edges(self) -> int:
        return int(self.ctr[K.C_E])

    @property
    def num_triangles(self) -> int:
        return int(self.ctr[K.C_T])

    def weights(self) -> np.ndarray:
        return self.weight[: self.num_vertices]

    def degrees(self) -> np.ndarray:
        return self.degree[: self.num_vertices]

    def births(self) -> np.ndarray:
        return self.birth[: self.num_vertices]

    def edges(self):
        ne = self.num_edges
        return self.eu[:ne], self.ev[:ne], self.ew[:ne]

    def triangles(self):
        nt = self.num_triangles
        return self.ta[:nt], self.tb[:nt], self.tc[:nt], self.tw[:nt]

    def vertex(self, label: int) -> tuple[int, int]:
        """(W, D) of a vertex; (0, 0) if it does not exist yet."""
        i = label + 2
        if 0 <= i < self.num_vertices:
            return int(self.weight[i]), int(self.degree[i])
        return 0, 0

    def edge_weight(self, u: int, v: int) -> int:
        """Weight of the edge between two labels, 0 if absent."""
        a, b = sorted((u + 2, v + 2))
        eid = K.ht_get(self.ekeys, self.evals, (a << K.SHIFT) | b)
        return 0 if eid < 0 else int(self.ew[eid])

    def triangle_weight(self, u: int, v: int, w: int) -> int:
        a, b, c = sorted((u + 2, v + 2, w + 2))
        eid = K.ht_get(self.ekeys, self.evals, (a << K.SHIFT) | b)
        if eid < 0:
            return 0
        tid = K.ht_get(self.tkeys, self.tvals, (eid << K.SHIFT) | c)
        return 0 if tid < 0 else int(self.tw[tid])

    def max_weight(self) -> int:
        return int(self.weights().max())

    def max_degree(self) -> int:
        return int(self.degrees().max())

    def occupancy(self) -> np.ndarray:
        return self.occ.copy()

    def recount_occupancy(self) -> np.ndarray:
        """Occupancy rebuilt from scratch (debug cross-check of the incremental counts)."""
        occ = np.zeros_like(self.occ)
        w = np.minimum(self.weights(), self.w_cap + 1)
        d = np.minimum(self.degrees(), self.d_cap + 1)
        np.add.at(occ, (w, d), 1)
        return occ

    # --------------------------------------------------------------- dynamics

    def step(self) -> StepOutcome:
        self.reserve(1)
        p, q, r = self.params.floats
        K.advance(self.rng, p, q, r, 1, *self._state_args())
        return self._outcome()

    def advance(self, steps: int):
        """Run ``steps`` steps in the compiled kernel."""
        if steps <= 0:
            return
        self.reserve(steps)
        p, q, r = self.params.floats
        K.advance(self.rng, p, q, r, int(steps), *self._state_args())

    def apply(self, labels: Iterable[int]) -> StepOutcome:
        """Force an interaction among the given labels (used to craft states).

        A label equal to the next unused label creates that vertex.
        """
        labels = [int(x) for x in labels]
        if len(set(labels)) != 3:
            raise ValueError("an interaction needs three distinct labels")
        nv = self.num_vertices
        new_label = nv - 2
        idx = [x + 2 for x in labels]
        news = [x for x in labels if x == new_label]
        if any(not 0 <= i < nv for i, x in zip(idx, labels) if x != new_label):
            raise ValueError(f"unknown vertex in {labels}")
        self.reserve(1)
        if news:
            idx.sort(key=lambda i: i == nv)
        self.out[:] = (K.BRANCH_NEW_UNIF if news else K.BRANCH_OLD_UNIF, *idx, 0, 1 if news else 0)
        K.apply_triple(idx[0], idx[1], idx[2], bool(news), -1, -1, *self._state_args())
        return self._outcome()

    def _outcome(self) -> StepOutcome:
        branch, a, b, c, created, is_new = (int(x) for x in self.out)
        return StepOutcome(
            branch=K.BRANCH_NAMES[branch],
            triple=(a - 2, b - 2, c - 2),
            created_edges=created,
            new_vertex=(c - 2) if is_new else None,
        )

    def checkpoint(self, track: Iterable[int] = ()) -> Checkpoint:
        return Checkpoint(
            n=self.n,
            V=self.num_vertices,
            occupancy=self.occupancy(),
            tracked={int(j): self.vertex(int(j)) for j in track},
            max_weight=self.max_weight(),
            max_degree=self.max_degree(),
        )

    # ------------------------------------------------------------- invariants

    def check_invariants(self, full: bool = True):
        """Raise InvariantError on the first violated identity."""
        n, nv = self.n, self.num_vertices
        eu, ev, ew = self.edges()
        ta, tb, tc, tw = self.triangles()
        W, D = self.weights(), self.degrees()

        def fail(msg):
            raise InvariantError(f"step {n}: {msg}")

        if tw.sum() != n + 1:
            fail(f"total triangle weight {tw.sum()} != n+1 = {n + 1}")
        if ew.sum() != 3 * (n + 1):
            fail(f"total edge weight {ew.sum()} != 3(n+1) = {3 * (n + 1)}")
        if self.etree.shape[0] > 1 and K.fenwick_prefix(self.etree, len(self.etree) - 1) != 3 * (n + 1):
            fail("edge index total out of sync")
        if K.fenwick_prefix(self.ttree, len(self.ttree) - 1) != n + 1:
            fail("triangle index total out of sync")
        tri_w = (np.bincount(ta, tw, nv) + np.bincount(tb, tw, nv) + np.bincount(tc, tw, nv)).astype(np.int64)
        if not np.array_equal(tri_w, W):
            j = int(np.flatnonzero(tri_w != W)[0])
            fail(f"vertex {j - 2}: weight {W[j]} != triangle weight sum {tri_w[j]}")
        inc_w = (np.bincount(eu, ew, nv) + np.bincount(ev, ew, nv)).astype(np.int64)
        if not np.array_equal(inc_w, 2 * W):
            j = int(np.flatnonzero(inc_w != 2 * W)[0])
            fail(f"vertex {j - 2}: incident edge weight {inc_w[j]} != 2W = {2 * W[j]}")
        deg = np.bincount(eu, minlength=nv) + np.bincount(ev, minlength=nv)
        if not np.array_equal(deg, D):
            j = int(np.flatnonzero(deg != D)[0])
            fail(f"vertex {j - 2}: degree {D[j]} != distinct neighbours {deg[j]}")
        if np.any(D < 2) or np.any(D > 2 * W):
            j = int(np.flatnonzero((D < 2) | (D > 2 * W))[0])
            fail(f"vertex {j - 2}: degree {D[j]} outside [2, 2W={2 * W[j]}]")
        if full:
            if (self.ekeys >= 0).sum() != len(eu) or (self.tkeys >= 0).sum() != len(ta):
                fail("hash tables out of sync with edge/triangle arrays")
            for s, col in enumerate(("ab", "ac", "bc")):
                x = {"a": ta, "b": tb, "c": tc}
                e = self.te[: len(ta), s]
                if not (np.array_equal(eu[e], x[col[0]]) and np.array_equal(ev[e], x[col[1]])):
                    fail("triangle edge ids inconsistent")
            if not np.array_equal(self.recount_occupancy(), self.occ):
                fail("incremental occupancy differs from recount")

    # -------------------------------------------------------------- snapshots

    def to_dict(self) -> dict:
        eu, ev, ew = self.edges()
        ta, tb, tc, tw = self.triangles()
        return {
            "format": "triadic-snapshot",
            "version": SNAPSHOT_VERSION,
            "params": self.params.as_strings(),
            "seed": self.seed,
            "rng": {"algorithm": RNG_ALGORITHM, "state": self.rng.bit_generator.state},
            "n": self.n,
            "caps": {"w": self.w_cap, "d": self.d_cap},
            "vertices": {
                "weight": self.weights().tolist(),
                "degree": self.degrees().tolist(),
                "birth": self.births().tolist(),
            },
            "edges": np.stack([eu, ev, ew], axis=1).tolist(),
            "triangles": np.stack([ta, tb, tc, tw], axis=1).tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "GraphState":
        if data.get("format") != "triadic-snapshot" or data.get("version") != SNAPSHOT_VERSION:
            raise ValueError("not a version-1 triadic snapshot")
        params = ModelParams(*(Fraction(data["params"][k]) for k in ("p", "q", "r")))
        verts = data["vertices"]
        nv = len(verts["weight"])
        edges = np.asarray(data["edges"], dtype=np.int64).reshape(-1, 3)
        tris = np.asarray(data["triangles"], dtype=np.int64).reshape(-1, 4)
        state = cls(params, data["seed"], data["caps"]["w"], data["caps"]["d"], capacity=1)
        state._alloc(nv, len(edges), len(tris))
        state.weight[:nv] = verts["weight"]
        state.degree[:nv] = verts["degree"]
        state.birth[:nv] = verts["birth"]
        ne, nt = len(edges), len(tris)
        state.eu[:ne], state.ev[:ne], state.ew[:ne] = edges.T
        state.ta[:nt], state.tb[:nt], state.tc[:nt], state.tw[:nt] = tris.T
        state.etree = K.fenwick_build(state.ew, ne, len(state.eu))
        state.ttree = K.fenwick_build(state.tw, nt, len(state.ta))
        for i, (u, v, _) in enumerate(edges.tolist()):
            K.ht_insert(state.ekeys, state.evals, (u << K.SHIFT) | v, i)
        for i, (a, b, c, _) in enumerate(tris.tolist()):
            for s, (x, y) in enumerate(((a, b), (a, c), (b, c))):
                state.te[i, s] = K.ht_get(state.ekeys, state.evals, (x << K.SHIFT) | y)
            K.ht_insert(state.tkeys, state.tvals, (int(state.te[i, 0]) << K.SHIFT) | c, i)
        state.ctr[:] = (data["n"], nv, ne, nt)
        state.occ[:] = state.recount_occupancy()
        state.rng.bit_generator.state = data["rng"]["state"]
        return state

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), separators=(",", ":")))

    @classmethod
    def load(cls, path) -> "GraphState":
        return cls.from_dict(json.loads(Path(path).read_text()))


def init(params: ModelParams, seed: int = 0, w_cap: int = 64, d_cap: int = 128,
         capacity: int = 1024) -> GraphState:
    """A single triangle of weight 1 on vertices -2, -1, 0 with unit edges."""
    state = GraphState(params, seed, w_cap, d_cap, capacity)
    state.weight[:3] = 1
    state.degree[:3] = 2
    for eid, (u, v) in enumerate(((0, 1), (0, 2), (1, 2))):
        state.eu[eid], state.ev[eid], state.ew[eid] = u, v, 1
        K.ht_insert(state.ekeys, state.evals, (u << K.SHIFT) | v, eid)
        K.fenwick_add(state.etree, eid, 1)
    state.ta[0], state.tb[0], state.tc[0], state.tw[0] = 0, 1, 2, 1
    state.te[0] = (0, 1, 2)
    K.ht_insert(state.tkeys, state.tvals, (0 << K.SHIFT) | 2, 0)
    K.fenwick_add(state.ttree, 0, 1)
    state.ctr[:] = (0, 3, 3, 1)
    state.occ[:] = state.recount_occupancy()
    return state


def step(state: GraphState) -> StepOutcome:
    return state.step()


def run(state: GraphState, steps: int, checkpoints: Iterable[int] | None = None,
        track: Iterable[int] = (), debug: bool = False) -> Iterator[Checkpoint]:
    """Advance ``steps`` steps, yielding a Checkpoint at each absolute step in ``checkpoints``.

    Without checkpoints only the final state is reported.  In debug mode every
    step is followed by the weight/degree identities and each checkpoint by
    the full structural check; otherwise the identities are checked at
    checkpoints only.
    """
    start = state.n
    end = start + int(steps)
    if steps < 0:
        raise ValueError("steps must be >= 0")
    if steps == 0:
        return
    cps = [end] if checkpoints is None else [int(c) for c in checkpoints]
    if any(b <= a for a, b in zip(cps, cps[1:])):
        raise ValueError("checkpoints must be strictly increasing")
    if cps and (cps[0] <= start or cps[-1] > end):
        raise ValueError(f"checkpoints must lie in ({start}, {end}]")
    track = list(track)
    state.reserve(end - start)
    for cp in cps:
        if debug:
            while state.n < cp:
                state.advance(1)
                state.check_invariants(full=False)
            state.check_invariants()
        else:
            state.advance(cp - state.n)
            state.check_invariants(full=False)
        yield state.checkpoint(track)
    if state.n < end:
        state.advance(end - state.n)


class WeightedIndex:
    """Append-only collection with integer weights and O(log m) proportional sampling."""

    def __init__(self, capacity: int = 16):
        self._size = _pow2_at_least(max(1, capacity))
        self._tree = np.zeros(self._size + 1, dtype=np.int64)
        self._weights = np.zeros(self._size, dtype=np.int64)
        self._count = 0
        self.total = 0

    def __len__(self):
        return self._count

    def append(self, weight: int = 1) -> int:
        if weight <= 0:
            raise ValueError("weights must be positive")
        if self._count == self._size:
            self._size *= 2
            w = np.zeros(self._size, dtype=np.int64)
            w[: self._count] = self._weights[: self._count]
            self._weights = w
            self._tree = K.fenwick_build(self._weights, self._count, self._size)
        i = self._count
        self._count += 1
        self._weights[i] = weight
        K.fenwick_add(self._tree, i, weight)
        self.total += weight
        return i

    def increment(self, i: int, delta: int = 1):
        if not 0 <= i < self._count:
            raise IndexError(i)
        self._weights[i] += delta
        K.fenwick_add(self._tree, i, delta)
        self.total += delta

    def weight(self, i: int) -> int:
        return int(self._weights[i])

    def sample(self, rng: np.random.Generator) -> int:
        if self._count == 0:
            raise IndexError("sample from an empty index")
        return int(K.fenwick_find(self._tree, int(rng.integers(0, self.total))))


def sample_uniform_distinct(rng: np.random.Generator, count: int, population: int) -> frozenset[int]:
    """Uniformly random ``count``-subset (count in {2, 3}) of range(population)."""
    if count not in (2, 3):
        raise ValueError("count must be 2 or 3")
    if population < count:
        raise ValueError(f"cannot choose {count} distinct out of {population}")
    out = np.empty(3, dtype=np.int64)
    K.uniform_distinct(rng, population, count, out)
    return frozenset(int(x) for x in out[:count])


def describe_backend() -> dict:
    return {"kernels": backend_name(), "rng": RNG_ALGORITHM, "numpy": np.__version__}
