"""Finite configuration digraph and topological correctness analyses.

The digraph induced on the configurations reachable from c0 is explored
breadth-first with deterministic node numbering (nodes in discovery order,
successors scanned in sorted reaction-id order).  Strongly connected
components come from scipy's compiled Tarjan; escaping-reaction sets, stab/halt
sets, weak/strong correctness verdicts and pitfall detection are all vectorized
over numpy edge arrays.

Void reactions label only self-loops, so they are not materialized as edges;
every query that logically involves them (halting nodes, fairness witnesses)
accounts for them explicitly.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .core import (
    Config,
    Crn,
    DensityExceeded,
    StateBudgetExceeded,
    applicable,
    conf_total,
)

__all__ = [
    "TargetSetZ",
    "DigraphAnalysis",
    "CorrectnessVerdict",
    "explore",
    "stab_halt_sets",
    "check_weak_correctness",
    "check_strong_correctness",
    "find_pitfalls",
    "target_set_from_interface",
]


@dataclass(frozen=True)
class TargetSetZ:
    """Membership predicate over configurations (pure, stable under equality)."""

    name: str
    contains: Callable  # Config -> bool
    matrix: Callable | None = None  # (N x S count matrix) -> bool[N], optional fast path

    def member_array(self, counts: np.ndarray) -> np.ndarray:
        if self.matrix is not None:
            return np.asarray(self.matrix(counts), dtype=bool)
        return np.fromiter(
            (self.contains(tuple(int(x) for x in row)) for row in counts),
            dtype=bool,
            count=len(counts),
        )


def target_set_from_interface(crn: Crn, interface, c0: Config) -> TargetSetZ:
    """Z_I(c0): configurations whose interface vector is correct for mu(c0)."""
    from .core import interface_vector

    mu0 = interface_vector(interface, c0)
    mapping = np.array(interface.mapping, dtype=np.int64)
    n_vals = len(interface.values)

    def contains(c):
        return interface.correctness(mu0, interface_vector(interface, c))

    def matrix(counts):
        mu = np.zeros((len(counts), n_vals), dtype=np.int64)
        np.add.at(mu.T, mapping, counts.T.astype(np.int64))
        return np.fromiter(
            (interface.correctness(mu0, tuple(row)) for row in mu),
            dtype=bool,
            count=len(counts),
        )

    return TargetSetZ(name=f"Z_I({mu0})", contains=contains, matrix=matrix)


def _rev_csr(src, dst, n):
    order = np.argsort(dst, kind="stable")
    return src[order], np.searchsorted(dst[order], np.arange(n + 1))


def _gather(ptr, data, nodes):
    """data[ptr[v]:ptr[v+1]] concatenated over nodes, vectorized."""
    starts = ptr[nodes]
    lens = ptr[nodes + 1] - starts
    total = int(lens.sum())
    if total == 0:
        return data[:0]
    idx = np.repeat(starts, lens) + np.arange(total) - np.repeat(np.cumsum(lens) - lens, lens)
    return data[idx]


class DigraphAnalysis:
    """Explored reachable digraph with SCCs and escaping-reaction sets."""

    def __init__(self, crn, c0, phi, counts, node_index, edge_src, edge_rid, edge_dst):
        self.crn: Crn = crn
        self.c0: Config = c0
        self.phi = Fraction(phi)
        self.counts: np.ndarray = counts  # N x S
        self.node_index: dict = node_index  # config bytes -> id
        self.edge_src = edge_src  # non-void edges only
        self.edge_rid = edge_rid
        self.edge_dst = edge_dst
        self.n_nodes = len(counts)
        self._analyze()

    def _analyze(self):
        n = self.n_nodes
        if len(self.edge_src):
            g = csr_matrix(
                (np.ones(len(self.edge_src), dtype=np.int8), (self.edge_src, self.edge_dst)),
                shape=(n, n),
            )
            self.n_scc, self.scc_id = connected_components(g, directed=True, connection="strong")
        else:
            self.n_scc, self.scc_id = n, np.arange(n, dtype=np.int32)
        self.scc_size = np.bincount(self.scc_id, minlength=self.n_scc)
        self.nv_outdeg = np.bincount(self.edge_src, minlength=n)

        # Escaping reactions per component: alpha escapes S iff alpha is
        # applicable at every node of S and every alpha-edge leaves S.
        src_scc = self.scc_id[self.edge_src]
        dst_scc = self.scc_id[self.edge_dst]
        esc: dict[int, set] = {}
        by_rid = np.argsort(self.edge_rid, kind="stable")
        rid_sorted = self.edge_rid[by_rid]
        bounds = np.searchsorted(rid_sorted, np.arange(len(self.crn.reactions) + 1))
        for rid in self.crn.nv_ids:
            sel = by_rid[bounds[rid] : bounds[rid + 1]]
            if len(sel) == 0:
                continue
            stays = src_scc[sel] == dst_scc[sel]
            n_app = np.bincount(src_scc[sel], minlength=self.n_scc)
            n_stay = np.bincount(src_scc[sel[stays]], minlength=self.n_scc)
            good = (n_app == self.scc_size) & (n_stay == 0)
            for comp in np.nonzero(good)[0]:
                esc.setdefault(int(comp), set()).add(int(rid))
        self.escaping: dict[int, frozenset] = {
            c: frozenset(esc.get(c, ())) for c in range(self.n_scc)
        }

        # Components with at least one edge to another component.
        leaves = src_scc != dst_scc
        self.has_outgoing = np.zeros(self.n_scc, dtype=bool)
        self.has_outgoing[src_scc[leaves]] = True
        self.condensation_edges = sorted(
            set(zip(src_scc[leaves].tolist(), dst_scc[leaves].tolist()))
        )

        order = np.argsort(self.edge_src, kind="stable")
        self._fwd_order = order
        self._fwd_indptr = np.searchsorted(self.edge_src[order], np.arange(n + 1))

    def node_id(self, c: Config) -> int:
        return self.node_index[np.asarray(c, dtype=np.int16).tobytes()]

    def config(self, i: int) -> Config:
        return tuple(int(x) for x in self.counts[i])

    def has_node(self, c: Config) -> bool:
        return np.asarray(c, dtype=np.int16).tobytes() in self.node_index

    def out_edges(self, i: int):
        """(rid, dst) pairs at node i, non-void edges only, sorted by rid."""
        sel = self._fwd_order[self._fwd_indptr[i] : self._fwd_indptr[i + 1]]
        return sorted((int(self.edge_rid[e]), int(self.edge_dst[e])) for e in sel)

    def edges_of(self, i: int, include_voids: bool = False):
        pairs = self.out_edges(i)
        if include_voids:
            c = self.config(i)
            for rid in sorted(applicable(self.crn, c)):
                if self.crn.reactions[rid].is_void:
                    pairs.append((rid, i))
            pairs.sort()
        return pairs

    def members(self, comp: int) -> np.ndarray:
        return np.nonzero(self.scc_id == comp)[0]

    def _backward_closure(self, seed: np.ndarray, edge_mask=None) -> np.ndarray:
        """Nodes from which the seed set is reachable along (masked) edges."""
        src, dst = self.edge_src, self.edge_dst
        if edge_mask is not None:
            src, dst = src[edge_mask], dst[edge_mask]
        data, ptr = _rev_csr(src, dst, self.n_nodes)
        reached = seed.copy()
        frontier = np.nonzero(seed)[0]
        while len(frontier):
            preds = np.unique(_gather(ptr, data, frontier))
            new = preds[~reached[preds]]
            reached[new] = True
            frontier = new
        return reached


def explore(crn: Crn, c0: Config, max_states: int = 10**6, phi=None) -> DigraphAnalysis:
    """BFS closure of c0 under all reactions, with SCC and escaping analysis.

    Raises StateBudgetExceeded past max_states and DensityExceeded if any
    configuration's molecular count exceeds density_bound * ||c0||.
    """
    if phi is None:
        phi = conf_total(c0)
    n0 = conf_total(c0)
    cap = crn.density_bound * n0
    nv = crn.nv_arr
    r1 = crn.r1[nv]
    r2 = crn.r2[nv]
    delta = crn.delta[nv].astype(np.int16)
    need1 = np.ones(len(nv), dtype=np.int16)
    need1[r2 == r1] = 2
    has2 = (r2 >= 0) & (r2 != r1)

    counts0 = np.asarray(c0, dtype=np.int16)[None, :]
    node_index: dict = {counts0.tobytes(): 0}
    all_counts = [counts0]
    edge_src_parts, edge_rid_parts, edge_dst_parts = [], [], []
    frontier = counts0
    frontier_ids = np.array([0], dtype=np.int32)
    n_nodes = 1

    while len(frontier):
        tot = frontier.sum(axis=1, dtype=np.int64)
        if (tot > cap).any():
            raise DensityExceeded(f"molecular count exceeded {cap} = density_bound * ||c0||")
        m = frontier[:, r1] >= need1
        m[:, has2] &= frontier[:, r2[has2]] >= 1
        pairs = np.argwhere(m)  # node-major, then sorted reaction order
        if len(pairs) == 0:
            break
        succ = frontier[pairs[:, 0]] + delta[pairs[:, 1]]
        srcs = frontier_ids[pairs[:, 0]]
        rids = nv[pairs[:, 1]].astype(np.int32)

        keys = np.ascontiguousarray(succ).view(
            np.dtype((np.void, succ.shape[1] * succ.itemsize))
        ).ravel()
        uniq, first_idx, inverse = np.unique(keys, return_index=True, return_inverse=True)
        order = np.argsort(first_idx, kind="stable")  # first-occurrence order

        ids_of_uniq = np.empty(len(uniq), dtype=np.int32)
        new_rows = []
        for pos in order:
            key = uniq[pos].tobytes()
            nid = node_index.get(key)
            if nid is None:
                nid = n_nodes
                node_index[key] = nid
                n_nodes += 1
                new_rows.append(succ[first_idx[pos]])
                if n_nodes > max_states:
                    raise StateBudgetExceeded(f"more than {max_states} states")
            ids_of_uniq[pos] = nid

        edge_src_parts.append(srcs)
        edge_rid_parts.append(rids)
        edge_dst_parts.append(ids_of_uniq[inverse])

        if new_rows:
            new_mat = np.stack(new_rows)
            all_counts.append(new_mat)
            frontier = new_mat
            frontier_ids = np.arange(n_nodes - len(new_rows), n_nodes, dtype=np.int32)
        else:
            break

    counts = np.concatenate(all_counts, axis=0)
    if edge_src_parts:
        edge_src = np.concatenate(edge_src_parts).astype(np.int32)
        edge_rid = np.concatenate(edge_rid_parts)
        edge_dst = np.concatenate(edge_dst_parts).astype(np.int32)
    else:
        edge_src = np.zeros(0, dtype=np.int32)
        edge_rid = np.zeros(0, dtype=np.int32)
        edge_dst = np.zeros(0, dtype=np.int32)
    return DigraphAnalysis(crn, c0, phi, counts, node_index, edge_src, edge_rid, edge_dst)


def stab_halt_sets(analysis: DigraphAnalysis, Z: TargetSetZ):
    """(stab(Z), halt(Z)) as boolean node arrays; halt(Z) ⊆ stab(Z)."""
    member = Z.member_array(analysis.counts)
    can_reach_bad = analysis._backward_closure(~member)
    stab = ~can_reach_bad
    halt = member & (analysis.nv_outdeg == 0)
    return stab, halt


@dataclass
class CorrectnessVerdict:
    correct: bool
    mode: str
    fairness: str
    witness_component: list | None = None  # node ids of a trapped component
    witness_lasso: tuple | None = None  # (stem rids, cycle rids)

    def __bool__(self):
        return self.correct


def _target(analysis, Z, mode):
    stab, halt = stab_halt_sets(analysis, Z)
    if mode == "stab":
        return stab
    if mode == "halt":
        return halt
    raise ValueError(f"mode must be 'stab' or 'halt', got {mode!r}")


def check_weak_correctness(analysis: DigraphAnalysis, Z: TargetSetZ, mode: str) -> CorrectnessVerdict:
    """Every component either admits an escaping reaction or lies in stab/halt(Z).

    On failure the verdict carries a witness component together with a weakly
    fair lasso (stem reactions from c0, then a cycle) trapped inside it.
    """
    target = _target(analysis, Z, mode)
    n_in_target = np.bincount(analysis.scc_id, weights=target, minlength=analysis.n_scc)
    comp_ok = n_in_target == analysis.scc_size
    for comp in range(analysis.n_scc):
        if not comp_ok[comp] and not analysis.escaping[comp]:
            stem, cycle = _build_lasso(analysis, comp)
            return CorrectnessVerdict(
                False, mode, "weak",
                witness_component=[int(i) for i in analysis.members(comp)],
                witness_lasso=(stem, cycle),
            )
    return CorrectnessVerdict(True, mode, "weak")


def check_strong_correctness(analysis: DigraphAnalysis, Z: TargetSetZ, mode: str) -> CorrectnessVerdict:
    """Like the weak check but with the weaker escape condition: any edge out."""
    target = _target(analysis, Z, mode)
    n_in_target = np.bincount(analysis.scc_id, weights=target, minlength=analysis.n_scc)
    comp_ok = (n_in_target == analysis.scc_size) | analysis.has_outgoing
    if comp_ok.all():
        return CorrectnessVerdict(True, mode, "strong")
    comp = int(np.nonzero(~comp_ok)[0][0])
    return CorrectnessVerdict(
        False, mode, "strong",
        witness_component=[int(i) for i in analysis.members(comp)],
    )


def _path_in_comp(analysis, comp, a, b):
    """Reaction path a -> b using only edges inside component comp."""
    if a == b:
        return []
    in_comp = analysis.scc_id == comp
    prev = {a: None}
    frontier = [a]
    while frontier:
        nxt = []
        for u in frontier:
            for rid, v in analysis.out_edges(u):
                if in_comp[v] and v not in prev:
                    prev[v] = (u, rid)
                    if v == b:
                        path = []
                        w = b
                        while prev[w] is not None:
                            u0, r0 = prev[w]
                            path.append(r0)
                            w = u0
                        return path[::-1]
                    nxt.append(v)
        frontier = nxt
    raise RuntimeError("component not strongly connected (internal error)")


def _build_lasso(analysis: DigraphAnalysis, comp: int):
    """Weakly fair lasso trapped in a no-escape component.

    Mirrors the constructive direction of the non-escaping-component lemma:
    for every reaction alpha pick an in-component edge labeled alpha, or a
    node where alpha is inapplicable, and thread one closed walk through all
    of them.  Voids applicable everywhere in the component are scheduled once
    per cycle as explicit self-loops.
    """
    crn = analysis.crn
    members = [int(i) for i in analysis.members(comp)]
    member_set = set(members)
    base = members[0]

    app_cache = {i: applicable(crn, analysis.config(i)) for i in members}
    in_edges_by_rid: dict[int, tuple] = {}
    for i in members:
        for rid, v in analysis.out_edges(i):
            if v in member_set and rid not in in_edges_by_rid:
                in_edges_by_rid[rid] = (i, v)

    edge_targets = {}   # rid -> in-component alpha-labeled edge to traverse
    visit_targets = {}  # rid -> node where alpha is inapplicable
    void_targets = []   # voids applicable everywhere: schedule once per cycle
    for r in crn.reactions:
        rid = r.id
        if rid in in_edges_by_rid:
            edge_targets[rid] = in_edges_by_rid[rid]
            continue
        inapp_at = next((i for i in members if rid not in app_cache[i]), None)
        if inapp_at is not None:
            visit_targets[rid] = inapp_at
        elif r.is_void:
            void_targets.append(rid)
        else:
            raise RuntimeError(f"reaction {rid} escapes component {comp} (internal error)")

    cycle: list[int] = sorted(void_targets)  # self-loops, scheduled at base
    cur = base
    for rid, (u, v) in sorted(edge_targets.items()):
        cycle += _path_in_comp(analysis, comp, cur, u)
        cycle.append(rid)
        cur = v
    for rid, u in sorted(visit_targets.items()):
        cycle += _path_in_comp(analysis, comp, cur, u)
        cur = u
    cycle += _path_in_comp(analysis, comp, cur, base)

    stem: list[int] = []
    if base != 0:
        prev = {0: None}
        frontier = [0]
        found = False
        while frontier and not found:
            nxt = []
            for u in frontier:
                for rid, v in analysis.out_edges(u):
                    if v not in prev:
                        prev[v] = (u, rid)
                        if v == base:
                            found = True
                            break
                        nxt.append(v)
                if found:
                    break
            frontier = nxt
        w = base
        while prev[w] is not None:
            u0, r0 = prev[w]
            stem.append(r0)
            w = u0
        stem.reverse()
    return stem, cycle


def _high_edge_mask(analysis: DigraphAnalysis, s) -> np.ndarray:
    """Edges whose reaction propensity at the source exceeds s/phi (exact)."""
    crn = analysis.crn
    thr = Fraction(s) / analysis.phi
    tn, td = thr.numerator, thr.denominator
    phi_i = analysis.phi
    if phi_i.denominator != 1:
        raise ValueError("pitfall detection requires an integer volume")
    phi_i = phi_i.numerator
    counts = analysis.counts.astype(np.int64)
    src = analysis.edge_src
    rid = analysis.edge_rid
    high = np.zeros(len(src), dtype=bool)
    for r in np.unique(rid):
        sel = rid == r
        k = crn.class_size[r]
        a, b = int(crn.r1[r]), int(crn.r2[r])
        ca = counts[src[sel], a]
        if b < 0:  # c(A)/k > tn/td
            high[sel] = ca * td > tn * k
        elif b == a:  # C(c,2)/(phi k) > tn/td
            high[sel] = ca * (ca - 1) * td > 2 * tn * k * phi_i
        else:
            cb = counts[src[sel], b]
            high[sel] = ca * cb * td > tn * k * phi_i
    return high


def find_pitfalls(analysis: DigraphAnalysis, Z: TargetSetZ, s, mode: str) -> set:
    """Nodes from which every path to stab/halt(Z) uses a low-propensity edge.

    An edge is high iff its reaction's propensity at the source configuration
    exceeds s/phi; pitfalls are the reachable nodes with no all-high path into
    the target set (nodes already inside the set are never pitfalls).
    """
    if Fraction(s) <= 0:
        raise ValueError("s must be positive")
    target = _target(analysis, Z, mode)
    high = _high_edge_mask(analysis, s)
    good = analysis._backward_closure(target.copy(), edge_mask=high)
    return {int(i) for i in np.nonzero(~good)[0]}
