"""Dependency graphs, fractional independent vertex covers and fractional
chromatic numbers.

A fractional independent vertex cover of a graph G is a family
{(I_j, w_j)} of independent sets with weights w_j in (0, 1] such that for
every vertex v the weights of the classes containing v sum exactly to 1.
The fractional chromatic number chi_f(G) is the minimum total weight over
such covers.  The one construction needed in closed form is the
bipartite-ranking (rook) graph on positive x negative index pairs, whose
chi_f equals max(n_pos, n_neg).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, SizeError, StructuralError

COVER_SUM_TOL = 1e-12  # per-vertex weight sums must hit 1 to this tolerance
_LP_TOL = 1e-9


@dataclass(frozen=True)
class DependencyGraph:
    """Undirected simple graph on vertices 0..n-1; edges connect dependent pairs."""

    n_vertices: int
    edges: frozenset[tuple[int, int]]
    label: str = ""

    def __post_init__(self):
        if self.n_vertices < 0:
            raise DomainError("n_vertices must be nonnegative")
        for u, v in self.edges:
            if u == v:
                raise StructuralError(f"self-loop at vertex {u}")
            if not (0 <= u < self.n_vertices and 0 <= v < self.n_vertices):
                raise StructuralError(f"edge ({u},{v}) outside vertex range")
            if u > v:
                raise StructuralError("edges must be stored as (min, max) pairs")

    @classmethod
    def from_edges(cls, n_vertices, edge_iter, label=""):
        """Build a graph, normalizing edge orientation and dropping duplicates."""
        edges = frozenset(
            (min(u, v), max(u, v)) for u, v in edge_iter
        )
        return cls(n_vertices=n_vertices, edges=edges, label=label)

    def has_edge(self, u, v):
        return (min(u, v), max(u, v)) in self.edges

    def neighbors(self, v):
        out = set()
        for a, b in self.edges:
            if a == v:
                out.add(b)
            elif b == v:
                out.add(a)
        return out

    def degree(self, v):
        return len(self.neighbors(v))

    def is_independent(self, vertices):
        vs = sorted(vertices)
        for i, u in enumerate(vs):
            for v in vs[i + 1:]:
                if (u, v) in self.edges:
                    return False
        return True

    def to_text(self):
        """Edge-list format: n_vertices on line 1, one `u v` pair per line."""
        lines = [str(self.n_vertices)]
        lines.extend(f"{u} {v}" for u, v in sorted(self.edges))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text, label=""):
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines:
            raise StructuralError("empty graph text")
        n = int(lines[0])
        edges = []
        for ln in lines[1:]:
            u, v = ln.split()
            edges.append((int(u), int(v)))
        return cls.from_edges(n, edges, label=label)


@dataclass(frozen=True)
class FractionalCover:
    """Weighted family of independent sets covering every vertex with weight 1."""

    classes: tuple[tuple[frozenset[int], float], ...]
    graph: DependencyGraph

    @property
    def total_weight(self):
        return float(sum(w for _, w in self.classes))

    def vertex_weight_sums(self):
        sums = np.zeros(self.graph.n_vertices)
        for vs, w in self.classes:
            for v in vs:
                sums[v] += w
        return sums

    def to_text(self):
        """One `weight: v1 v2 ...` line per class."""
        lines = []
        for vs, w in self.classes:
            lines.append(f"{w!r}: " + " ".join(str(v) for v in sorted(vs)))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text, graph):
        classes = []
        for ln in text.splitlines():
            if not ln.strip():
                continue
            w_part, vs_part = ln.split(":", 1)
            vs = frozenset(int(v) for v in vs_part.split())
            classes.append((vs, float(w_part)))
        return cls(classes=tuple(classes), graph=graph)


@dataclass
class CoverReport:
    ok: bool
    violations: list[str] = field(default_factory=list)


def validate_cover(graph: DependencyGraph, cover: FractionalCover) -> CoverReport:
    """Check a fractional cover against its graph.

    Violations reported: a class that is not an independent set, a class
    weight outside (0, 1], and a vertex whose class weights do not sum to 1
    (tolerance COVER_SUM_TOL).
    """
    if cover.graph.n_vertices != graph.n_vertices:
        raise StructuralError(
            f"cover built for {cover.graph.n_vertices} vertices, graph has "
            f"{graph.n_vertices}"
        )
    violations = []
    for idx, (vs, w) in enumerate(cover.classes):
        for v in vs:
            if not (0 <= v < graph.n_vertices):
                raise StructuralError(f"class {idx} contains vertex {v} out of range")
        if not (0.0 < w <= 1.0):
            violations.append(f"class {idx}: weight {w} outside (0, 1]")
        if not graph.is_independent(vs):
            violations.append(f"class {idx}: not an independent set")
    sums = cover.vertex_weight_sums()
    for v in range(graph.n_vertices):
        if abs(sums[v] - 1.0) > COVER_SUM_TOL:
            violations.append(f"vertex {v}: weight sum {sums[v]!r} != 1")
    if graph.n_vertices > 0 and cover.total_weight < 1.0 - COVER_SUM_TOL:
        violations.append(f"total weight {cover.total_weight} < 1")
    return CoverReport(ok=not violations, violations=violations)


def bipartite_ranking_graph(n_pos: int, n_neg: int):
    """Dependency graph of all (positive, negative) index pairs, plus an
    optimal equitable cover.

    Vertices are pairs (p, q) flattened as p * n_neg + q; two pairs are
    dependent iff they share p or q.  The returned cover has
    max(n_pos, n_neg) unit-weight classes, each a maximum independent set
    (a partial matching), so total weight equals chi_f = max(n_pos, n_neg).
    """
    if n_pos < 1 or n_neg < 1:
        raise DomainError("n_pos and n_neg must be >= 1")
    n = n_pos * n_neg
    vid = lambda p, q: p * n_neg + q
    edges = []
    for p, q in itertools.product(range(n_pos), range(n_neg)):
        for q2 in range(q + 1, n_neg):
            edges.append((vid(p, q), vid(p, q2)))
        for p2 in range(p + 1, n_pos):
            edges.append((vid(p, q), vid(p2, q)))
    graph = DependencyGraph.from_edges(n, edges, label=f"bipartite({n_pos},{n_neg})")

    n_classes = max(n_pos, n_neg)
    classes = []
    for c in range(n_classes):
        if n_pos >= n_neg:
            members = frozenset(vid((q + c) % n_pos, q) for q in range(n_neg))
        else:
            members = frozenset(vid(p, (p + c) % n_neg) for p in range(n_pos))
        classes.append((members, 1.0))
    cover = FractionalCover(classes=tuple(classes), graph=graph)
    return graph, cover


def maximal_independent_sets(graph: DependencyGraph):
    """All maximal independent sets, by exhaustive subset scan (n <= ~16)."""
    n = graph.n_vertices
    if n == 0:
        return []
    adj_masks = [0] * n
    for u, v in graph.edges:
        adj_masks[u] |= 1 << v
        adj_masks[v] |= 1 << u
    independent = []
    for mask in range(1, 1 << n):
        ok = True
        m = mask
        while m:
            v = (m & -m).bit_length() - 1
            if adj_masks[v] & mask:
                ok = False
                break
            m &= m - 1
        if ok:
            independent.append(mask)
    indep_set = set(independent)
    maximal = []
    for mask in independent:
        if any(
            (mask | (1 << v)) in indep_set
            for v in range(n)
            if not mask & (1 << v)
        ):
            continue
        maximal.append(frozenset(v for v in range(n) if mask & (1 << v)))
    return maximal


def _simplex_max(A, b, c):
    """Solve max c.y  s.t.  A y <= b, y >= 0 with a dense tableau simplex.

    Requires b >= 0 so the slack basis is feasible.  Uses Bland's rule, so
    it terminates.  Returns (objective, y, duals) where duals are the
    optimal multipliers of the <= constraints.
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    c = np.asarray(c, dtype=float)
    m, n = A.shape
    if (b < 0).any():
        raise ValueError("simplex requires b >= 0")
    # tableau: [A | I | b] over constraint rows, [-c | 0 | 0] objective row
    T = np.zeros((m + 1, n + m + 1))
    T[:m, :n] = A
    T[:m, n:n + m] = np.eye(m)
    T[:m, -1] = b
    T[m, :n] = -c
    basis = list(range(n, n + m))
    while True:
        obj_row = T[m, :n + m]
        entering = -1
        for j in range(n + m):
            if obj_row[j] < -_LP_TOL:
                entering = j  # Bland: smallest eligible index
                break
        if entering < 0:
            break
        ratios = []
        for i in range(m):
            if T[i, entering] > _LP_TOL:
                ratios.append((T[i, -1] / T[i, entering], basis[i], i))
        if not ratios:
            raise ValueError("LP unbounded")
        ratios.sort(key=lambda r: (r[0], r[1]))
        leaving_row = ratios[0][2]
        piv = T[leaving_row, entering]
        T[leaving_row] /= piv
        for i in range(m + 1):
            if i != leaving_row and abs(T[i, entering]) > 0:
                T[i] -= T[i, entering] * T[leaving_row]
        basis[leaving_row] = entering
    y = np.zeros(n)
    for i, bv in enumerate(basis):
        if bv < n:
            y[bv] = T[i, -1]
    duals = T[m, n:n + m].copy()
    return float(T[m, -1]), y, duals


def _exactify(classes, n_vertices):
    """Reduce a >=1 covering to an exact =1 cover of equal total weight.

    Excess coverage at a vertex v is shed by fractionally splitting classes
    containing v into (I, w - d) and (I \\ {v}, d); subsets of independent
    sets stay independent and every other vertex keeps its coverage.
    """
    classes = [(set(vs), float(w)) for vs, w in classes if w > _LP_TOL]
    for v in range(n_vertices):
        excess = sum(w for vs, w in classes if v in vs) - 1.0
        if excess <= _LP_TOL:
            continue
        new_classes = []
        for vs, w in classes:
            if v in vs and excess > _LP_TOL:
                d = min(w, excess)
                excess -= d
                if w - d > _LP_TOL:
                    new_classes.append((vs, w - d))
                reduced = vs - {v}
                if reduced:
                    new_classes.append((reduced, d))
            else:
                new_classes.append((vs, w))
        classes = new_classes
    merged: dict[frozenset[int], float] = {}
    for vs, w in classes:
        key = frozenset(vs)
        merged[key] = merged.get(key, 0.0) + w
    out = [(vs, min(w, 1.0)) for vs, w in sorted(merged.items(), key=lambda kv: sorted(kv[0]))
           if w > _LP_TOL]
    return tuple(out)


def chromatic_fractional_exact(graph: DependencyGraph):
    """Exact chi_f via the covering LP over all maximal independent sets.

    Solves the dual packing LP (max sum y_v s.t. sum_{v in I} y_v <= 1 per
    maximal independent set I) with the in-house simplex; the constraint
    multipliers are optimal cover weights.  Exact mode is limited to 12
    vertices; larger graphs should use greedy_cover.
    """
    n = graph.n_vertices
    if n > 12:
        raise SizeError(
            f"exact mode handles at most 12 vertices (got {n}); use greedy_cover"
        )
    if n == 0:
        return 0.0, FractionalCover(classes=(), graph=graph)
    sets = maximal_independent_sets(graph)
    A = np.zeros((len(sets), n))
    for i, s in enumerate(sets):
        for v in s:
            A[i, v] = 1.0
    chi, y, duals = _simplex_max(A, np.ones(len(sets)), np.ones(n))
    raw = [(sets[i], duals[i]) for i in range(len(sets)) if duals[i] > _LP_TOL]
    # strong duality sanity check: primal cover weight equals packing optimum
    total = sum(w for _, w in raw)
    if abs(total - chi) > 1e-7 * max(1.0, chi):
        raise RuntimeError(f"LP duality gap: cover weight {total} vs optimum {chi}")
    coverage = np.zeros(n)
    for vs, w in raw:
        for v in vs:
            coverage[v] += w
    if (coverage < 1.0 - 1e-7).any():
        raise RuntimeError("LP duals do not cover every vertex")
    cover = FractionalCover(classes=_exactify(raw, n), graph=graph)
    report = validate_cover(graph, cover)
    if not report.ok:
        raise RuntimeError(f"exact cover failed validation: {report.violations}")
    return chi, cover


def greedy_cover(graph: DependencyGraph) -> FractionalCover:
    """Integer-weight cover from greedy proper coloring.

    Vertices are colored in largest-degree-first order (ties by vertex id)
    with the smallest color unused among neighbors; each color class gets
    weight 1.  Total weight is an upper bound on chi_f.
    """
    n = graph.n_vertices
    order = sorted(range(n), key=lambda v: (-graph.degree(v), v))
    color = {}
    for v in order:
        used = {color[u] for u in graph.neighbors(v) if u in color}
        c = 0
        while c in used:
            c += 1
        color[v] = c
    n_colors = max(color.values()) + 1 if color else 0
    classes = []
    for c in range(n_colors):
        members = frozenset(v for v in range(n) if color[v] == c)
        classes.append((members, 1.0))
    return FractionalCover(classes=tuple(classes), graph=graph)
