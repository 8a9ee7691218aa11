"""Marked metric graphs: the volume-one points displacement is computed on.

A marked metric graph is a rank-n graph with positive rational edge
lengths summing to 1 together with a marking: one closed edge path per
basis letter, all based at a common vertex, whose classes generate the
fundamental group.  Stretching factors between such points are maxima
over finitely many candidate loops (embedded circles, figure-eights and
barbells), and the displacement of an automorphism at a point is the
stretch to the point with the twisted marking.

Edge paths reuse the word machinery with the edge set as alphabet: edge
``e`` traversed from its first to its second endpoint is byte ``2e``, the
reverse ``2e+1``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from outfn import stallings, words
from outfn.autom import Endo
from outfn.cmt import TopGraph, maximal_trees, _tree_paths


def _total(tup) -> int:
    return sum(len(w) for w in tup)


def _nielsen_invert(images: Sequence[bytes], rank: int) -> tuple[bytes, ...]:
    """Invert a bijective endomorphism given by basis images.

    Nielsen-reduces the image tuple, recording every elementary move as
    an endomorphism of the domain; plateaus of the total length are
    searched exhaustively for a strictly decreasing move.  A generating
    tuple always ends at a signed permutation of the basis; anything else
    raises ``ValueError``.
    """
    t = [words.reduce_word(bytes(w)) for w in images]
    v = [bytes((2 * i,)) for i in range(rank)]

    def find_strict(tup):
        invs = [words.inverse(w) for w in tup]
        for i in range(rank):
            for j in range(rank):
                if i == j:
                    continue
                for flip in (0, 1):
                    tj = invs[j] if flip else tup[j]
                    if len(words._merge(tup[i], tj)) < len(tup[i]):
                        return ("mul", i, j, flip, False)
                    if len(words._merge(tj, tup[i])) < len(tup[i]):
                        return ("mul", i, j, flip, True)
        return None

    def apply_move(tup, vimg, mv):
        if mv[0] == "inv":
            i = mv[1]
            tup[i] = words.inverse(tup[i])
            vimg[i] = words.inverse(vimg[i])
            return
        _, i, j, flip, left = mv
        tj = words.inverse(tup[j]) if flip else tup[j]
        vj = words.inverse(vimg[j]) if flip else vimg[j]
        if left:
            tup[i] = words.concat(tj, tup[i])
            vimg[i] = words.concat(vj, vimg[i])
        else:
            tup[i] = words.concat(tup[i], tj)
            vimg[i] = words.concat(vimg[i], vj)

    all_moves = [("inv", i) for i in range(rank)]
    for i in range(rank):
        for j in range(rank):
            if i != j:
                for flip in (0, 1):
                    all_moves.append(("mul", i, j, flip, False))
                    all_moves.append(("mul", i, j, flip, True))

    while _total(t) > rank:
        mv = find_strict(t)
        if mv is not None:
            apply_move(t, v, mv)
            continue
        level = _total(t)
        seen = {tuple(t)}
        frontier = [(t, v)]
        advanced = False
        while frontier and not advanced:
            nxt = []
            for tup, vimg in frontier:
                for mv in all_moves:
                    t2, v2 = list(tup), list(vimg)
                    apply_move(t2, v2, mv)
                    if _total(t2) > level:
                        continue
                    key = tuple(t2)
                    if key in seen:
                        continue
                    seen.add(key)
                    if find_strict(t2) is not None:
                        t, v = t2, v2
                        advanced = True
                        break
                    nxt.append((t2, v2))
                if advanced:
                    break
            frontier = nxt
            if len(seen) > 50_000:
                raise ValueError("images do not generate (plateau search exhausted)")
        if not advanced:
            raise ValueError("images do not generate the free group")
    letters = [w[0] for w in t if len(w) == 1]
    if len(letters) != rank or len({b // 2 for b in letters}) != rank:
        raise ValueError("images do not generate the free group")
    inv = [b""] * rank
    for i, w in enumerate(t):
        b = w[0]
        inv[b // 2] = v[i] if b % 2 == 0 else words.inverse(v[i])
    return tuple(inv)


@dataclass(frozen=True)
class CandidateLoop:
    edge_word: bytes
    shape: str  # "loop", "figure-eight" or "barbell"


class MarkedMetricGraph:
    """Volume-one metric graph with a marking by basis-letter loops.

    Treated as immutable; derived points (twists, collapsed roses) are new
    objects.
    """

    def __init__(self, graph: TopGraph, lengths: Sequence[Fraction], base: int, marking: Sequence[bytes]):
        lengths = tuple(Fraction(x) for x in lengths)
        if len(lengths) != len(graph.edges):
            raise ValueError("one length per edge required")
        if any(x <= 0 for x in lengths):
            raise ValueError("edge lengths must be positive")
        if sum(lengths) != 1:
            raise ValueError("volume must be exactly 1")
        marking = tuple(words.reduce_word(bytes(m)) for m in marking)
        rank = graph.betti
        if len(marking) != rank:
            raise ValueError(f"need {rank} marking loops, got {len(marking)}")
        for m in marking:
            if not m:
                raise ValueError("marking loops must be nontrivial")
            self._check_closed_path(graph, m, base)
        self.graph = graph
        self.lengths = lengths
        self.base = base
        self.marking = marking
        self.rank = rank
        # fixed spanning tree giving coordinates on the non-tree edges
        self.tree = min(maximal_trees(graph), key=sorted)
        drop = [b""] * (2 * len(graph.edges))
        for k, e in enumerate(sorted(set(range(len(graph.edges))) - self.tree)):
            drop[2 * e] = bytes((2 * k,))
            drop[2 * e + 1] = bytes((2 * k + 1,))
        self._drop_table = tuple(drop)
        self._coords = tuple(words.substitute(self._drop_table, m) for m in marking)
        # the marking must generate the fundamental group: folding the wedge
        # of coordinate words has to produce the full rose
        folded = stallings.subgroup_graph(self._coords, rank)
        if stallings.rose_labels(folded) != (1 << rank) - 1:
            raise ValueError("marking loops do not generate the fundamental group")
        self._marking_table = words.build_table(marking)
        self._rewrite_table = None

    @staticmethod
    def _check_closed_path(graph: TopGraph, m: bytes, base: int) -> None:
        cur = base
        for b in m:
            e = b // 2
            if e >= len(graph.edges):
                raise ValueError("marking path uses an unknown edge")
            u, v = graph.edges[e]
            if b % 2 == 0:
                if cur != u:
                    raise ValueError("marking path is not composable")
                cur = v
            else:
                if cur != v:
                    raise ValueError("marking path is not composable")
                cur = u
        if cur != base:
            raise ValueError("marking path must close up at the base vertex")

    # --- lengths -----------------------------------------------------------

    def volume(self) -> Fraction:
        return sum(self.lengths, Fraction(0))

    def edge_word_length(self, ew: bytes) -> Fraction:
        return sum((self.lengths[b // 2] for b in ew), Fraction(0))

    def loop_length(self, w: bytes) -> Fraction:
        """Length of the immersed loop freely homotopic to the marked word."""
        ew = words.substitute(self._marking_table, w)
        core, _ = words.cyclic_strip(ew)
        return self.edge_word_length(core)

    def word_of_loop(self, ew: bytes) -> bytes:
        """Basis word of a closed edge path, read through the marking.

        Defined up to conjugacy (the path need not pass the basepoint).
        """
        if self._rewrite_table is None:
            inv = _nielsen_invert(self._coords, self.rank)
            self._rewrite_table = words.build_table(inv)
        coords = words.substitute(self._drop_table, ew)
        return words.substitute(self._rewrite_table, coords)

    # --- derived points ----------------------------------------------------

    def twist(self, phi: Endo) -> "MarkedMetricGraph":
        """Same metric graph, marking precomposed with the automorphism."""
        if phi.rank != self.rank:
            raise ValueError("rank mismatch")
        marking = tuple(words.substitute(self._marking_table, im) for im in phi.images)
        return MarkedMetricGraph(self.graph, self.lengths, self.base, marking)

    def __repr__(self):
        return (
            f"MarkedMetricGraph(rank={self.rank}, nv={self.graph.nv}, "
            f"edges={self.graph.edges}, lengths={[str(x) for x in self.lengths]})"
        )


def uniform_rose(n: int) -> MarkedMetricGraph:
    """The rose on the standard basis with all petals of length 1/n."""
    return rose_point([Fraction(1, n)] * n)


def rose_point(lengths: Sequence[Fraction]) -> MarkedMetricGraph:
    """Rose with the given petal lengths (must sum to 1), identity marking."""
    n = len(lengths)
    graph = TopGraph(1, tuple((0, 0) for _ in range(n)))
    marking = [bytes((2 * i,)) for i in range(n)]
    return MarkedMetricGraph(graph, lengths, 0, marking)


def tree_marked(graph: TopGraph, lengths: Sequence[Fraction], tree: frozenset[int] | None = None, base: int = 0) -> MarkedMetricGraph:
    """Mark a graph tautologically: letter i is the i-th non-tree edge closed up through the tree."""
    if tree is None:
        tree = min(maximal_trees(graph), key=sorted)
    paths = _tree_paths(graph, tree, base)
    marking = []
    for e in sorted(set(range(len(graph.edges))) - tree):
        u, v = graph.edges[e]
        marking.append(words.reduce_word(paths[u] + bytes((2 * e,)) + words.inverse(paths[v])))
    return MarkedMetricGraph(graph, lengths, base, marking)


# --- candidate loops -------------------------------------------------------


def _cycle_masks(graph: TopGraph) -> list[int]:
    """Edge subsets forming embedded circles (2-regular connected support)."""
    ne = len(graph.edges)
    out = []
    for mask in range(1, 1 << ne):
        val: dict[int, int] = {}
        for e in range(ne):
            if mask >> e & 1:
                u, v = graph.edges[e]
                val[u] = val.get(u, 0) + 1
                val[v] = val.get(v, 0) + 1
        if any(d != 2 for d in val.values()):
            continue
        support = sorted(val)
        idx = {v: i for i, v in enumerate(support)}
        parent = list(range(len(support)))

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        comps = len(support)
        for e in range(ne):
            if mask >> e & 1:
                u, v = graph.edges[e]
                ru, rv = find(idx[u]), find(idx[v])
                if ru != rv:
                    parent[ru] = rv
                    comps -= 1
        if comps == 1:
            out.append(mask)
    return out


def _mask_support(graph: TopGraph, mask: int) -> frozenset[int]:
    vs = set()
    for e in range(len(graph.edges)):
        if mask >> e & 1:
            u, v = graph.edges[e]
            vs.add(u)
            vs.add(v)
    return frozenset(vs)


def _cycle_word(graph: TopGraph, mask: int, start: int) -> bytes:
    """Traverse a circle subset starting at the given support vertex."""
    darts: dict[int, list[int]] = {}
    for e in range(len(graph.edges)):
        if mask >> e & 1:
            u, v = graph.edges[e]
            darts.setdefault(u, []).append(2 * e)
            darts.setdefault(v, []).append(2 * e + 1)
    used: set[int] = set()
    cur = start
    word = bytearray()
    while True:
        nxt = [b for b in sorted(darts[cur]) if b // 2 not in used]
        if not nxt:
            break
        b = nxt[0]
        used.add(b // 2)
        word.append(b)
        u, v = graph.edges[b // 2]
        cur = v if b % 2 == 0 else u
    if cur != start:
        raise AssertionError("circle traversal did not close up")
    return bytes(word)


def _connecting_paths(graph: TopGraph, avoid_edges: int, from_vs: frozenset[int], to_vs: frozenset[int]):
    """Embedded arcs between two vertex sets, interiors avoiding both."""
    adj: dict[int, list[tuple[int, int]]] = {}
    for e in range(len(graph.edges)):
        if avoid_edges >> e & 1:
            continue
        u, v = graph.edges[e]
        if u == v:
            continue
        adj.setdefault(u, []).append((2 * e, v))
        adj.setdefault(v, []).append((2 * e + 1, u))
    paths = []

    def extend(cur: int, word: list[int], visited: set[int]):
        for b, nxt in adj.get(cur, ()):
            if nxt in to_vs:
                paths.append(bytes(word + [b]))
            elif nxt not in visited and nxt not in from_vs:
                visited.add(nxt)
                word.append(b)
                extend(nxt, word, visited)
                word.pop()
                visited.remove(nxt)

    for s in sorted(from_vs):
        extend(s, [], {s})
    return paths


def candidates(point: MarkedMetricGraph) -> list[CandidateLoop]:
    """All candidate loops of the underlying graph.

    Embedded circles, figure-eights (two edge-disjoint circles meeting at
    a single vertex) and barbells (two disjoint circles joined by an
    embedded arc), with both relative orientations of the second circle.
    Free groups have no degenerate barbells: every vertex group is
    trivial, so there is no stand-in for a missing circle.
    """
    graph = point.graph
    masks = _cycle_masks(graph)
    supports = {m: _mask_support(graph, m) for m in masks}
    found: dict[bytes, CandidateLoop] = {}

    def add(word: bytes, shape: str) -> None:
        key = min(words.canonical_cycle(word), words.canonical_cycle(words.inverse(word)))
        if key not in found:
            found[key] = CandidateLoop(word, shape)

    for m in masks:
        add(_cycle_word(graph, m, min(supports[m])), "loop")
    for m1, m2 in itertools.combinations(masks, 2):
        if m1 & m2:
            continue
        shared = supports[m1] & supports[m2]
        if len(shared) == 1:
            v = next(iter(shared))
            w1 = _cycle_word(graph, m1, v)
            w2 = _cycle_word(graph, m2, v)
            add(w1 + w2, "figure-eight")
            add(w1 + words.inverse(w2), "figure-eight")
        elif not shared:
            for p in _connecting_paths(graph, m1 | m2, supports[m1], supports[m2]):
                x = graph.edges[p[0] // 2][0 if p[0] % 2 == 0 else 1]
                last = p[-1]
                y = graph.edges[last // 2][1 if last % 2 == 0 else 0]
                w1 = _cycle_word(graph, m1, x)
                w2 = _cycle_word(graph, m2, y)
                pinv = words.inverse(p)
                add(w1 + p + w2 + pinv, "barbell")
                add(w1 + p + words.inverse(w2) + pinv, "barbell")
    return [found[k] for k in sorted(found)]


# --- stretching factors ----------------------------------------------------


def stretch(x: MarkedMetricGraph, y: MarkedMetricGraph) -> Fraction:
    """Maximal ratio of marked lengths from x to y, over x's candidates."""
    if x.rank != y.rank:
        raise ValueError("rank mismatch")
    best = Fraction(0)
    for cand in candidates(x):
        den = x.edge_word_length(cand.edge_word)
        num = y.loop_length(x.word_of_loop(cand.edge_word))
        r = num / den
        if r > best:
            best = r
    return best


def displacement(x: MarkedMetricGraph, phi: Endo) -> Fraction:
    """Displacement of the automorphism at the point: stretch to the twisted point."""
    return stretch(x, x.twist(phi))


def shortest_loop(point: MarkedMetricGraph) -> Fraction:
    """Length of the shortest essential loop (always an embedded circle)."""
    graph = point.graph
    best = None
    for m in _cycle_masks(graph):
        length = sum(
            (point.lengths[e] for e in range(len(graph.edges)) if m >> e & 1),
            Fraction(0),
        )
        if best is None or length < best:
            best = length
    if best is None:
        raise ValueError("graph has no essential loop")
    return best


def is_thin(point: MarkedMetricGraph, eps: Fraction) -> bool:
    """Whether some essential loop has length at most eps (inclusive)."""
    if eps <= 0:
        raise ValueError("thinness threshold must be positive")
    return shortest_loop(point) <= eps


def thinness_constant(n: int, mu: Fraction) -> Fraction:
    """Threshold below which a point displaced by at most mu must be reducible."""
    if n < 2:
        raise ValueError("thinness constant needs rank at least 2")
    mu = Fraction(mu)
    if mu <= 1:
        raise ValueError("mu must exceed 1")
    return 1 / ((3 * n - 3) * mu ** (3 * n - 2))


def adjacent_uniform_rose(point: MarkedMetricGraph, tree: frozenset[int] | None = None) -> MarkedMetricGraph:
    """Collapse a maximal tree and rescale all surviving edges to length 1/n."""
    graph = point.graph
    if tree is None:
        tree = min(maximal_trees(graph), key=sorted)
    nontree = sorted(set(range(len(graph.edges))) - tree)
    n = point.rank
    if len(nontree) != n:
        raise ValueError("not a spanning tree")
    table = [b""] * (2 * len(graph.edges))
    for k, e in enumerate(nontree):
        table[2 * e] = bytes((2 * k,))
        table[2 * e + 1] = bytes((2 * k + 1,))
    rose = TopGraph(1, tuple((0, 0) for _ in range(n)))
    marking = [words.substitute(table, m) for m in point.marking]
    return MarkedMetricGraph(rose, [Fraction(1, n)] * n, 0, marking)
