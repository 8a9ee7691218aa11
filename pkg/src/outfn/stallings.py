"""Stallings graphs for finitely generated subgroups of a free group.

A labelled graph stores directed edges carrying 1-based basis-letter
labels.  Folding repeatedly identifies the endpoints of same-labelled
edges sharing a vertex; the folded, based graph of a generating set reads
exactly the subgroup on its based loops, and the unbased core (all
valence-1 vertices pruned) characterises the subgroup up to conjugacy.
Cores are compared through a canonical code, which is cheap because
folded graphs are deterministic automata.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Iterable, Sequence


@dataclass(frozen=True)
class LabeledGraph:
    nv: int
    edges: tuple[tuple[int, int, int], ...]  # (origin, label, terminus), label 1-based
    base: int | None = None

    def transitions(self) -> list[dict[int, int]]:
        """Per-vertex map from signed-label byte to neighbour.

        Signed labels use the word encoding: label l forward is byte
        2*(l-1), backward 2*(l-1)+1.  Only meaningful on folded graphs,
        where each slot holds at most one edge.
        """
        trans: list[dict[int, int]] = [dict() for _ in range(self.nv)]
        for u, lab, v in self.edges:
            b = 2 * (lab - 1)
            if b in trans[u] or b ^ 1 in trans[v]:
                raise ValueError("graph is not folded")
            trans[u][b] = v
            trans[v][b ^ 1] = u
        return trans


def _wedge_edges(generator_words: Iterable[bytes], nv_start: int = 1):
    """Darts of the wedge of loops at vertex 0 spelling the given words."""
    darts = []
    nv = nv_start
    for w in generator_words:
        if not w:
            continue
        prev = 0
        for i, b in enumerate(w):
            nxt = 0 if i == len(w) - 1 else nv
            if nxt != 0:
                nv += 1
            darts.append((prev, b, nxt))
            prev = nxt
    return nv, darts


def _fold_darts(nv: int, darts, base: int):
    """Fold a dart list with union-find; near-linear in the input size."""
    parent = list(range(nv))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    slots: list[dict[int, int] | None] = [dict() for _ in range(nv)]

    def merge(a: int, b: int) -> None:
        stack = [(a, b)]
        while stack:
            x, y = stack.pop()
            x, y = find(x), find(y)
            if x == y:
                continue
            if len(slots[x]) < len(slots[y]):
                x, y = y, x
            parent[y] = x
            moved = slots[y]
            slots[y] = None
            sx = slots[x]
            for s, t in moved.items():
                cur = sx.get(s)
                if cur is None:
                    sx[s] = t
                else:
                    cr, tr = find(cur), find(t)
                    if cr != tr:
                        stack.append((cr, tr))

    for u, b, v in darts:
        u, v = find(u), find(v)
        w = slots[u].get(b)
        if w is not None:
            if find(w) != v:
                merge(v, find(w))
            continue
        w2 = slots[v].get(b ^ 1)
        if w2 is not None:
            if find(w2) != u:
                merge(u, find(w2))
            continue
        slots[u][b] = v
        slots[v][b ^ 1] = u

    # renumber reachable roots breadth-first from the base for determinism
    start = find(base)
    number = {start: 0}
    order = [start]
    qi = 0
    while qi < len(order):
        v = order[qi]
        qi += 1
        for s in sorted(slots[v] or ()):
            t = find(slots[v][s])
            if t not in number:
                number[t] = len(number)
                order.append(t)
    edges = []
    for v in order:
        for s, t in (slots[v] or {}).items():
            if s % 2 == 0:
                edges.append((number[v], s // 2 + 1, number[find(t)]))
    edges.sort()
    return LabeledGraph(len(order), tuple(edges), 0)


def subgroup_graph(generators: Sequence[bytes], rank: int) -> LabeledGraph:
    """Based, folded graph whose based loops read exactly <generators>.

    Valence-1 vertices other than the base are pruned; they never carry
    based loops.
    """
    for w in generators:
        if w and max(w) >= 2 * rank:
            raise ValueError(f"generator uses letters beyond rank {rank}")
    nv, darts = _wedge_edges(generators)
    folded = _fold_darts(nv, darts, 0)
    return _prune(folded, keep_base=True)


def fold(graph: LabeledGraph, rng=None) -> LabeledGraph:
    """Fold an arbitrary labelled graph.

    The result is independent of the order in which foldable pairs are
    chosen; passing a ``random.Random`` shuffles the processing order,
    which is useful for exercising that confluence.
    """
    darts = [(u, 2 * (lab - 1), v) for u, lab, v in graph.edges]
    if rng is not None:
        rng.shuffle(darts)
        darts = [d if rng.random() < 0.5 else (d[2], d[1] ^ 1, d[0]) for d in darts]
    base = graph.base if graph.base is not None else 0
    folded = _fold_darts(graph.nv, darts, base)
    if graph.base is None:
        return LabeledGraph(folded.nv, folded.edges, None)
    return folded


def _prune(graph: LabeledGraph, keep_base: bool) -> LabeledGraph:
    """Iteratively delete valence-1 vertices (and, unbased, the basepoint too)."""
    edges = list(graph.edges)
    base = graph.base if keep_base else None
    while True:
        val: dict[int, int] = {}
        for u, _, v in edges:
            val[u] = val.get(u, 0) + 1
            val[v] = val.get(v, 0) + 1
        dead = {
            v
            for v, d in val.items()
            if d == 1 and (base is None or v != base)
        }
        if not dead:
            break
        edges = [e for e in edges if e[0] not in dead and e[2] not in dead]
    live = sorted({u for u, _, v in edges} | {v for _, _, v in edges} | ({base} if base is not None else set()))
    number = {v: i for i, v in enumerate(live)}
    new_edges = tuple(sorted((number[u], lab, number[v]) for u, lab, v in edges))
    new_base = number[base] if base is not None else None
    return LabeledGraph(len(live), new_edges, new_base)


def core(graph: LabeledGraph) -> LabeledGraph:
    """Unbased core: prune valence-1 vertices ignoring the basepoint.

    May be empty (trivial subgroup).
    """
    return _prune(graph, keep_base=False)


def trace(graph: LabeledGraph, w: bytes) -> int | None:
    """Endpoint of the path spelling ``w`` from the base, or None if it leaves."""
    if graph.base is None:
        raise ValueError("trace needs a based graph")
    trans = graph.transitions()
    v = graph.base
    for b in w:
        nxt = trans[v].get(b)
        if nxt is None:
            return None
        v = nxt
    return v


def is_member(generators: Sequence[bytes], w: bytes, rank: int) -> bool:
    """Membership of ``w`` in the subgroup generated by ``generators``."""
    return trace(subgroup_graph(generators, rank), w) == 0


def rose_labels(graph: LabeledGraph) -> int | None:
    """Bitmask of loop labels if the graph is a single-vertex rose, else None."""
    if graph.nv != 1:
        return None
    mask = 0
    for _, lab, _ in graph.edges:
        mask |= 1 << (lab - 1)
    return mask


def canonical_code(graph: LabeledGraph):
    """Canonical form deciding label-preserving isomorphism.

    Breadth-first numbering from each start vertex with label-ordered
    exploration is unique because folded graphs are deterministic; the
    code is the minimum over start vertices (the basepoint alone for
    based graphs).  Assumes a connected graph.
    """
    if graph.nv == 0:
        return (0, ())
    trans = graph.transitions()
    starts = [graph.base] if graph.base is not None else range(graph.nv)
    best = None
    for s in starts:
        number = {s: 0}
        order = [s]
        qi = 0
        while qi < len(order):
            v = order[qi]
            qi += 1
            for b in sorted(trans[v]):
                t = trans[v][b]
                if t not in number:
                    number[t] = len(number)
                    order.append(t)
        recs = tuple(
            sorted(
                (number[v], b, number[trans[v][b]])
                for v in order
                for b in trans[v]
            )
        )
        code = (graph.nv, recs)
        if best is None or code < best:
            best = code
    return best


def conjugate_subgroups(gens_u: Sequence[bytes], gens_v: Sequence[bytes], rank: int) -> bool:
    """Whether <gens_u> and <gens_v> are conjugate subgroups of F_rank.

    Two finitely generated subgroups are conjugate exactly when the cores
    of their folded graphs are equal as labelled graphs.
    """
    cu = core(subgroup_graph(gens_u, rank))
    cv = core(subgroup_graph(gens_v, rank))
    return canonical_code(cu) == canonical_code(cv)


def visibly_reducible(images: Sequence[bytes], rank: int):
    """Disjoint basis subsets cyclically permuted by the automorphism, or None.

    Searches for nonempty disjoint subsets B_1, ..., B_k of the basis with
    phi(<B_i>) conjugate to <B_{i+1}> (indices mod k); for k = 1 the subset
    must be proper.  Since a subgroup is conjugate to a standard free
    factor <C> exactly when its core is the rose on C, the possible
    successors form a partial function on subsets and witnesses are its
    cycles with pairwise disjoint members, scanned smallest-first.
    """
    if len(images) != rank:
        raise ValueError("need one image per basis letter")
    n = rank
    full = (1 << n) - 1

    successor: dict[int, int | None] = {}

    def succ(mask: int) -> int | None:
        got = successor.get(mask)
        if mask in successor:
            return got
        gens = [images[i] for i in range(n) if mask >> i & 1]
        target = rose_labels(core(subgroup_graph(gens, rank)))
        successor[mask] = target
        return target

    masks = sorted(range(1, full + 1), key=lambda m: (m.bit_count(), m))
    for start in masks:
        chain = [start]
        seen = {start}
        cur = start
        while True:
            nxt = succ(cur)
            if nxt is None or nxt == 0:
                break
            if nxt == start:
                k = len(chain)
                union = 0
                ok = True
                for m in chain:
                    if union & m:
                        ok = False
                        break
                    union |= m
                if ok and not (k == 1 and start == full):
                    return tuple(
                        frozenset(i + 1 for i in range(n) if m >> i & 1)
                        for m in chain
                    )
                break
            if nxt in seen:
                break
            seen.add(nxt)
            chain.append(nxt)
            cur = nxt
    return None


def format_graph(graph: LabeledGraph) -> str:
    """Plain-text dump: vertex count, base, one edge triple per line."""
    lines = [f"vertices {graph.nv}"]
    if graph.base is not None:
        lines.append(f"base {graph.base}")
    for u, lab, v in graph.edges:
        lines.append(f"{u} {chr(ord('a') + lab - 1)} {v}")
    return "\n".join(lines)
