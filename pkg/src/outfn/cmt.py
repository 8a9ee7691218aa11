"""Change-of-maximal-tree generators of the outer automorphism group.

Every connected multigraph of first Betti number n whose vertices all
have valence at least 3 (the rose alone at rank 1) contributes one outer
automorphism per ordered pair of spanning trees: express the loops dual
to the first tree in the basis dual to the second.  Closing that finite
family under pre- and post-composition with the rose symmetries (signed
permutations of the basis) and pairing each element with its inverse
(swap the two trees) yields a finite generating set which contains all
Whitehead automorphisms.
"""

from __future__ import annotations

import itertools
import json
import os
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

from outfn import words
from outfn.autom import (
    Endo,
    compose,
    format_automorphism,
    inner_minimal_images,
    norm_of_images,
    parse_automorphism,
)

CACHE_FORMAT = 1


@dataclass(frozen=True)
class TopGraph:
    """Connected multigraph; loops and parallel edges allowed."""

    nv: int
    edges: tuple[tuple[int, int], ...]  # endpoints with u <= v

    @property
    def betti(self) -> int:
        return len(self.edges) - self.nv + 1

    def valences(self) -> list[int]:
        val = [0] * self.nv
        for u, v in self.edges:
            val[u] += 1
            val[v] += 1
        return val


def _is_connected(nv: int, edges) -> bool:
    if nv == 0:
        return False
    parent = list(range(nv))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    comps = nv
    for u, v in edges:
        ru, rv = find(u), find(v)
        if ru != rv:
            parent[ru] = rv
            comps -= 1
    return comps == 1


def _graph_code(nv: int, edges) -> tuple:
    """Minimum edge multiset over all vertex relabellings."""
    best = None
    for perm in itertools.permutations(range(nv)):
        code = tuple(sorted((min(perm[u], perm[v]), max(perm[u], perm[v])) for u, v in edges))
        if best is None or code < best:
            best = code
    return (nv, best)


@lru_cache(maxsize=None)
def enumerate_rank_graphs(n: int) -> tuple[TopGraph, ...]:
    """All isomorphism classes of rank-n graphs with minimal valence 3.

    Such a graph has at most 2n-2 vertices and 3n-3 edges.  Rank 1 is the
    single-loop rose (whose vertex has valence 2; there is nothing else).
    """
    if n < 1:
        raise ValueError("rank must be positive")
    if n == 1:
        return (TopGraph(1, ((0, 0),)),)
    found = {}
    for nv in range(1, 2 * n - 1):
        ne = nv + n - 1
        slots = [(i, j) for i in range(nv) for j in range(i, nv)]
        # index after which a vertex has no further incident slot
        last_slot = [max(si for si, (i, j) in enumerate(slots) if v in (i, j)) for v in range(nv)]
        counts = [0] * len(slots)
        deg = [0] * nv

        def emit():
            edges = []
            for si, c in enumerate(counts):
                edges.extend([slots[si]] * c)
            if not _is_connected(nv, edges):
                return
            code = _graph_code(nv, edges)
            if code not in found:
                found[code] = TopGraph(nv, tuple(sorted(edges)))

        def rec(si: int, remaining: int):
            if si == len(slots):
                if remaining == 0:
                    emit()
                return
            i, j = slots[si]
            add = 2 if i == j else 1
            for c in range(remaining + 1):
                counts[si] = c
                deg[i] += add * c
                deg[j] += add * c
                left = remaining - c
                ok = True
                for v in (i, j):
                    if last_slot[v] == si and deg[v] < 3:
                        ok = False
                if ok:
                    # coarse feasibility: remaining edges can still raise every deficient vertex
                    need = sum(max(0, 3 - deg[v]) for v in range(nv) if last_slot[v] > si)
                    if need <= 2 * left:
                        rec(si + 1, left)
                deg[i] -= add * c
                deg[j] -= add * c
            counts[si] = 0

        rec(0, ne)
    return tuple(found[c] for c in sorted(found))


def maximal_trees(graph: TopGraph) -> list[frozenset[int]]:
    """All spanning trees, as sets of edge indices (loops never qualify)."""
    nv = graph.nv
    if nv == 1:
        return [frozenset()]
    nonloop = [i for i, (u, v) in enumerate(graph.edges) if u != v]
    trees = []
    for combo in itertools.combinations(nonloop, nv - 1):
        parent = list(range(nv))

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        ok = True
        for e in combo:
            u, v = graph.edges[e]
            ru, rv = find(u), find(v)
            if ru == rv:
                ok = False
                break
            parent[ru] = rv
        if ok:
            trees.append(frozenset(combo))
    return trees


def _tree_paths(graph: TopGraph, tree: frozenset[int], root: int = 0) -> list[bytes]:
    """Edge word of the tree geodesic from the root to each vertex.

    Edge e traversed forward (first endpoint to second) is byte 2e,
    backward 2e+1.
    """
    adj: list[list[tuple[int, int]]] = [[] for _ in range(graph.nv)]
    for e in tree:
        u, v = graph.edges[e]
        adj[u].append((2 * e, v))
        adj[v].append((2 * e + 1, u))
    paths: list[bytes | None] = [None] * graph.nv
    paths[root] = b""
    queue = [root]
    qi = 0
    while qi < len(queue):
        u = queue[qi]
        qi += 1
        for b, v in adj[u]:
            if paths[v] is None:
                paths[v] = paths[u] + bytes((b,))
                queue.append(v)
    if any(p is None for p in paths):
        raise ValueError("tree does not span the graph")
    return paths  # type: ignore[return-value]


def cmt_automorphism(graph: TopGraph, tree_from: frozenset[int], tree_to: frozenset[int]) -> Endo:
    """Outer automorphism induced by changing the maximal tree.

    The basis loops dual to ``tree_from`` (one per non-tree edge, closed
    up through the tree, in edge-index order) are rewritten in the basis
    dual to ``tree_to`` by reading off their non-``tree_to`` edges.
    """
    ne = len(graph.edges)
    nt_from = sorted(set(range(ne)) - tree_from)
    nt_to = sorted(set(range(ne)) - tree_to)
    if len(nt_from) != graph.betti or len(nt_to) != graph.betti:
        raise ValueError("not spanning trees of this graph")
    letter = {e: i for i, e in enumerate(nt_to)}
    paths = _tree_paths(graph, tree_from)
    images = []
    for e in nt_from:
        u, v = graph.edges[e]
        loop = paths[u] + bytes((2 * e,)) + words.inverse(paths[v])
        im = bytes(
            2 * letter[b // 2] + (b & 1)
            for b in loop
            if b // 2 in letter
        )
        images.append(words.reduce_word(im))
    return Endo(graph.betti, images)


@lru_cache(maxsize=None)
def rose_symmetries(n: int) -> tuple[Endo, ...]:
    """Graph automorphisms of the rose: signed permutations of the basis."""
    out = []
    for perm in itertools.permutations(range(n)):
        for signs in itertools.product((0, 1), repeat=n):
            out.append(Endo(n, [bytes((2 * perm[i] + signs[i],)) for i in range(n)]))
    return tuple(out)


def signed_perm_inverse(sigma: Endo) -> Endo:
    """Inverse of a signed permutation automorphism."""
    images = [b""] * sigma.rank
    for i, im in enumerate(sigma.images):
        if len(im) != 1:
            raise ValueError("not a signed permutation")
        b = im[0]
        images[b // 2] = bytes((2 * i + (b & 1),))
    return Endo(sigma.rank, images)


def is_signed_perm(phi: Endo) -> bool:
    return all(len(im) == 1 for im in phi.images) and len({im[0] // 2 for im in phi.images}) == phi.rank


@lru_cache(maxsize=None)
def whitehead_automorphisms(n: int) -> tuple[Endo, ...]:
    """The classical Whitehead generators, enumerated directly.

    Type 1 are the rose symmetries.  A type-2 move fixes a multiplier
    letter m and sends every other basis letter x to one of x, x*m,
    m^-1*x or m^-1*x*m.
    """
    seen = dict()
    for sigma in rose_symmetries(n):
        seen.setdefault(sigma.images, sigma)
    for m in range(2 * n):
        mi = m // 2
        others = [i for i in range(n) if i != mi]
        mb = bytes((m,))
        mb_inv = bytes((m ^ 1,))
        for choice in itertools.product(range(4), repeat=len(others)):
            images = [b""] * n
            images[mi] = bytes((2 * mi,))
            for i, c in zip(others, choice):
                x = bytes((2 * i,))
                images[i] = (x, x + mb, mb_inv + x, mb_inv + x + mb)[c]
            endo = Endo(n, images)
            seen.setdefault(endo.images, endo)
    return tuple(seen.values())


@dataclass(frozen=True)
class CmtGenerator:
    forward: Endo
    inverse: Endo
    norm: Fraction
    label: str


def _base_tree_maps(n: int) -> list[tuple[Endo, Endo]]:
    """Deduplicated (map, inverse) pairs over all graphs and tree pairs."""
    base: dict[tuple, tuple[Endo, Endo]] = {}
    for graph in enumerate_rank_graphs(n):
        trees = maximal_trees(graph)
        for ta in trees:
            for tb in trees:
                fwd = cmt_automorphism(graph, ta, tb)
                key = inner_minimal_images(fwd.images, n)
                if key not in base:
                    inv = cmt_automorphism(graph, tb, ta)
                    base[key] = (Endo(n, key), inv)
    return [base[k] for k in sorted(base)]


def _compute_generators(n: int) -> tuple[CmtGenerator, ...]:
    syms = rose_symmetries(n)
    sym_invs = [signed_perm_inverse(s) for s in syms]
    final: dict[tuple, tuple[Endo, Endo]] = {}
    for fwd, inv in _base_tree_maps(n):
        for s, s_inv in zip(syms, sym_invs):
            left = compose(s, fwd)
            left_inv = compose(inv, s_inv)
            for t, t_inv in zip(syms, sym_invs):
                key = inner_minimal_images(compose(left, t).images, n)
                if key not in final:
                    final[key] = (Endo(n, key), compose(t_inv, left_inv))
    gens = []
    for i, key in enumerate(sorted(final)):
        fwd, inv = final[key]
        inv = Endo(n, inner_minimal_images(inv.images, n))
        gens.append(CmtGenerator(fwd, inv, norm_of_images(fwd.images, n), f"g{i}"))
    return tuple(gens)


@lru_cache(maxsize=None)
def cmt_generators(n: int) -> tuple[CmtGenerator, ...]:
    """The finite generating set used by the decision procedures.

    Contains the identity, all rose symmetries and every change-of-tree
    map, closed under composition with symmetries on either side and
    under inversion; deduplicated as outer classes and deterministically
    ordered.
    """
    cache_dir = os.environ.get("OUTFN_CACHE_DIR")
    if cache_dir:
        cached = load_generator_cache(cache_dir, n)
        if cached is not None:
            return cached
    gens = _compute_generators(n)
    if cache_dir:
        save_generator_cache(cache_dir, n, gens)
    return gens


def _cache_path(cache_dir: str, n: int) -> str:
    return os.path.join(cache_dir, f"cmt-generators-rank{n}.json")


def save_generator_cache(cache_dir: str, n: int, gens) -> str:
    os.makedirs(cache_dir, exist_ok=True)
    payload = {
        "format": CACHE_FORMAT,
        "rank": n,
        "generators": [
            {
                "forward": format_automorphism(g.forward),
                "inverse": format_automorphism(g.inverse),
                "norm": str(g.norm),
                "label": g.label,
            }
            for g in gens
        ],
    }
    path = _cache_path(cache_dir, n)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh)
    return path


def load_generator_cache(cache_dir: str, n: int):
    path = _cache_path(cache_dir, n)
    try:
        with open(path, encoding="utf-8") as fh:
            payload = json.load(fh)
    except (OSError, ValueError):
        return None
    if payload.get("format") != CACHE_FORMAT or payload.get("rank") != n:
        return None
    gens = []
    for rec in payload["generators"]:
        fwd = parse_automorphism(rec["forward"])
        inv = parse_automorphism(rec["inverse"])
        if fwd.rank != n or inv.rank != n:
            return None
        gens.append(CmtGenerator(fwd, inv, Fraction(rec["norm"]), rec["label"]))
    return tuple(gens)
