"""Bounded conjugation search deciding conjugacy and irreducibility.

Given a verified automorphism and a rational mu exceeding its norm, the
search closes the singleton {phi} under conjugation by the finite
change-of-tree generating set, keeping only results whose norm stays at
or below the cap K = n(3n-3) mu^(3n-1); outer classes of bounded norm are
finite, so the closure terminates.  Two irreducible automorphisms are
conjugate exactly when one lies in the completed set of the other, and an
automorphism is reducible exactly when one further unconstrained
conjugation round over the set meets a visibly reducible element.

Conjugating by a rose symmetry (signed basis permutation) never changes
the norm, so the member set is a union of symmetry orbits.  Only one
canonical representative per orbit is stored and expanded; this is
complete because the generating set is closed under composition with
symmetries on both sides.  Counts and membership always refer to the full
set.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Sequence

from outfn import stallings, words
from outfn.autom import (
    Endo,
    OuterAutomorphism,
    abelianization,
    compose,
    identity_endo,
    inner_minimal_images,
    norm_of_images,
)
from outfn.cmt import (
    CmtGenerator,
    cmt_generators,
    is_signed_perm,
    rose_symmetries,
    signed_perm_inverse,
)


def cap_constant(n: int, mu: Fraction) -> Fraction:
    """The norm cap K = n(3n-3) mu^(3n-1) of the bounded search."""
    if n < 2:
        raise ValueError("the cap constant needs rank at least 2")
    mu = Fraction(mu)
    if mu <= 1:
        raise ValueError("mu must exceed 1")
    return n * (3 * n - 3) * mu ** (3 * n - 1)


# --- symmetry data ----------------------------------------------------------


@lru_cache(maxsize=None)
def _sym_data(n: int):
    syms = rose_symmetries(n)
    invs = tuple(signed_perm_inverse(s) for s in syms)
    tables = []
    for s in syms:
        t = bytearray(range(256))
        for i in range(n):
            b = s.images[i][0]
            t[2 * i] = b
            t[2 * i + 1] = b ^ 1
        tables.append(bytes(t))
    return syms, invs, tuple(tables)


def _conj_by_sym(images, sym_index: int, n: int) -> tuple[bytes, ...]:
    """Images of sigma phi sigma^-1 for the rose symmetry of the given index."""
    _, invs, tables = _sym_data(n)
    inv_im = invs[sym_index].images
    tbl = tables[sym_index]
    out = []
    for i in range(n):
        b = inv_im[i][0]
        im = images[b // 2]
        if b % 2:
            im = words.inverse(im)
        out.append(im.translate(tbl))
    return tuple(out)


def _orbit_of(canon, n: int):
    """All canonical keys of symmetry conjugates, with the minimal one first."""
    keys = {}
    for si in range(len(_sym_data(n)[0])):
        k = inner_minimal_images(_conj_by_sym(canon, si, n), n)
        keys.setdefault(k, si)
    best = min(keys)
    return best, keys


# --- abelianized prefilter for visible reducibility -------------------------


def _matmul(a, b):
    n = len(a)
    return tuple(
        tuple(sum(a[i][k] * b[k][j] for k in range(n)) for j in range(n))
        for i in range(n)
    )


def _abelian_family_possible(matrix, n: int) -> bool:
    """Necessary condition for visible reducibility, on exponent matrices.

    A family of disjoint subsets cyclically permuted up to conjugacy
    forces the column supports of each subset to land inside the next, so
    absence of such a support cycle rules a member out without touching
    words.
    """
    full = (1 << n) - 1
    supp = []
    for a in range(n):
        s = 0
        for i in range(n):
            if matrix[i][a]:
                s |= 1 << i
        supp.append(s)

    def susp(mask: int) -> int:
        s = 0
        for a in range(n):
            if mask >> a & 1:
                s |= supp[a]
        return s

    masks = range(1, full + 1)

    def extend(first: int, cur: int, used: int, length: int) -> bool:
        need = susp(cur)
        if need & first == need and not (length == 1 and first == full):
            return True
        for nxt in masks:
            if nxt & used or need & nxt != need:
                continue
            if extend(first, nxt, used | nxt, length + 1):
                return True
        return False

    return any(extend(first, first, first, 1) for first in masks)


# --- closure ----------------------------------------------------------------


@dataclass
class Member:
    images: tuple[bytes, ...]  # canonical orbit representative
    norm: Fraction
    matrix: tuple[tuple[int, ...], ...]
    orbit_size: int
    parent: tuple | None  # rep key of the parent, None for the seed
    gen: int | None  # index into the expansion generators
    sym: int | None  # symmetry applied after the generator (seed: orbit sym)


@dataclass
class ClosureSet:
    rank: int
    mu: Fraction
    cap: Fraction
    seed: Endo
    reps: dict
    order: list
    member_map: dict  # canonical key of any member -> its rep key
    generators: tuple[CmtGenerator, ...]
    completed: bool

    @property
    def total_members(self) -> int:
        return len(self.member_map)

    @property
    def max_norm(self) -> Fraction:
        return max(m.norm for m in self.reps.values())

    def contains(self, phi) -> bool:
        """Membership of the outer class (only exact on completed closures)."""
        images = phi.images if not isinstance(phi, OuterAutomorphism) else phi.endo.images
        canon = inner_minimal_images(images, self.rank)
        return canon in self.member_map

    def conjugator_to(self, canon_key):
        """An automorphism z with member ~ z seed z^-1, plus its inverse and path.

        The path lists the conjugations innermost-first; every entry is a
        rose symmetry (s#) or an expansion generator (its label).
        """
        rep_key = self.member_map[canon_key]
        chain = []
        k = rep_key
        while k is not None:
            m = self.reps[k]
            chain.append(m)
            k = m.parent
        chain.reverse()
        syms, sym_invs, _ = _sym_data(self.rank)
        seed_member = chain[0]
        z = syms[seed_member.sym]
        z_inv = sym_invs[seed_member.sym]
        path = [f"s{seed_member.sym}"]
        expand = _expansion_generators(self.generators)
        for m in chain[1:]:
            g = expand[m.gen]
            z = compose(syms[m.sym], compose(g.forward, z))
            z_inv = compose(z_inv, compose(g.inverse, sym_invs[m.sym]))
            path.append(g.label)
            path.append(f"s{m.sym}")
        # the requested member is a symmetry conjugate of its orbit rep
        rep_images = self.reps[rep_key].images
        for si in range(len(syms)):
            if inner_minimal_images(_conj_by_sym(rep_images, si, self.rank), self.rank) == canon_key:
                z = compose(syms[si], z)
                z_inv = compose(z_inv, sym_invs[si])
                path.append(f"s{si}")
                return z, z_inv, tuple(path)
        raise KeyError("member key not in this closure")


def _expansion_generators(gens: Sequence[CmtGenerator]):
    """Generators that can produce new orbits: not the identity, not a symmetry."""
    out = []
    for g in gens:
        if is_signed_perm(g.forward):
            continue
        out.append(g)
    return out


def _verified(phi) -> OuterAutomorphism:
    if isinstance(phi, OuterAutomorphism):
        return phi
    return OuterAutomorphism(phi)


def closure_set(
    phi,
    mu: Fraction | None = None,
    generators: Sequence[CmtGenerator] | None = None,
    workers: int = 1,
    _watch: tuple | None = None,
    _visitor: Callable | None = None,
) -> ClosureSet:
    """Close {phi} under capped conjugation by the generating set.

    ``mu`` defaults to norm(phi) + 1 and must exceed the norm.  The member
    set is a deterministic fixpoint: expansion order and the ``workers``
    count never change it.  ``_watch`` stops the search early once a given
    canonical key appears (membership queries); ``_visitor`` is called on
    every newly inserted orbit representative and stops the search by
    returning a truthy value.
    """
    outer = _verified(phi)
    n = outer.rank
    seed_norm = outer.norm()
    mu = Fraction(mu) if mu is not None else seed_norm + 1
    if mu <= seed_norm:
        raise ValueError(f"mu must exceed the norm of the seed ({seed_norm})")
    cap = cap_constant(n, mu)
    gens = tuple(generators) if generators is not None else cmt_generators(n)
    expand = _expansion_generators(gens)
    gen_tables = [words.build_table(g.forward.images) for g in expand]
    gen_invs = [g.inverse.images for g in expand]

    canon0 = inner_minimal_images(outer.endo.images, n)
    key0, orbit0 = _orbit_of(canon0, n)
    mat0 = abelianization(Endo(n, key0))
    reps = {key0: Member(key0, seed_norm, mat0, len(orbit0), None, None, orbit0[key0])}
    order = [key0]
    member_map = {k: key0 for k in orbit0}
    closure = ClosureSet(n, mu, cap, outer.endo, reps, order, member_map, gens, False)

    if _visitor is not None and _visitor(closure, key0):
        return closure
    if _watch is not None and _watch in member_map:
        return closure

    def expand_rep(rep_key):
        rep = reps[rep_key]
        table = words.build_table(rep.images)
        found = []
        for gi in range(len(expand)):
            imgs = tuple(
                words.substitute(gen_tables[gi], words.substitute(table, w))
                for w in gen_invs[gi]
            )
            nm = norm_of_images(imgs, n)
            if nm <= cap:
                found.append((imgs, nm, rep_key, gi))
        return found

    frontier = [key0]
    pool = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        while frontier:
            if pool is not None:
                batches = pool.map(expand_rep, frontier)
            else:
                batches = map(expand_rep, frontier)
            nxt = []
            for batch in batches:
                for imgs, nm, parent, gi in batch:
                    canon = inner_minimal_images(imgs, n)
                    if canon in member_map:
                        continue
                    key, orbit = _orbit_of(canon, n)
                    member = Member(
                        key, nm, abelianization(Endo(n, key)),
                        len(orbit), parent, gi, orbit[key],
                    )
                    reps[key] = member
                    order.append(key)
                    for k in orbit:
                        member_map.setdefault(k, key)
                    nxt.append(key)
                    if _visitor is not None and _visitor(closure, key):
                        return closure
                    if _watch is not None and _watch in member_map:
                        return closure
            frontier = nxt
    finally:
        if pool is not None:
            pool.shutdown(cancel_futures=True)
    closure.completed = True
    return closure


# --- conjugacy --------------------------------------------------------------


class ReducibleInputError(ValueError):
    """Raised in checking mode when an input automorphism is reducible."""


@dataclass
class ConjugacyResult:
    conjugate: bool
    conjugator: Endo | None
    conjugator_inverse: Endo | None
    path: tuple[str, ...] | None
    closure: ClosureSet


def conjugacy_irreducible(
    phi,
    psi,
    mu: Fraction | None = None,
    check_irreducible: bool = False,
    workers: int = 1,
) -> ConjugacyResult:
    """Decide conjugacy of two irreducible outer automorphisms.

    Irreducibility of the inputs is the caller's responsibility unless
    ``check_irreducible`` is set, in which case a reducible input raises
    ``ReducibleInputError``.  ``mu`` defaults to max(norms) + 1.  On a
    positive answer the returned conjugator z satisfies
    psi ~ z phi z^-1 up to inner automorphisms.
    """
    outer_phi = _verified(phi)
    outer_psi = _verified(psi)
    if outer_phi.rank != outer_psi.rank:
        raise ValueError("rank mismatch")
    if check_irreducible:
        for name, x in (("first", outer_phi), ("second", outer_psi)):
            got = detect_irreducible(x, workers=workers)
            if got.reducible:
                raise ReducibleInputError(f"{name} input is reducible: {got.partition}")
    floor = max(outer_phi.norm(), outer_psi.norm())
    mu = Fraction(mu) if mu is not None else floor + 1
    if mu <= floor:
        raise ValueError(f"mu must exceed both norms (max {floor})")
    target = inner_minimal_images(outer_psi.endo.images, outer_phi.rank)
    closure = closure_set(outer_phi, mu, workers=workers, _watch=target)
    if target not in closure.member_map:
        return ConjugacyResult(False, None, None, None, closure)
    z, z_inv, path = closure.conjugator_to(target)
    return ConjugacyResult(True, z, z_inv, path, closure)


# --- the one extra round and irreducibility ---------------------------------


def s_plus(closure: ClosureSet) -> set:
    """Canonical keys of one unconstrained conjugation round over the set.

    Contains every member key (the identity is among the generators); no
    norm cap applies.  Intended for completed closures of desk scale: the
    result has up to |members| * |generators| classes.
    """
    if not closure.completed:
        raise ValueError("s_plus needs a completed closure")
    n = closure.rank
    gen_tables = [words.build_table(g.forward.images) for g in closure.generators]
    out = set(closure.member_map)
    for rep_key in closure.order:
        rep = closure.reps[rep_key]
        table = words.build_table(rep.images)
        for g, gtable in zip(closure.generators, gen_tables):
            imgs = tuple(
                words.substitute(gtable, words.substitute(table, w))
                for w in g.inverse.images
            )
            out.add(inner_minimal_images(imgs, n))
    return out


@dataclass
class IrreducibilityResult:
    reducible: bool
    witness: Endo | None
    partition: tuple[frozenset[int], ...] | None
    conjugator: Endo | None
    path: tuple[str, ...] | None
    closure: ClosureSet


def detect_irreducible(phi, mu: Fraction | None = None, workers: int = 1) -> IrreducibilityResult:
    """Decide reducibility of an outer automorphism.

    Builds the capped closure of the input (mu defaults to norm + 1), then
    scans it and one further unconstrained conjugation round for a visibly
    reducible element; the first witness in search order is returned with
    its basis partition and the conjugating word back to the input.
    Scanning representatives suffices because visible reducibility is
    preserved by relabelling the basis.
    """
    outer = _verified(phi)
    n = outer.rank

    # the seed itself, in its own labelling, comes first in the scan order
    seed_canon = inner_minimal_images(outer.endo.images, n)
    if _abelian_family_possible(abelianization(outer.endo), n):
        partition = stallings.visibly_reducible(seed_canon, n)
        if partition is not None:
            closure = closure_set(outer, mu, workers=workers, _visitor=lambda c, k: True)
            return IrreducibilityResult(
                True, Endo(n, seed_canon), partition, identity_endo(n), (), closure
            )

    hits: list[tuple] = []

    def visitor(closure, key):
        rep = closure.reps[key]
        if not _abelian_family_possible(rep.matrix, n):
            return False
        partition = stallings.visibly_reducible(rep.images, n)
        if partition is None:
            return False
        hits.append((key, rep.images, partition, None))
        return True

    closure = closure_set(outer, mu, workers=workers, _visitor=visitor)
    if not hits and closure.completed:
        # one more round, no cap: the extra elements live just outside the set
        expand = _expansion_generators(closure.generators)
        gen_mats = [abelianization(g.forward) for g in expand]
        gen_inv_mats = [abelianization(g.inverse) for g in expand]
        gen_tables = [words.build_table(g.forward.images) for g in expand]
        for rep_key in closure.order:
            rep = closure.reps[rep_key]
            table = None
            for gi, g in enumerate(expand):
                mat = _matmul(gen_mats[gi], _matmul(rep.matrix, gen_inv_mats[gi]))
                if not _abelian_family_possible(mat, n):
                    continue
                if table is None:
                    table = words.build_table(rep.images)
                imgs = tuple(
                    words.substitute(gen_tables[gi], words.substitute(table, w))
                    for w in g.inverse.images
                )
                partition = stallings.visibly_reducible(imgs, n)
                if partition is not None:
                    hits.append((rep_key, imgs, partition, gi))
                    break
            if hits:
                break
    if not hits:
        return IrreducibilityResult(False, None, None, None, None, closure)
    key, images, partition, extra_gen = hits[0]
    z, z_inv, path = closure.conjugator_to(key)
    if extra_gen is not None:
        g = _expansion_generators(closure.generators)[extra_gen]
        z = compose(g.forward, z)
        z_inv = compose(z_inv, g.inverse)
        path = path + (g.label,)
    return IrreducibilityResult(True, Endo(n, images), partition, z, path, closure)
