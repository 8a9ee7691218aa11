"""Endomorphisms and outer automorphisms of F_n given by basis images.

An ``Endo`` stores the images of the basis letters; an
``OuterAutomorphism`` wraps an ``Endo`` that has passed the invertibility
check and is compared up to inner automorphisms.  The size of an outer
automorphism is its maximal cyclic stretch, which is attained on a
cyclically reduced word of length at most 2, so it is computed exactly as
a rational number from finitely many images.
"""

from __future__ import annotations

from fractions import Fraction
from functools import lru_cache

from outfn import words
from outfn.words import (
    build_table,
    canonical_cycle,
    concat,
    conjugate,
    cyclic_norm,
    inverse,
    power,
    substitute,
    word_conjugator,
)


class Endo:
    """Endomorphism of F_n determined by the images of the basis letters."""

    __slots__ = ("rank", "images", "_table")

    def __init__(self, rank: int, images):
        images = tuple(words.reduce_word(bytes(im)) for im in images)
        if len(images) != rank:
            raise ValueError(f"expected {rank} images, got {len(images)}")
        for im in images:
            words.check_rank(im, rank)
        self.rank = rank
        self.images = images
        self._table = None

    @property
    def table(self) -> tuple[bytes, ...]:
        if self._table is None:
            self._table = build_table(self.images)
        return self._table

    def apply(self, w: bytes) -> bytes:
        """Image of a word under letterwise substitution, reduced."""
        words.check_rank(w, self.rank)
        return substitute(self.table, w)

    def __eq__(self, other):
        return (
            isinstance(other, Endo)
            and self.rank == other.rank
            and self.images == other.images
        )

    def __hash__(self):
        return hash((self.rank, self.images))

    def __repr__(self):
        return f"Endo({format_automorphism(self)!r})"


def identity_endo(rank: int) -> Endo:
    return Endo(rank, [bytes((2 * i,)) for i in range(rank)])


def compose(phi: Endo, psi: Endo) -> Endo:
    """The endomorphism x -> phi(psi(x))."""
    if phi.rank != psi.rank:
        raise ValueError("rank mismatch")
    return Endo(phi.rank, [substitute(phi.table, im) for im in psi.images])


def abelianization(phi: Endo) -> tuple[tuple[int, ...], ...]:
    """Integer matrix of exponent sums; column j is the image of letter j."""
    n = phi.rank
    cols = []
    for im in phi.images:
        col = [0] * n
        for b in im:
            col[b // 2] += -1 if b % 2 else 1
        cols.append(col)
    return tuple(tuple(cols[j][i] for j in range(n)) for i in range(n))


def is_automorphism(phi: Endo) -> bool:
    """True iff the images generate F_n.

    Folding the wedge of image-labelled loops yields the rank-n rose
    exactly when the images generate; since free groups are Hopfian, a
    generating n-tuple is automatically a basis.
    """
    from outfn import stallings

    graph = stallings.subgroup_graph(phi.images, phi.rank)
    return stallings.rose_labels(graph) == (1 << phi.rank) - 1


@lru_cache(maxsize=None)
def _norm_probes(rank: int) -> tuple[tuple[bytes, int], ...]:
    # one representative per conjugacy-and-inversion class of cyclic words
    # of length 1 and 2; those classes suffice to attain the maximal stretch
    seen = {}
    letters = [bytes((b,)) for b in range(2 * rank)]
    for w in letters:
        key = min(canonical_cycle(w), canonical_cycle(inverse(w)))
        seen.setdefault(key, (w, 1))
    for a in range(2 * rank):
        for b in range(2 * rank):
            if b == a ^ 1:
                continue
            w = bytes((a, b))
            key = min(canonical_cycle(w), canonical_cycle(inverse(w)))
            seen.setdefault(key, (w, 2))
    return tuple(seen.values())


def norm_of_images(images, rank: int) -> Fraction:
    table = build_table(images)
    best = Fraction(0)
    for w, length in _norm_probes(rank):
        img = table[w[0]] if len(w) == 1 else words._merge(table[w[0]], table[w[1]])
        r = Fraction(cyclic_norm(img), length)
        if r > best:
            best = r
    return best


def _conj_delta(w: bytes, c: int) -> int:
    # length change of c * w * c^-1 relative to w
    if not w:
        return 0
    d = 2
    if w[0] == c ^ 1:
        d -= 2
    if w[-1] == c:
        d -= 2
    return d


def conj_letter(w: bytes, c: int) -> bytes:
    """Conjugate a reduced word by a single letter: c * w * c^-1."""
    if not w:
        return w
    if w[0] == c ^ 1:
        w = w[1:]
    else:
        w = bytes((c,)) + w
    if w and w[-1] == c:
        w = w[:-1]
    else:
        w = w + bytes((c ^ 1,))
    return w


_PLATEAU_LIMIT = 200_000


def _direction_jump(images, c: int):
    """Best power k of conjugation by letter c, with its total length gain.

    For a reduced word, conjugating by c^k cancels up to the leading run
    of c^-1 and the trailing run of c and then pads; the total length is
    convex piecewise-linear in k with breaks at the run lengths, so the
    optimum sits on a break.  Words that are powers of c contribute a
    constant and are skipped.
    """
    cb = bytes((c,))
    ib = bytes((c ^ 1,))
    runs = []
    breaks = set()
    for w in images:
        if not w:
            continue
        f = len(w) - len(w.lstrip(ib))
        if f == len(w):
            continue
        b = len(w) - len(w.rstrip(cb))
        if f + b >= len(w):
            continue
        runs.append((f, b))
        breaks.add(f)
        breaks.add(b)
    best_k, best_gain = 0, 0
    for k in breaks:
        if k == 0:
            continue
        gain = 0
        for f, b in runs:
            gain += max(0, k - f) - min(k, f) + max(0, k - b) - min(k, b)
        if gain < best_gain or (gain == best_gain and 0 < k < best_k):
            best_k, best_gain = k, gain
    return best_k, best_gain


def _conj_power(w: bytes, c: int, k: int) -> bytes:
    """c^k * w * c^-k for a reduced word, reduced."""
    if not w or k == 0:
        return w
    cb = bytes((c,))
    ib = bytes((c ^ 1,))
    f = min(k, len(w) - len(w.lstrip(ib)))
    w = cb * (k - f) + w[f:]
    b = min(k, len(w) - len(w.rstrip(cb)))
    return w[: len(w) - b] + ib * (k - b)


_FAR = 1 << 60


def _step_profile(w: bytes, c: int):
    """Per-step length change of conjugation by c, and how long it persists.

    Returns (d, t): each of the first t conjugations by c changes the
    length of w by exactly d.
    """
    if not w:
        return 0, _FAR
    ib = c ^ 1
    f = len(w) - len(w.lstrip(bytes((ib,)))) if w[0] == ib else 0
    b = len(w) - len(w.rstrip(bytes((c,)))) if w[-1] == c else 0
    if f + b >= len(w):  # pure power of c: conjugation fixes it
        return 0, _FAR
    d = 2
    t = _FAR
    if f:
        d -= 2
        t = f
    if b:
        d -= 2
        t = min(t, b)
    return d, t


def inner_minimal_images(images, rank: int) -> tuple[bytes, ...]:
    """Canonical representative of an image tuple up to inner twisting.

    Conjugating all images by g changes each length by a convex function
    of g on the Cayley tree.  The representative is pinned down in
    stages, each a convex minimisation over a connected set (so greedy
    descent is exact): first the total length, then the length of each
    image in turn, and finally the lexicographically least tuple on the
    residual tie set.  The result depends only on the outer class because
    the set of image tuples at each stage does.  For rank 1 conjugation
    never changes the images.
    """
    cur = tuple(images)
    if rank <= 1:
        return cur
    letters = range(2 * rank)
    # total length, with an exact line search per letter direction
    while True:
        best = None
        for c in letters:
            k, gain = _direction_jump(cur, c)
            if gain < 0 and (best is None or gain < best[0]):
                best = (gain, c, k)
        if best is None:
            break
        _, c, k = best
        cur = tuple(_conj_power(w, c, k) for w in cur)
    # one image length at a time, moving only inside the previous stages' minimisers
    for stage in range(rank):
        while True:
            jump = 0
            for c in letters:
                total = 0
                k = _FAR
                ok = True
                for i, w in enumerate(cur):
                    d, t = _step_profile(w, c)
                    if (i < stage and d != 0) or (i == stage and d >= 0):
                        ok = False
                        break
                    total += d
                    if t < k:
                        k = t
                if ok and total == 0:
                    jump = k
                    break
            if not jump:
                break
            cur = tuple(_conj_power(w, c, jump) for w in cur)
    # residual ties keep every length fixed; the tie set is tiny
    seen = {cur}
    frontier = [cur]
    while frontier:
        nxt = []
        for t in frontier:
            for c in letters:
                if any(_conj_delta(w, c) for w in t):
                    continue
                t2 = tuple(conj_letter(w, c) for w in t)
                if t2 not in seen:
                    seen.add(t2)
                    nxt.append(t2)
        frontier = nxt
        if len(seen) > _PLATEAU_LIMIT:
            raise RuntimeError("canonical tie set unexpectedly large")
    return min(seen)


class OuterAutomorphism:
    """An automorphism of F_n considered up to inner automorphisms.

    Construction verifies invertibility of the defining endomorphism and
    raises ``ValueError`` otherwise.
    """

    __slots__ = ("endo", "_norm", "_key")

    def __init__(self, endo: Endo):
        if not is_automorphism(endo):
            raise ValueError("images do not generate the free group")
        self.endo = endo
        self._norm = None
        self._key = None

    @property
    def rank(self) -> int:
        return self.endo.rank

    @property
    def images(self):
        return self.endo.images

    def apply(self, w: bytes) -> bytes:
        return self.endo.apply(w)

    def norm(self) -> Fraction:
        """Maximal cyclic stretch, an exact rational >= 1."""
        if self._norm is None:
            self._norm = norm_of_images(self.endo.images, self.rank)
        return self._norm

    def key(self) -> tuple[bytes, ...]:
        """Canonical image tuple; equal keys characterise the outer class."""
        if self._key is None:
            self._key = inner_minimal_images(self.endo.images, self.rank)
        return self._key

    def __eq__(self, other):
        if not isinstance(other, OuterAutomorphism):
            return NotImplemented
        return self.rank == other.rank and outer_equal(self, other)

    def __hash__(self):
        return hash((self.rank, self.key()))

    def __repr__(self):
        return f"OuterAutomorphism({format_automorphism(self.endo)!r})"


def _as_images(phi):
    if isinstance(phi, OuterAutomorphism):
        return phi.endo.images, phi.rank
    return phi.images, phi.rank


def outer_equal(phi, psi) -> bool:
    """True iff the two automorphisms differ by an inner automorphism.

    Works along the conjugator coset of the first images: all g with
    phi(x_1) = g psi(x_1) g^-1 form {root^k * g0}, and the exponent k is
    pinned down by a length bound on the remaining images.
    """
    pim, prank = _as_images(phi)
    qim, qrank = _as_images(psi)
    if prank != qrank:
        raise ValueError("rank mismatch")
    n = prank
    if n == 1:
        return pim == qim
    got = word_conjugator(pim[0], qim[0])
    if got is None:
        return False
    g0, root = got
    core, c = words.cyclic_reduce(pim[0])
    rhat = words.primitive_root(core)
    # condition in coordinates where the root is cyclically reduced:
    # t_i == rhat^k * w_i * rhat^-k
    b = concat(inverse(c), g0)
    targets = [conjugate(inverse(c), pim[i]) for i in range(1, n)]
    rest = [conjugate(b, qim[i]) for i in range(1, n)]
    pivot = None
    for i, w in enumerate(rest):
        if concat(w, rhat) != concat(rhat, w):
            pivot = i
            break
    if pivot is None:
        # every remaining image commutes with the root: k is irrelevant
        return targets == rest
    bound = (len(targets[pivot]) + 3 * len(rest[pivot])) // (2 * len(rhat)) + 3
    for k in range(-bound, bound + 1):
        rk = power(rhat, k)
        if all(conjugate(rk, w) == t for w, t in zip(rest, targets)):
            return True
    return False


def parse_automorphism(text: str) -> Endo:
    """Parse comma-separated ``letter->word`` assignments, e.g. "a->ab, b->a".

    The rank is inferred from the letters present; every basis letter up
    to the largest mentioned must get exactly one image.  Images are
    freely reduced on input.
    """
    assignments = {}
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if "->" not in part:
            raise ValueError(f"expected 'letter->word' in {part!r}")
        lhs, rhs = part.split("->", 1)
        lhs = lhs.strip()
        if len(lhs) != 1 or not "a" <= lhs <= "z":
            raise ValueError(f"left-hand side must be a basis letter, got {lhs!r}")
        idx = ord(lhs) - ord("a")
        if idx in assignments:
            raise ValueError(f"duplicate image for {lhs!r}")
        assignments[idx] = words.parse_word(rhs.strip())
    if not assignments:
        raise ValueError("no assignments given")
    rank = 0
    for idx, im in assignments.items():
        rank = max(rank, idx + 1, words.rank_of(im))
    missing = [chr(ord("a") + i) for i in range(rank) if i not in assignments]
    if missing:
        raise ValueError(f"missing images for: {', '.join(missing)}")
    return Endo(rank, [assignments[i] for i in range(rank)])


def format_automorphism(phi: Endo) -> str:
    parts = []
    for i, im in enumerate(phi.images):
        parts.append(f"{chr(ord('a') + i)}->{words.format_word(im)}")
    return ", ".join(parts)
