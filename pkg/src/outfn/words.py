"""Words in a free group of finite rank, stored as compact byte strings.

A basis letter is a 1-based index ``i``; its inverse is ``-i``.  Internally
a word is a ``bytes`` object: letter ``i`` becomes the byte ``2*(i-1)`` and
its inverse the byte ``2*(i-1)+1``, so inverting a single letter toggles
the low bit.  This representation keeps words hashable and cheap to copy,
makes lexicographic byte order coincide with the fixed letter order
a < a^-1 < b < b^-1 < ..., and lets the hot operations (substitution,
free reduction, relabelling) run on C-speed bytes primitives.

Public functions accept and return ``bytes`` words; ``from_letters`` /
``to_letters`` convert to and from sequences of signed integers, and
``parse_word`` / ``format_word`` handle the a-z/A-Z text form ("1" is the
identity).
"""

from __future__ import annotations

from typing import Iterable

MAX_RANK = 128

IDENTITY = b""

# byte b -> byte of the inverse letter
_FLIP = bytes(b ^ 1 for b in range(256))

# shifts the working alphabet out of the way so substitution can use
# bytes.replace without rewriting its own output
_SHIFT = bytes.maketrans(bytes(range(128)), bytes(range(128, 256)))

# _PAIRS[b] is the two-byte cancelling pattern "letter b, inverse of b"
_PAIRS = [bytes((b, b ^ 1)) for b in range(256)]


def encode_letter(letter: int) -> int:
    """Signed 1-based letter -> internal byte."""
    if letter == 0 or not -MAX_RANK <= letter <= MAX_RANK:
        raise ValueError(f"letter {letter} out of range")
    if letter > 0:
        return 2 * (letter - 1)
    return 2 * (-letter - 1) + 1


def decode_letter(b: int) -> int:
    """Internal byte -> signed 1-based letter."""
    i = b // 2 + 1
    return i if b % 2 == 0 else -i


def from_letters(letters: Iterable[int]) -> bytes:
    """Build a freely reduced word from signed letter indices.

    >>> to_letters(from_letters([1, 2, -2]))
    (1,)
    >>> from_letters([1, -1])
    b''
    """
    return reduce_word(bytes(encode_letter(x) for x in letters))


def to_letters(w: bytes) -> tuple[int, ...]:
    return tuple(decode_letter(b) for b in w)


def check_rank(w: bytes, rank: int) -> bytes:
    """Raise if a letter index exceeds the ambient rank."""
    if w and max(w) >= 2 * rank:
        raise ValueError(f"word uses letters beyond rank {rank}")
    return w


def reduce_word(w: bytes) -> bytes:
    """Freely reduce: delete adjacent letter/inverse pairs until none remain.

    >>> to_letters(reduce_word(from_letters([1]) + from_letters([2, -2, -1])))
    ()
    """
    if not w:
        return w
    hi = max(w) | 1
    while w:
        out = w
        for c in range(hi + 1):
            out = out.replace(_PAIRS[c], b"")
        if out == w:
            return w
        w = out
    return w


def is_reduced(w: bytes) -> bool:
    return reduce_word(w) == w


def inverse(w: bytes) -> bytes:
    """Inverse word: reverse and flip each letter."""
    return w[::-1].translate(_FLIP)


def _merge(a: bytes, b: bytes) -> bytes:
    # concatenate two reduced words, cancelling only at the seam
    i = len(a)
    j = 0
    nb = len(b)
    while i > 0 and j < nb and a[i - 1] == b[j] ^ 1:
        i -= 1
        j += 1
    return a[:i] + b[j:]


def concat(*words: bytes) -> bytes:
    """Reduced product of already-reduced words."""
    out = b""
    for w in words:
        out = _merge(out, w)
    return out


def merge_all(pieces) -> bytes:
    """Reduced product of a sequence of reduced words.

    Keeps a chunk stack and cancels only at seams, so the cost is linear
    in the input plus the amount cancelled (no quadratic re-copying).
    """
    chunks: list[bytes] = []
    for piece in pieces:
        while piece and chunks:
            last = chunks[-1]
            i = len(last)
            j = 0
            np_ = len(piece)
            while i > 0 and j < np_ and last[i - 1] == piece[j] ^ 1:
                i -= 1
                j += 1
            if j == 0:
                break
            piece = piece[j:]
            if i == 0:
                chunks.pop()
            else:
                chunks[-1] = last[:i]
                break
        if piece:
            chunks.append(piece)
    return b"".join(chunks)


def conjugate(g: bytes, w: bytes) -> bytes:
    """g * w * g^-1, reduced."""
    return concat(g, w, inverse(g))


def power(w: bytes, k: int) -> bytes:
    if k < 0:
        w, k = inverse(w), -k
    out = b""
    for _ in range(k):
        out = _merge(out, w)
    return out


def substitute(table, w: bytes) -> bytes:
    """Apply a letter-to-word substitution and reduce.

    ``table`` maps each byte occurring in ``w`` (index it by the byte
    value) to a reduced replacement word; images of inverse letters must
    be listed explicitly.  Short inputs and long images go through the
    seam-merging path; long inputs with short images are bulk-replaced
    (the alphabet is shifted into the 128-255 range first so replacements
    cannot rewrite each other's output) and then reduced.
    """
    if not w:
        return b""
    present = set(w)
    if len(w) <= 32 or max(len(table[c]) for c in present) > 8:
        return merge_all([table[b] for b in w])
    s = w.translate(_SHIFT)
    for c in present:
        s = s.replace(bytes((c | 128,)), table[c])
    return reduce_word(s)


def build_table(images: Iterable[bytes]) -> tuple[bytes, ...]:
    """Substitution table for basis images: entry 2i is images[i], 2i+1 its inverse."""
    table = []
    for im in images:
        table.append(im)
        table.append(inverse(im))
    return tuple(table)


def _strip_depth(w: bytes) -> int:
    # cancelling depth at the two ends of a reduced word
    d = 0
    n = len(w)
    while n - 2 * d >= 2 and w[d] == w[n - 1 - d] ^ 1:
        d += 1
    return d


def cyclic_strip(w: bytes) -> tuple[bytes, bytes]:
    """Strip cancelling ends of a reduced word.

    Returns ``(core, prefix)`` with ``w == prefix + core + inverse(prefix)``
    and ``core`` cyclically reduced (first letter not inverse to last).
    """
    if not is_reduced(w):
        raise ValueError("cyclic_strip expects a freely reduced word")
    d = _strip_depth(w)
    return w[d : len(w) - d], w[:d]


def cyclic_norm(w: bytes) -> int:
    """Cyclically reduced length of a reduced word (input must be reduced)."""
    return len(w) - 2 * _strip_depth(w)


def _min_rotation(w: bytes) -> int:
    if not w:
        return 0
    ww = w + w
    n = len(w)
    best = 0
    for i in range(1, n):
        if ww[i : i + n] < ww[best : best + n]:
            best = i
    return best


def canonical_cycle(w: bytes) -> bytes:
    """Canonical representative of the conjugacy class of ``w``.

    Cyclically reduces, then takes the rotation that is lexicographically
    least in the letter order a < a^-1 < b < b^-1 < ...

    >>> canonical_cycle(from_letters([2, 1])) == canonical_cycle(from_letters([1, 2]))
    True
    """
    core, _ = cyclic_strip(w)
    i = _min_rotation(core)
    return core[i:] + core[:i]


def cyclic_reduce(w: bytes) -> tuple[bytes, bytes]:
    """Split ``w`` as ``conjugator * core * conjugator^-1``.

    The core is the canonical rotation of the cyclically reduced part, so
    conjugate words share a core.

    >>> core, conj = cyclic_reduce(from_letters([-1, 2, 1]))
    >>> to_letters(core), to_letters(conj)
    ((2,), (-1,))
    """
    core, prefix = cyclic_strip(w)
    i = _min_rotation(core)
    # rotating by i conjugates by the first i letters of the core
    return core[i:] + core[:i], prefix + core[:i]


def primitive_root(cyc: bytes) -> bytes:
    """Primitive root of a cyclically reduced word (w = root^k, k maximal).

    >>> to_letters(primitive_root(from_letters([1, 2, 1, 2])))
    (1, 2)
    """
    if not cyc:
        return cyc
    p = (cyc + cyc).index(cyc, 1)
    if p < len(cyc) and len(cyc) % p == 0:
        return cyc[:p]
    return cyc


def word_conjugator(u: bytes, v: bytes):
    """A witness that ``u`` and ``v`` are conjugate, or ``None``.

    Returns ``(g, root)`` with ``u == g * v * g^-1`` and ``root`` the
    primitive root of ``u``; every conjugator then has the form
    ``root^k * g``.  Both inputs must be nontrivial.
    """
    if not u or not v:
        raise ValueError("word_conjugator expects nontrivial words")
    core_u, cu = cyclic_reduce(u)
    core_v, cv = cyclic_reduce(v)
    if core_u != core_v:
        return None
    g = concat(cu, inverse(cv))
    root = concat(cu, primitive_root(core_u), inverse(cu))
    return g, root


def rank_of(w: bytes) -> int:
    """Smallest rank whose alphabet contains every letter of ``w``."""
    if not w:
        return 0
    return max(w) // 2 + 1


def parse_word(text: str, rank: int | None = None) -> bytes:
    """Parse a-z/A-Z text into a reduced word; "1" or "" is the identity."""
    text = text.strip()
    if text in ("", "1"):
        return b""
    letters = []
    for ch in text:
        if "a" <= ch <= "z":
            letters.append(ord(ch) - ord("a") + 1)
        elif "A" <= ch <= "Z":
            letters.append(-(ord(ch) - ord("A") + 1))
        else:
            raise ValueError(f"invalid character {ch!r} in word {text!r}")
    w = from_letters(letters)
    if rank is not None:
        check_rank(w, rank)
    return w


def format_word(w: bytes) -> str:
    """Render a word as text (lowercase letters, uppercase inverses)."""
    if not w:
        return "1"
    if max(w) >= 2 * 26:
        raise ValueError("text format supports rank up to 26")
    out = []
    for b in w:
        i = b // 2
        out.append(chr(ord("A") + i) if b % 2 else chr(ord("a") + i))
    return "".join(out)
