"""Decision procedures for outer automorphisms of free groups.

Conjugacy testing for irreducible outer automorphisms and irreducibility
detection, via bounded conjugation search over a finite generating set of
the outer automorphism group, together with the supporting machinery:
free-group words, the cyclic-stretch norm, Stallings subgroup graphs,
change-of-maximal-tree generators, and candidate-loop displacement on
marked metric graphs.
"""

from outfn.autom import (
    Endo,
    OuterAutomorphism,
    compose,
    identity_endo,
    is_automorphism,
    parse_automorphism,
    format_automorphism,
)
from outfn.decide import (
    ClosureSet,
    cap_constant,
    closure_set,
    conjugacy_irreducible,
    detect_irreducible,
    s_plus,
)

__all__ = [
    "Endo",
    "OuterAutomorphism",
    "ClosureSet",
    "cap_constant",
    "closure_set",
    "compose",
    "conjugacy_irreducible",
    "detect_irreducible",
    "format_automorphism",
    "identity_endo",
    "is_automorphism",
    "parse_automorphism",
    "s_plus",
]

__version__ = "0.1.0"
