"""Polynomial feature library over (v', alpha, Vp', chi', S').

Each candidate term is a monomial identified by a 5-tuple of exponents
over the nondimensional variables, in the fixed order
(intensity, ocean damping, potential intensity, entropy deficit, shear).
Terms are kept in graded-lexicographic order (total degree first, then
ascending tuple comparison) so coefficient indices are reproducible
across runs and files.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations_with_replacement

import numpy as np

from .errors import ValidationError

N_VARIABLES = 5
VARIABLE_NAMES = ("v'", "a", "Vp", "chi", "S")

ExponentTuple = tuple[int, int, int, int, int]


@dataclass(frozen=True)
class MonomialBasis:
    """Ordered collection of monomial exponent tuples with degree bound."""

    terms: tuple[ExponentTuple, ...]
    max_degree: int
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        seen = set()
        for t in self.terms:
            if len(t) != N_VARIABLES:
                raise ValidationError(f"term {t} does not have {N_VARIABLES} exponents")
            if any(int(k) != k or k < 0 for k in t):
                raise ValidationError(f"term {t} has non-integer or negative exponent")
            if sum(t) > self.max_degree:
                raise ValidationError(f"term {t} exceeds max degree {self.max_degree}")
            if t in seen:
                raise ValidationError(f"duplicate term {t}")
            seen.add(t)
        object.__setattr__(self, "_index", {t: j for j, t in enumerate(self.terms)})

    def __len__(self) -> int:
        return len(self.terms)

    def index(self, term: ExponentTuple) -> int:
        try:
            return self._index[tuple(term)]
        except KeyError:
            raise ValidationError(f"term {term} not in basis") from None

    def exponent_array(self) -> np.ndarray:
        """Exponents as an (n_terms, 5) int64 array."""
        return np.asarray(self.terms, dtype=np.int64).reshape(len(self.terms), N_VARIABLES)

    def subset(self, indices) -> "MonomialBasis":
        return MonomialBasis(tuple(self.terms[j] for j in indices), self.max_degree)

    def render_term(self, j: int) -> str:
        """Human-readable form of term ``j``, e.g. ``v'^1 a^1 Vp^1``."""
        parts = [
            f"{name}^{k}"
            for name, k in zip(VARIABLE_NAMES, self.terms[j])
            if k > 0
        ]
        return " ".join(parts) if parts else "1"


def full_basis(max_degree: int) -> MonomialBasis:
    """All monomials of total degree <= max_degree, graded-lex ordered.

    The count is C(5 + d, d): 1 term at degree bound 0, 21 at 2, 56 at 3.
    """
    if max_degree < 0:
        raise ValidationError("max_degree must be >= 0")
    terms = set()
    for d in range(max_degree + 1):
        for combo in combinations_with_replacement(range(N_VARIABLES), d):
            exps = [0] * N_VARIABLES
            for i in combo:
                exps[i] += 1
            terms.add(tuple(exps))
    ordered = tuple(sorted(terms, key=lambda t: (sum(t), t)))
    return MonomialBasis(ordered, max_degree)


def evaluate(basis: MonomialBasis, state) -> np.ndarray:
    """Feature vector at a state: entry j is the product of variables^exponents."""
    return evaluate_arrays(basis, *[np.asarray([x]) for x in state.as_tuple()])[0]


def evaluate_arrays(basis: MonomialBasis, v, alpha, vp, chi, s) -> np.ndarray:
    """Vectorized feature evaluation.

    All five inputs are 1-d arrays of common length N; the result is
    (N, n_terms).  Exponentiation goes through a small power table since
    exponents are tiny integers.
    """
    cols = [np.asarray(a, dtype=float) for a in (v, alpha, vp, chi, s)]
    n = cols[0].shape[0]
    exps = basis.exponent_array()
    out = np.ones((n, len(basis)))
    kmax = int(exps.max(initial=0))
    for i, col in enumerate(cols):
        ptable = np.ones((kmax + 1, n))
        for k in range(1, kmax + 1):
            ptable[k] = ptable[k - 1] * col
        out *= ptable[exps[:, i]].T
    return out


def drift(model, state) -> float:
    """Deterministic intensity tendency (per 6 h) of ``model`` at ``state``."""
    return float(evaluate(model.basis, state) @ model.coefficients)
