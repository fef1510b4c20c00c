"""Correlation coefficients, triangle expectation matrices, and minimal
matrix-product (lower spectral radius) estimates.

Conventions, fixed once and used everywhere downstream:

* ``gamma(k) = sum_i q_i * p_{i+k mod M}`` where ``p`` are the marginals of the
  first process and ``q`` of the second.
* A survivor pair (x, y), x from the first process and y from the second,
  occupies the offset ``d = x - y``; its right triangle projects onto column
  d, its left triangle onto column d - 1 (columns of width 1/M**n tiling
  [-1, 1]).
* The 2x2 expectation matrix for letter k holds the expected triangle counts
  per column side: rows are the column side (L, R), columns the triangle type
  (L, R).  Its column sums equal (gamma(k+1), gamma(k)); this identity is
  asserted on every construction as a self-check of the offset geometry.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence

from . import limits
from .core import JointSurvivalDistribution, LetterSet, rotate_mask
from .errors import (
    AlphabetMismatchError,
    IndexOutOfRangeError,
    InvariantViolationError,
    ParameterOutOfRangeError,
    ResourceLimitExceededError,
)

ZERO = Fraction(0)


@dataclass(frozen=True)
class CorrelationVector:
    """All M cyclic cross-correlation coefficients of a pair of distributions."""

    values: tuple[Fraction, ...]

    def __post_init__(self):
        M = len(self.values)
        for v in self.values:
            if not ZERO <= v <= M:
                raise InvariantViolationError(f"correlation {v} outside [0, {M}]")

    @property
    def gamma_min(self) -> Fraction:
        return min(self.values)

    @property
    def size(self) -> int:
        return len(self.values)

    def __getitem__(self, k: int) -> Fraction:
        return self.values[k % len(self.values)]

    def __iter__(self):
        return iter(self.values)


def cyclic_correlations(
    mu: JointSurvivalDistribution, lam: JointSurvivalDistribution
) -> CorrelationVector:
    """gamma(k) for k = 0..M-1, exact."""
    if mu.alphabet_size != lam.alphabet_size:
        raise AlphabetMismatchError(
            f"alphabets differ: {mu.alphabet_size} vs {lam.alphabet_size}"
        )
    M = mu.alphabet_size
    p = mu.marginals().values
    q = lam.marginals().values
    values = tuple(
        sum((q[i] * p[(i + k) % M] for i in range(M)), ZERO) for k in range(M)
    )
    return CorrelationVector(values)


def indicator_correlation(x: LetterSet, y: LetterSet, e: int) -> int:
    """Coincidences of the e-th cyclic shift of x against y.

    Equals gamma(e) of the deterministic pair concentrated on (x, y).
    """
    if x.alphabet_size != y.alphabet_size:
        raise AlphabetMismatchError(
            f"alphabets differ: {x.alphabet_size} vs {y.alphabet_size}"
        )
    M = x.alphabet_size
    if not 0 <= e < M:
        raise IndexOutOfRangeError(f"shift {e} outside [0, {M})")
    return (rotate_mask(x.mask, e, M) & y.mask).bit_count()


@dataclass(frozen=True)
class ExpectationMatrix:
    """Expected per-column triangle counts of the two-type branching process.

    Rows index the parent column side (L, R); columns the child triangle
    type (L, R).  Entries are exact rationals.
    """

    ll: Fraction
    lr: Fraction
    rl: Fraction
    rr: Fraction
    label: str = ""

    def __post_init__(self):
        for v in (self.ll, self.lr, self.rl, self.rr):
            if v < 0:
                raise InvariantViolationError(f"negative expectation {v}")

    @property
    def column_sums(self) -> tuple[Fraction, Fraction]:
        """(total L triangles, total R triangles) over both column sides."""
        return (self.ll + self.rl, self.lr + self.rr)

    @property
    def max_column_sum(self) -> Fraction:
        return max(self.column_sums)

    @property
    def min_column_sum(self) -> Fraction:
        return min(self.column_sums)

    def perron_root(self) -> float:
        """Largest eigenvalue; real and nonnegative for these matrices."""
        tr = float(self.ll + self.rr)
        disc = float((self.ll - self.rr) ** 2 + 4 * self.lr * self.rl)
        return (tr + math.sqrt(disc)) / 2.0

    def rows(self) -> tuple[tuple[Fraction, Fraction], tuple[Fraction, Fraction]]:
        return ((self.ll, self.lr), (self.rl, self.rr))

    def __matmul__(self, other: "ExpectationMatrix") -> "ExpectationMatrix":
        return ExpectationMatrix(
            ll=self.ll * other.ll + self.lr * other.rl,
            lr=self.ll * other.lr + self.lr * other.rr,
            rl=self.rl * other.ll + self.rr * other.rl,
            rr=self.rl * other.lr + self.rr * other.rr,
            label=self.label + other.label,
        )

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "rows": [[str(self.ll), str(self.lr)], [str(self.rl), str(self.rr)]],
            "column_sums": [str(s) for s in self.column_sums],
        }


def expectation_matrix(
    mu: JointSurvivalDistribution, lam: JointSurvivalDistribution, k: int
) -> ExpectationMatrix:
    """Level-1 expectation matrix for column letter k.

    Entries are reconstructed from the offset geometry: a pair (x, y) with
    x - y = k contributes a right triangle to the right-side column k and a
    left triangle to column k + 1; pairs with x - y = k - M feed the
    left-side columns.
    """
    if mu.alphabet_size != lam.alphabet_size:
        raise AlphabetMismatchError(
            f"alphabets differ: {mu.alphabet_size} vs {lam.alphabet_size}"
        )
    M = mu.alphabet_size
    if not 0 <= k < M:
        raise IndexOutOfRangeError(f"letter {k} outside [0, {M})")
    p = mu.marginals().values
    q = lam.marginals().values
    rr = sum((q[i] * p[i + k] for i in range(M - k)), ZERO)
    rl = sum((q[i] * p[i + k + 1] for i in range(M - k - 1)), ZERO)
    lr = sum((q[i] * p[i + k - M] for i in range(M - k, M)), ZERO)
    ll = sum((q[i] * p[i + k + 1 - M] for i in range(M - k - 1, M)), ZERO)
    mat = ExpectationMatrix(ll=ll, lr=lr, rl=rl, rr=rr, label=_letter_label(k, M))
    gammas = cyclic_correlations(mu, lam)
    if mat.column_sums != (gammas[(k + 1) % M], gammas[k]):
        raise InvariantViolationError(
            f"column sums {mat.column_sums} != (gamma({k + 1}), gamma({k}))"
        )
    return mat


def _letter_label(k: int, M: int) -> str:
    return str(k) if M <= 10 else f"{k},"


def word_matrix(
    mu: JointSurvivalDistribution,
    lam: JointSurvivalDistribution,
    word: Sequence[int],
) -> ExpectationMatrix:
    """Product of the letter matrices along the word, left to right."""
    if len(word) == 0:
        raise ParameterOutOfRangeError("word must be nonempty")
    M = mu.alphabet_size
    cache: dict[int, ExpectationMatrix] = {}

    def letter(k: int) -> ExpectationMatrix:
        if not 0 <= k < M:
            raise IndexOutOfRangeError(f"letter {k} outside [0, {M})")
        if k not in cache:
            cache[k] = expectation_matrix(mu, lam, k)
        return cache[k]

    result = letter(int(word[0]))
    for k in word[1:]:
        result = result @ letter(int(k))
    return result


@dataclass(frozen=True)
class SpectralEstimate:
    """Minimum of norm(product)**(1/n) over all words of length n.

    ``value`` uses the named norm; ``rho_value`` is the largest-eigenvalue
    refinement of the same minimizing product, a tighter upper estimate of
    the lower spectral radius (min column sum <= eigenvalue <= norm).
    """

    n: int
    value: float
    argmin_word: tuple[int, ...]
    norm_name: str
    norm_value: Fraction
    rho_value: float

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "value": self.value,
            "argmin_word": list(self.argmin_word),
            "norm": self.norm_name,
            "norm_value": str(self.norm_value),
            "rho_value": self.rho_value,
        }


MAX_COLUMN_SUM = "max-column-sum"


def minimal_product_norms(
    matrices: Sequence[ExpectationMatrix],
    n_max: int,
    norm: str | tuple[str, Callable[[ExpectationMatrix], Fraction]] = MAX_COLUMN_SUM,
    node_budget: int | None = None,
    prune: bool = True,
) -> list[SpectralEstimate]:
    """Exact minimum over all words of length n <= n_max of norm(product)**(1/n).

    Ties between words are broken lexicographically.  With the default norm,
    branches are pruned through the supermultiplicative min-column-sum lower
    bound (min-col(AB) >= min-col(A) * min-col(B) for nonnegative matrices),
    which never discards a word that could beat the incumbent.
    """
    if n_max < 1:
        raise ParameterOutOfRangeError(f"n_max must be >= 1, got {n_max}")
    if not matrices:
        raise ParameterOutOfRangeError("need at least one matrix")
    if norm == MAX_COLUMN_SUM:
        norm_name, norm_fn = MAX_COLUMN_SUM, lambda m: m.max_column_sum
    elif isinstance(norm, tuple):
        norm_name, norm_fn = norm
        prune = False  # soundness of the bound is only known for the default norm
    else:
        raise ParameterOutOfRangeError(f"unknown norm {norm!r}")
    budget = limits.node_budget() if node_budget is None else node_budget
    cmin = min(m.min_column_sum for m in matrices)
    estimates: list[SpectralEstimate] = []
    for n in range(1, n_max + 1):
        best_norm: Fraction | None = None
        best_word: tuple[int, ...] = ()
        best_mat: ExpectationMatrix | None = None
        nodes = 0
        stack: list[tuple[ExpectationMatrix | None, tuple[int, ...]]] = [(None, ())]
        while stack:
            prefix, word = stack.pop()
            children = []
            for idx in range(len(matrices)):
                mat = matrices[idx] if prefix is None else prefix @ matrices[idx]
                nodes += 1
                if nodes > budget:
                    raise ResourceLimitExceededError(
                        f"minimal-product search exceeded {budget} nodes at n={n}",
                        partial=estimates,
                    )
                w = word + (idx,)
                if len(w) == n:
                    nv = norm_fn(mat)
                    if best_norm is None or nv < best_norm:
                        best_norm, best_word, best_mat = nv, w, mat
                    continue
                if prune and best_norm is not None:
                    bound = mat.min_column_sum * cmin ** (n - len(w))
                    if bound >= best_norm:
                        continue
                children.append((mat, w))
            # LIFO stack: push in reverse so letter 0 is explored first
            stack.extend(reversed(children))
        assert best_mat is not None and best_norm is not None
        value = float(best_norm) ** (1.0 / n) if best_norm > 0 else 0.0
        rho = best_mat.perron_root() ** (1.0 / n) if best_norm > 0 else 0.0
        estimates.append(
            SpectralEstimate(
                n=n,
                value=value,
                argmin_word=best_word,
                norm_name=norm_name,
                norm_value=best_norm,
                rho_value=rho,
            )
        )
    return estimates


def lower_spectral_radius(
    mu: JointSurvivalDistribution,
    lam: JointSurvivalDistribution,
    n_max: int,
    norm: str | tuple[str, Callable[[ExpectationMatrix], Fraction]] = MAX_COLUMN_SUM,
    node_budget: int | None = None,
) -> list[SpectralEstimate]:
    """Estimates of the lower spectral radius of the letter-matrix family.

    The reported finite-n values are exact minima over all M**n words and are
    upper bounds of the limit (the minimal norm per length is
    submultiplicative, so the n-th roots decrease to the limit).
    """
    if mu.alphabet_size != lam.alphabet_size:
        raise AlphabetMismatchError(
            f"alphabets differ: {mu.alphabet_size} vs {lam.alphabet_size}"
        )
    mats = [expectation_matrix(mu, lam, k) for k in range(mu.alphabet_size)]
    return minimal_product_norms(mats, n_max, norm=norm, node_budget=node_budget)
