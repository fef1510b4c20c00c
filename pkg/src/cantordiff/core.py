"""Alphabets, subsets-as-bitstrings, and joint survival distributions.

A joint survival distribution is an exact-rational probability measure on the
subsets of the alphabet {0, .., M-1}; one draw from it decides which of the M
subintervals of a surviving interval live on to the next construction step.
All masses are ``fractions.Fraction`` so that boundary comparisons (gamma
against 1, masses summing to 1) are exact.

Subsets double as binary strings of length M: position ``i`` (leftmost is
position 0) is '1' exactly when letter ``i`` belongs to the set.  Internally a
subset is a single arbitrary-precision bitmask, which keeps coincidence
counting a word-parallel popcount at every alphabet size, including the
collapsed alphabets of size M**n.

All types here are immutable after construction and safe to share across
threads; sampling takes an explicit generator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations
from typing import Iterable, Iterator, Sequence

import numpy as np

from . import limits
from .errors import (
    AlphabetMismatchError,
    InvariantViolationError,
    MassExceedsOneError,
    MemberOutOfRangeError,
    NegativeMassError,
    ParameterOutOfRangeError,
    ResourceLimitExceededError,
)

RationalLike = Fraction | int | str

ZERO = Fraction(0)
ONE = Fraction(1)


def _full_mask(size: int) -> int:
    return (1 << size) - 1


def rotate_mask(mask: int, k: int, size: int) -> int:
    """Bitmask of the k-th cyclic shift: letter x moves to x - k (mod size)."""
    k %= size
    if k == 0:
        return mask
    return ((mask >> k) | (mask << (size - k))) & _full_mask(size)


@dataclass(frozen=True)
class Alphabet:
    """The M equal subintervals of one construction step, as letters 0..M-1."""

    size: int

    def __post_init__(self):
        if self.size < 2:
            raise ParameterOutOfRangeError(f"alphabet size must be >= 2, got {self.size}")

    def letters(self) -> range:
        return range(self.size)


@dataclass(frozen=True, order=True)
class LetterSet:
    """A subset of {0, .., alphabet_size-1}, stored as a bitmask (bit i = letter i)."""

    alphabet_size: int
    mask: int

    def __post_init__(self):
        if self.alphabet_size < 1:
            raise ParameterOutOfRangeError(f"alphabet size must be >= 1, got {self.alphabet_size}")
        if not 0 <= self.mask < (1 << self.alphabet_size):
            raise MemberOutOfRangeError(
                f"mask {self.mask:#x} does not fit an alphabet of size {self.alphabet_size}"
            )

    @classmethod
    def from_members(cls, alphabet_size: int, members: Iterable[int]) -> "LetterSet":
        mask = 0
        for m in members:
            m = int(m)
            if not 0 <= m < alphabet_size:
                raise MemberOutOfRangeError(f"letter {m} outside alphabet of size {alphabet_size}")
            mask |= 1 << m
        return cls(alphabet_size, mask)

    @classmethod
    def from_string(cls, bits: str) -> "LetterSet":
        if not bits or set(bits) - {"0", "1"}:
            raise MemberOutOfRangeError(f"not a binary string: {bits!r}")
        mask = 0
        for i, c in enumerate(bits):
            if c == "1":
                mask |= 1 << i
        return cls(len(bits), mask)

    @classmethod
    def full(cls, alphabet_size: int) -> "LetterSet":
        return cls(alphabet_size, _full_mask(alphabet_size))

    @classmethod
    def empty(cls, alphabet_size: int) -> "LetterSet":
        return cls(alphabet_size, 0)

    @property
    def members(self) -> tuple[int, ...]:
        return tuple(i for i in range(self.alphabet_size) if (self.mask >> i) & 1)

    @property
    def size(self) -> int:
        return self.mask.bit_count()

    def to_string(self) -> str:
        return "".join("1" if (self.mask >> i) & 1 else "0" for i in range(self.alphabet_size))

    def shift(self, k: int) -> "LetterSet":
        """Cyclic shift: member x moves to x - k (mod alphabet_size).

        On strings this is the usual left rotation by k positions.
        """
        return LetterSet(self.alphabet_size, rotate_mask(self.mask, k, self.alphabet_size))

    def __contains__(self, letter: int) -> bool:
        return 0 <= letter < self.alphabet_size and bool((self.mask >> letter) & 1)

    def __len__(self) -> int:
        return self.size

    def __str__(self) -> str:
        return self.to_string()


@dataclass(frozen=True)
class MarginalVector:
    """Per-letter survival probabilities, exact."""

    values: tuple[Fraction, ...]

    def __post_init__(self):
        for v in self.values:
            if not ZERO <= v <= ONE:
                raise ParameterOutOfRangeError(f"marginal {v} outside [0, 1]")

    @property
    def size(self) -> int:
        return len(self.values)

    def __iter__(self):
        return iter(self.values)

    def __getitem__(self, i: int) -> Fraction:
        return self.values[i]


@dataclass(frozen=True)
class UniformSubsetFamily:
    """Symbolic atom kind: all C(M, m) m-element subsets carry ``mass_each``.

    Used so that correlated distributions never enumerate their support
    unless an operation genuinely needs the atoms.
    """

    m: int
    mass_each: Fraction
    count: int

    @property
    def total(self) -> Fraction:
        return self.mass_each * self.count


class JointSurvivalDistribution:
    """Probability measure on subsets of {0, .., M-1} with exact masses.

    Zero-mass atoms are never stored; the empty set appears explicitly when
    its mass is positive.  Instances are immutable; build them through
    :func:`make_distribution`, :func:`make_correlated` or
    :func:`make_independent`.
    """

    __slots__ = ("alphabet_size", "_masses", "_family", "_marginals", "_sample_table")

    def __init__(self, alphabet_size: int, masses: dict[int, Fraction],
                 family: UniformSubsetFamily | None = None):
        if alphabet_size < 2:
            raise ParameterOutOfRangeError(f"alphabet size must be >= 2, got {alphabet_size}")
        self.alphabet_size = alphabet_size
        self._masses = {m: w for m, w in masses.items() if w != 0}
        self._family = family
        self._marginals: MarginalVector | None = None
        self._sample_table = None
        total = sum(self._masses.values(), ZERO)
        if family is not None:
            total += family.total
        if total != 1:
            raise InvariantViolationError(f"atom masses sum to {total}, not 1")

    # -- basic accessors ---------------------------------------------------

    @property
    def family(self) -> UniformSubsetFamily | None:
        return self._family

    @property
    def is_uniform_family(self) -> bool:
        return self._family is not None

    @property
    def empty_mass(self) -> Fraction:
        return self._masses.get(0, ZERO)

    def mass(self, x: LetterSet) -> Fraction:
        if x.alphabet_size != self.alphabet_size:
            raise AlphabetMismatchError(
                f"set over alphabet {x.alphabet_size}, distribution over {self.alphabet_size}"
            )
        return self._mass_of_mask(x.mask)

    def _mass_of_mask(self, mask: int) -> Fraction:
        fam = self._family
        if fam is not None and mask != 0:
            return fam.mass_each if mask.bit_count() == fam.m else ZERO
        return self._masses.get(mask, ZERO)

    def atom_count(self) -> int:
        n = len(self._masses)
        if self._family is not None:
            n += self._family.count
        return n

    # -- derived quantities --------------------------------------------------

    def marginals(self) -> MarginalVector:
        if self._marginals is None:
            M = self.alphabet_size
            if self._family is not None:
                # every letter lies in the same share of the m-subsets
                p = self._family.total * Fraction(self._family.m, M)
                values = [p] * M
            else:
                values = [ZERO] * M
                for mask, w in self._masses.items():
                    i = 0
                    while mask:
                        if mask & 1:
                            values[i] += w
                        mask >>= 1
                        i += 1
            self._marginals = MarginalVector(tuple(values))
        return self._marginals

    def support_masks(self, include_empty: bool = False) -> Iterator[int]:
        """Masks of positive-mass atoms, in a deterministic order."""
        if include_empty and 0 in self._masses:
            yield 0
        if self._family is not None:
            M, m = self.alphabet_size, self._family.m
            for comb in combinations(range(M), m):
                mask = 0
                for c in comb:
                    mask |= 1 << c
                yield mask
        for mask in sorted(self._masses):
            if mask != 0:
                yield mask

    def atoms(self) -> Iterator[tuple[LetterSet, Fraction]]:
        """(set, mass) pairs with positive mass, empty set first."""
        if 0 in self._masses:
            yield LetterSet.empty(self.alphabet_size), self._masses[0]
        if self._family is not None:
            each = self._family.mass_each
            for mask in self.support_masks():
                yield LetterSet(self.alphabet_size, mask), each
        else:
            for mask in sorted(self._masses):
                if mask != 0:
                    yield LetterSet(self.alphabet_size, mask), self._masses[mask]

    def materialize(self, cap: int | None = None) -> "JointSurvivalDistribution":
        """Explicit-atom copy of this distribution (expands a lazy family)."""
        if self._family is None:
            return self
        cap = limits.atom_cap() if cap is None else cap
        if self.atom_count() > cap:
            raise ResourceLimitExceededError(
                f"materializing {self.atom_count()} atoms exceeds cap {cap}"
            )
        masses = dict(self._masses)
        each = self._family.mass_each
        for mask in self.support_masks():
            masses[mask] = each
        return JointSurvivalDistribution(self.alphabet_size, masses)

    # -- serialization -------------------------------------------------------

    def to_dict(self, cap: int | None = None) -> dict:
        explicit = self.materialize(cap)
        atoms = []
        if 0 in explicit._masses:
            atoms.append({"members": [], "mass": str(explicit._masses[0])})
        for mask in sorted(explicit._masses):
            if mask == 0:
                continue
            members = [i for i in range(self.alphabet_size) if (mask >> i) & 1]
            atoms.append({"members": members, "mass": str(explicit._masses[mask])})
        return {"M": self.alphabet_size, "atoms": atoms}

    @classmethod
    def from_dict(cls, data: dict) -> "JointSurvivalDistribution":
        try:
            M = int(data["M"])
            atoms = [
                (LetterSet.from_members(M, a["members"]), Fraction(str(a["mass"])))
                for a in data.get("atoms", [])
            ]
        except (KeyError, TypeError, ValueError) as exc:
            raise ParameterOutOfRangeError(f"malformed distribution literal: {exc}") from exc
        return make_distribution(M, atoms)

    # -- comparison ------------------------------------------------------------

    def _canonical_masses(self) -> dict[int, Fraction]:
        if self._family is None:
            return self._masses
        return self.materialize()._masses

    def __eq__(self, other) -> bool:
        if not isinstance(other, JointSurvivalDistribution):
            return NotImplemented
        if self.alphabet_size != other.alphabet_size:
            return False
        if self._family is not None and other._family is not None:
            return self._family == other._family and self._masses == other._masses
        return self._canonical_masses() == other._canonical_masses()

    def __hash__(self):
        return hash((self.alphabet_size, self._family, frozenset(self._masses.items())))

    def __repr__(self) -> str:
        if self._family is not None:
            return (
                f"JointSurvivalDistribution(M={self.alphabet_size}, "
                f"uniform {self._family.m}-subsets, empty={self.empty_mass})"
            )
        return f"JointSurvivalDistribution(M={self.alphabet_size}, atoms={self.atom_count()})"

    # -- sampling support ------------------------------------------------------

    def _sampling_table(self):
        """Cumulative float masses plus per-atom member arrays, cached."""
        if self._sample_table is None:
            masks = [m for m in sorted(self._masses)]
            weights = np.array([float(self._masses[m]) for m in masks], dtype=np.float64)
            cum = np.cumsum(weights)
            if len(cum):
                cum[-1] = 1.0
            members = [
                np.array([i for i in range(self.alphabet_size) if (m >> i) & 1], dtype=np.int64)
                for m in masks
            ]
            self._sample_table = (cum, masks, members)
        return self._sample_table


# -- constructors ---------------------------------------------------------------


def make_distribution(
    alphabet_size: int,
    atoms: Iterable[tuple[LetterSet | Iterable[int], RationalLike]],
) -> JointSurvivalDistribution:
    """Validated distribution from (subset, mass) pairs.

    Duplicate atoms are merged; any mass deficit up to 1 is assigned to the
    empty set.
    """
    acc: dict[int, Fraction] = {}
    for letters, mass in atoms:
        if isinstance(letters, LetterSet):
            if letters.alphabet_size != alphabet_size:
                raise AlphabetMismatchError(
                    f"atom over alphabet {letters.alphabet_size}, expected {alphabet_size}"
                )
            mask = letters.mask
        else:
            mask = LetterSet.from_members(alphabet_size, letters).mask
        w = Fraction(mass)
        if w < 0:
            raise NegativeMassError(f"atom mass {w} is negative")
        if w == 0:
            continue
        acc[mask] = acc.get(mask, ZERO) + w
    total = sum(acc.values(), ZERO)
    if total > 1:
        raise MassExceedsOneError(f"atom masses sum to {total} > 1")
    if total < 1:
        acc[0] = acc.get(0, ZERO) + (ONE - total)
    return JointSurvivalDistribution(alphabet_size, acc)


def make_correlated(m: int, M: int, p: RationalLike) -> JointSurvivalDistribution:
    """m-out-of-M percolation: every m-subset has the same positive mass.

    ``p`` is the per-letter marginal; the empty set absorbs 1 - p*M/m.
    """
    if M < 2:
        raise ParameterOutOfRangeError(f"M must be >= 2, got {M}")
    if not 1 <= m <= M:
        raise ParameterOutOfRangeError(f"m must lie in [1, {M}], got {m}")
    p = Fraction(p)
    if not ZERO < p <= Fraction(m, M):
        raise ParameterOutOfRangeError(f"p must lie in (0, {Fraction(m, M)}], got {p}")
    empty = ONE - p * Fraction(M, m)
    count = math.comb(M, m)
    family = UniformSubsetFamily(m=m, mass_each=(ONE - empty) / count, count=count)
    masses = {0: empty} if empty > 0 else {}
    return JointSurvivalDistribution(M, masses, family=family)


def make_independent(
    p: MarginalVector | Sequence[RationalLike],
) -> JointSurvivalDistribution:
    """Distribution under which letters survive independently with the given marginals."""
    values = tuple(p.values) if isinstance(p, MarginalVector) else tuple(Fraction(v) for v in p)
    M = len(values)
    if M < 2:
        raise ParameterOutOfRangeError(f"need at least 2 marginals, got {M}")
    for v in values:
        if not ZERO <= v <= ONE:
            raise ParameterOutOfRangeError(f"marginal {v} outside [0, 1]")
    certain = [i for i, v in enumerate(values) if v == 1]
    random = [i for i, v in enumerate(values) if ZERO < v < ONE]
    if 1 << len(random) > limits.atom_cap():
        raise ResourceLimitExceededError(
            f"independent support of 2**{len(random)} atoms exceeds cap {limits.atom_cap()}"
        )
    base = 0
    for i in certain:
        base |= 1 << i
    masses: dict[int, Fraction] = {}
    for bits in range(1 << len(random)):
        mask = base
        w = ONE
        for j, i in enumerate(random):
            if (bits >> j) & 1:
                mask |= 1 << i
                w *= values[i]
            else:
                w *= ONE - values[i]
        masses[mask] = masses.get(mask, ZERO) + w
    return JointSurvivalDistribution(M, masses)


def uniform_family_parameters(dist: JointSurvivalDistribution) -> tuple[int, int] | None:
    """(m, M) when the distribution is a uniform m-subset family, else None.

    Recognizes both the lazy family representation and explicit atom lists
    with the same shape.
    """
    M = dist.alphabet_size
    if dist.family is not None:
        return dist.family.m, M
    sizes = set()
    weights = set()
    n_atoms = 0
    for mask, w in dist._canonical_masses().items():
        if mask == 0:
            continue
        sizes.add(mask.bit_count())
        weights.add(w)
        n_atoms += 1
    if len(sizes) == 1 and len(weights) == 1:
        m = sizes.pop()
        if n_atoms == math.comb(M, m):
            return m, M
    return None


# -- operations -------------------------------------------------------------------


def marginals(dist: JointSurvivalDistribution) -> MarginalVector:
    """Per-letter survival probabilities p_i = sum of masses of atoms containing i."""
    return dist.marginals()


def jsc_check(dist: JointSurvivalDistribution) -> tuple[bool, LetterSet]:
    """Whether the marginal support itself carries positive mass, plus that support."""
    supp_mask = 0
    for i, v in enumerate(dist.marginals()):
        if v > 0:
            supp_mask |= 1 << i
    supp = LetterSet(dist.alphabet_size, supp_mask)
    return dist.mass(supp) > 0, supp


def _explicit_atoms(dist: JointSurvivalDistribution, cap: int) -> list[tuple[int, Fraction]]:
    if dist.atom_count() > cap:
        raise ResourceLimitExceededError(
            f"distribution with {dist.atom_count()} atoms exceeds cap {cap}"
        )
    out: list[tuple[int, Fraction]] = []
    if dist.empty_mass > 0:
        out.append((0, dist.empty_mass))
    fam = dist.family
    if fam is not None:
        out.extend((mask, fam.mass_each) for mask in dist.support_masks())
    else:
        out.extend((mask, w) for mask, w in sorted(dist._masses.items()) if mask != 0)
    return out


def _compose(
    outer: JointSurvivalDistribution,
    inner: JointSurvivalDistribution,
    cap: int,
) -> JointSurvivalDistribution:
    """Distribution of one coarse step refined by an independent inner step per letter."""
    m2 = inner.alphabet_size
    inner_atoms = _explicit_atoms(inner, cap)
    result: dict[int, Fraction] = {}
    for omask, ow in _explicit_atoms(outer, cap):
        partial: dict[int, Fraction] = {0: ow}
        i = 0
        mask = omask
        while mask:
            if mask & 1:
                shift = i * m2
                nxt: dict[int, Fraction] = {}
                for acc_mask, acc_w in partial.items():
                    for imask, iw in inner_atoms:
                        key = acc_mask | (imask << shift)
                        prev = nxt.get(key)
                        nxt[key] = iw * acc_w if prev is None else prev + iw * acc_w
                    if len(nxt) > cap:
                        raise ResourceLimitExceededError(
                            f"expanded support exceeds atom cap {cap}"
                        )
                partial = nxt
            mask >>= 1
            i += 1
        for smask, w in partial.items():
            result[smask] = result.get(smask, ZERO) + w
        if len(result) > cap:
            raise ResourceLimitExceededError(f"expanded support exceeds atom cap {cap}")
    dist = JointSurvivalDistribution(outer.alphabet_size * m2, result)
    return dist


def expand_order(
    dist: JointSurvivalDistribution, n: int, cap: int | None = None
) -> JointSurvivalDistribution:
    """Distribution of n collapsed construction steps, over the alphabet M**n.

    The member ``i*M**(n-1) + j`` survives when coarse letter ``i`` survives
    the first step and ``j`` survives the remaining n-1 steps inside it.
    """
    if n < 1:
        raise ParameterOutOfRangeError(f"order must be >= 1, got {n}")
    cap = limits.atom_cap() if cap is None else cap
    if n == 1:
        return dist
    inner = expand_order(dist, n - 1, cap)
    return _compose(dist, inner, cap)


def sample_subset(dist: JointSurvivalDistribution, rng: np.random.Generator) -> LetterSet:
    """One draw from the distribution.

    Correlated families use the two-stage scheme (die with the empty-set
    mass, otherwise a uniform m-subset), so their support never materializes.
    """
    M = dist.alphabet_size
    fam = dist.family
    if fam is not None:
        if float(rng.random()) < float(dist.empty_mass):
            return LetterSet.empty(M)
        chosen = rng.choice(M, size=fam.m, replace=False)
        return LetterSet.from_members(M, (int(c) for c in chosen))
    cum, masks, _ = dist._sampling_table()
    idx = int(np.searchsorted(cum, rng.random(), side="right"))
    return LetterSet(M, masks[min(idx, len(masks) - 1)])
