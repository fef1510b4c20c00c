"""Distributed growth condition: verification, search, constructions.

A witness for column letter k is a pair of subsets (X, Y) such that

* (DG0) both sets carry positive mass under their distributions,
* (DG1) every cyclic coincidence count gamma_e(X, Y) is at least 1,
* (DG2) gamma_k(X, Y) and gamma_{k+1}(X, Y) are at least 2.

A full witness family (one pair per letter) certifies exponential triangle
growth in every subcolumn, which upgrades supercritical correlation
coefficients into an interval in the difference set.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Sequence

from . import limits
from .core import (
    JointSurvivalDistribution,
    LetterSet,
    jsc_check,
    rotate_mask,
)
from .errors import (
    AlphabetMismatchError,
    HypothesisNotMetError,
    InvariantViolationError,
    ParameterOutOfRangeError,
    ResourceLimitExceededError,
)
from .spectra import cyclic_correlations, indicator_correlation


@dataclass(frozen=True)
class DgcWitness:
    k: int
    x: LetterSet
    y: LetterSet


@dataclass(frozen=True)
class WitnessCheck:
    """Per-clause outcome of a witness verification."""

    dg0: bool
    dg1: bool
    dg2: bool
    gammas: tuple[int, ...]
    violating_e: int | None
    gamma_at_k: int
    gamma_at_next: int

    @property
    def ok(self) -> bool:
        return self.dg0 and self.dg1 and self.dg2


def _gamma_table(xmask: int, ymask: int, M: int) -> tuple[int, ...]:
    return tuple((rotate_mask(xmask, e, M) & ymask).bit_count() for e in range(M))


def _check_masks(
    dg0: bool, xmask: int, ymask: int, k: int, M: int
) -> WitnessCheck:
    gammas = _gamma_table(xmask, ymask, M)
    violating = next((e for e, g in enumerate(gammas) if g < 1), None)
    g_k = gammas[k % M]
    g_next = gammas[(k + 1) % M]
    return WitnessCheck(
        dg0=dg0,
        dg1=violating is None,
        dg2=g_k >= 2 and g_next >= 2,
        gammas=gammas,
        violating_e=violating,
        gamma_at_k=g_k,
        gamma_at_next=g_next,
    )


def verify_witness(
    mu: JointSurvivalDistribution,
    lam: JointSurvivalDistribution,
    k: int,
    x: LetterSet,
    y: LetterSet,
) -> WitnessCheck:
    """Check DG0 through DG2 for the candidate pair (x, y) at letter k."""
    M = mu.alphabet_size
    if lam.alphabet_size != M or x.alphabet_size != M or y.alphabet_size != M:
        raise AlphabetMismatchError("distributions and sets must share one alphabet")
    if not 0 <= k < M:
        raise ParameterOutOfRangeError(f"letter {k} outside [0, {M})")
    dg0 = mu.mass(x) > 0 and lam.mass(y) > 0
    return _check_masks(dg0, x.mask, y.mask, k, M)


@dataclass(frozen=True)
class DgcEntry:
    """Result for one letter: a verified witness or the best margins seen."""

    k: int
    witness: DgcWitness | None
    check: WitnessCheck | None
    reason: str | None = None
    best_dg1: int | None = None
    best_dg2: int | None = None

    def to_dict(self) -> dict:
        out: dict = {"k": self.k}
        if self.witness is not None:
            out["x"] = self.witness.x.to_string()
            out["y"] = self.witness.y.to_string()
            out["gammas"] = list(self.check.gammas) if self.check else None
        else:
            out["reason"] = self.reason
            out["best_dg1"] = self.best_dg1
            out["best_dg2"] = self.best_dg2
        return out


@dataclass(frozen=True)
class DgcReport:
    alphabet_size: int
    entries: tuple[DgcEntry, ...]
    note: str = ""

    @property
    def overall(self) -> bool:
        return len(self.entries) == self.alphabet_size and all(
            e.witness is not None and e.check is not None and e.check.ok
            for e in self.entries
        )

    def witness_for(self, k: int) -> DgcWitness | None:
        return self.entries[k].witness

    def to_dict(self) -> dict:
        return {
            "alphabet_size": self.alphabet_size,
            "overall": self.overall,
            "note": self.note,
            "entries": [e.to_dict() for e in self.entries],
        }


def _failed_report(M: int, reason: str, note: str = "") -> DgcReport:
    entries = tuple(DgcEntry(k=k, witness=None, check=None, reason=reason) for k in range(M))
    return DgcReport(alphabet_size=M, entries=entries, note=note)


def _support_masks(dist: JointSurvivalDistribution) -> Iterator[int]:
    return dist.support_masks(include_empty=False)


def _is_shift_closed(dist: JointSurvivalDistribution) -> bool:
    if dist.family is not None:
        return True
    M = dist.alphabet_size
    supp = {m for m in dist.support_masks()}
    return all(rotate_mask(m, 1, M) in supp for m in supp)


class _Budget:
    __slots__ = ("left",)

    def __init__(self, n: int):
        self.left = n

    def charge(self, n: int = 1) -> bool:
        self.left -= n
        return self.left >= 0


def _scan_for_letter(
    mu: JointSurvivalDistribution,
    lam: JointSurvivalDistribution,
    k: int,
    budget: _Budget,
) -> DgcEntry:
    """Exhaustive scan of support(mu) x support(lam) for a witness at letter k."""
    M = mu.alphabet_size
    best_dg1 = -1
    best_dg2 = -1
    for xmask in _support_masks(mu):
        for ymask in _support_masks(lam):
            if not budget.charge(M):
                raise ResourceLimitExceededError(
                    "witness search budget exhausted", partial=None
                )
            check = _check_masks(True, xmask, ymask, k, M)
            best_dg1 = max(best_dg1, min(check.gammas))
            best_dg2 = max(best_dg2, min(check.gamma_at_k, check.gamma_at_next))
            if check.ok:
                witness = DgcWitness(k=k, x=LetterSet(M, xmask), y=LetterSet(M, ymask))
                return DgcEntry(k=k, witness=witness, check=check)
    return DgcEntry(
        k=k,
        witness=None,
        check=None,
        reason="no support pair satisfies DG1 and DG2",
        best_dg1=best_dg1,
        best_dg2=best_dg2,
    )


def search_witnesses(
    mu: JointSurvivalDistribution,
    lam: JointSurvivalDistribution,
    budget: int | None = None,
) -> DgcReport:
    """Search the supports for a witness family, one pair per letter.

    When both supports are closed under the cyclic shift (always true for
    uniform m-subset families) only letter 0 is searched; the witness for
    letter k is then (X, shift^k(Y)), which has the same coincidence table
    rotated by k.
    """
    M = mu.alphabet_size
    if lam.alphabet_size != M:
        raise AlphabetMismatchError("alphabets differ")
    tracker = _Budget(limits.search_budget() if budget is None else budget)
    if mu.empty_mass == 1 or lam.empty_mass == 1:
        return _failed_report(M, "a distribution is concentrated on the empty set")
    shift_closed = _is_shift_closed(mu) and _is_shift_closed(lam)
    entries: list[DgcEntry] = []
    try:
        if shift_closed:
            base = _scan_for_letter(mu, lam, 0, tracker)
            if base.witness is None:
                entries = [
                    DgcEntry(
                        k=k,
                        witness=None,
                        check=None,
                        reason=base.reason,
                        best_dg1=base.best_dg1,
                        best_dg2=base.best_dg2,
                    )
                    for k in range(M)
                ]
                return DgcReport(M, tuple(entries), note="shift-closed supports; searched k=0")
            x0, y0 = base.witness.x, base.witness.y
            for k in range(M):
                yk = y0.shift(k)
                check = verify_witness(mu, lam, k, x0, yk)
                if not check.ok:
                    raise InvariantViolationError(
                        f"shifted witness failed verification at k={k}"
                    )
                entries.append(
                    DgcEntry(k=k, witness=DgcWitness(k=k, x=x0, y=yk), check=check)
                )
            return DgcReport(M, tuple(entries), note="shift-closed supports; searched k=0")
        for k in range(M):
            entries.append(_scan_for_letter(mu, lam, k, tracker))
        return DgcReport(M, tuple(entries))
    except ResourceLimitExceededError as exc:
        exc.partial = DgcReport(M, tuple(entries), note="partial: budget exhausted")
        raise


@dataclass(frozen=True)
class WitnessStrings:
    """Constructed witness pair for letter 0 of an m-out-of-M family.

    ``y_prime`` is the evenly spread seed string; in case 1 ``y_second`` has
    a one forced into position 1 and ``y`` is filled up to m ones at the
    leftmost zeros; in case 2 the seed already works and ``y = y_prime``.
    """

    m: int
    M: int
    x: LetterSet
    y: LetterSet
    y_prime: LetterSet
    y_second: LetterSet | None
    case: int

    def witness_for(self, k: int) -> DgcWitness:
        return DgcWitness(k=k, x=self.x, y=self.y.shift(k))


def build_witness_strings(m: int, M: int) -> WitnessStrings:
    """Construct (X, Y) for letter 0 of m-out-of-M percolation, m*m >= M+2.

    X packs all m ones at the start; Y spreads m ones so that no m
    consecutive positions (cyclically) are all zero, which already forces
    every coincidence count to be at least 1.
    """
    if M < 2 or not 1 <= m <= M:
        raise ParameterOutOfRangeError(f"need 1 <= m <= M and M >= 2, got m={m}, M={M}")
    if m * m < M + 2:
        raise HypothesisNotMetError(f"construction needs m*m >= M+2, got m={m}, M={M}")
    q, r = divmod(M, m)
    prefix = "1" + "0" * (r - 1) if r else ""
    y_prime = prefix + ("1" + "0" * (m - 1)) * q
    x_str = "1" * m + "0" * (M - m)
    if q == m - 1 and r > 0:
        case = 2
        y_second = None
        y_str = y_prime
    else:
        case = 1
        bits = list(y_prime)
        bits[1] = "1"
        y_second = "".join(bits)
        ones = y_second.count("1")
        for i, c in enumerate(bits):
            if ones >= m:
                break
            if c == "0":
                bits[i] = "1"
                ones += 1
        y_str = "".join(bits)
    x = LetterSet.from_string(x_str)
    y = LetterSet.from_string(y_str)
    if x.size != m or y.size != m:
        raise InvariantViolationError("constructed strings do not have m ones")
    check = _check_masks(True, x.mask, y.mask, 0, M)
    if not (check.dg1 and check.dg2):
        raise InvariantViolationError(
            f"constructed pair fails verification for (m={m}, M={M}): {check}"
        )
    return WitnessStrings(
        m=m,
        M=M,
        x=x,
        y=y,
        y_prime=LetterSet.from_string(y_prime),
        y_second=LetterSet.from_string(y_second) if y_second is not None else None,
        case=case,
    )


@dataclass(frozen=True)
class SecondOrderWitnesses:
    """Witness family over the collapsed two-step alphabet, for m*m = M+1.

    ``x2`` replaces every one of X by the block Y and every zero by a zero
    block; ``base_y[k2]`` is the witness partner for the word (0, k2), and
    the partner for (k1, k2) is its cyclic shift by k1*M positions.
    """

    m: int
    M: int
    x: LetterSet
    y: LetterSet
    x2: LetterSet
    base_y: tuple[LetterSet, ...]
    shifts: tuple[int, ...]

    @property
    def order2_size(self) -> int:
        return self.M * self.M

    def witness_for(self, k1: int, k2: int) -> DgcWitness:
        k = k1 * self.M + k2
        return DgcWitness(k=k, x=self.x2, y=self.base_y[k2].shift(k1 * self.M))


def _block_structure_ok(mask: int, m: int, M: int) -> bool:
    """Positive-mass test at order 2: exactly m blocks, each with m ones."""
    nonempty = 0
    for b in range(M):
        block = (mask >> (b * M)) & ((1 << M) - 1)
        c = block.bit_count()
        if c == 0:
            continue
        if c != m:
            return False
        nonempty += 1
    return nonempty == m


def build_second_order_witnesses(m: int, M: int) -> SecondOrderWitnesses:
    """Construct the two-step witness family for the boundary case m*m = M+1.

    The single-step alphabet admits no witness here (the m*m coincidences
    cannot cover all M shifts with two counts of 2), but blocks of the
    single-step strings do the job over the collapsed alphabet of size M*M.
    Every constructed pair is verified computationally.
    """
    if M < 2 or not 1 <= m <= M:
        raise ParameterOutOfRangeError(f"need 1 <= m <= M and M >= 2, got m={m}, M={M}")
    if m * m != M + 1:
        raise HypothesisNotMetError(f"construction needs m*m == M+1, got m={m}, M={M}")
    x_str = "1" * m + "0" * (M - m)
    y_str = "1" + "0" * (m - 2) + ("1" + "0" * (m - 1)) * (m - 1)
    if len(y_str) != M:
        raise InvariantViolationError("seed string has wrong length")
    zero_block = "0" * M
    x2_str = y_str * m + zero_block * (M - m)
    x2 = LetterSet.from_string(x2_str)
    M2 = M * M
    base_y: list[LetterSet] = []
    shifts: list[int] = []
    for k2 in range(M):
        sx = x_str[k2:] + x_str[:k2]
        body = sx + zero_block * (m - 2) + (sx + zero_block * (m - 1)) * (m - 1)
        if len(body) != M2:
            raise InvariantViolationError("order-2 string has wrong length")
        s = 0 if k2 <= m - 2 else 1
        y2 = LetterSet.from_string(body).shift(M * s)
        if not (_block_structure_ok(x2.mask, m, M) and _block_structure_ok(y2.mask, m, M)):
            raise InvariantViolationError("order-2 strings break the block structure")
        check = _check_masks(True, x2.mask, y2.mask, k2, M2)
        if not (check.dg1 and check.dg2):
            raise InvariantViolationError(
                f"order-2 pair fails verification for (m={m}, M={M}), k2={k2}"
            )
        base_y.append(y2)
        shifts.append(s)
    return SecondOrderWitnesses(
        m=m,
        M=M,
        x=LetterSet.from_string(x_str),
        y=LetterSet.from_string(y_str),
        x2=x2,
        base_y=tuple(base_y),
        shifts=tuple(shifts),
    )


def propagate_witness(
    x: LetterSet, y: LetterSet, n: int, cap: int | None = None
) -> tuple[LetterSet, LetterSet]:
    """Lift a witness pair to the n-step alphabet: all n-letter words over each set."""
    if n < 1:
        raise ParameterOutOfRangeError(f"order must be >= 1, got {n}")
    if x.alphabet_size != y.alphabet_size:
        raise AlphabetMismatchError("alphabets differ")
    if n == 1:
        return x, y
    M = x.alphabet_size
    cap = limits.atom_cap() if cap is None else cap
    if x.size**n > cap or y.size**n > cap:
        raise ResourceLimitExceededError(f"propagated set size exceeds cap {cap}")

    def lift(s: LetterSet) -> LetterSet:
        values = [0]
        for _ in range(n):
            values = [v * M + l for v in values for l in s.members]
        return LetterSet.from_members(M**n, values)

    return lift(x), lift(y)


def jsc_witnesses(
    mu: JointSurvivalDistribution, lam: JointSurvivalDistribution
) -> DgcReport:
    """Witness family from the marginal supports, available when the joint
    survival condition holds and every correlation coefficient exceeds 1."""
    gammas = cyclic_correlations(mu, lam)
    if any(g <= 1 for g in gammas):
        raise HypothesisNotMetError(
            f"needs every correlation coefficient > 1, got min {gammas.gamma_min}"
        )
    M = mu.alphabet_size
    ok_mu, supp_mu = jsc_check(mu)
    ok_lam, supp_lam = jsc_check(lam)
    if not (ok_mu and ok_lam):
        return _failed_report(
            M, "joint survival condition fails: marginal support has zero mass"
        )
    entries = []
    for k in range(M):
        check = verify_witness(mu, lam, k, supp_mu, supp_lam)
        if not check.ok:
            raise InvariantViolationError(
                "support witness failed verification despite supercritical coefficients"
            )
        entries.append(
            DgcEntry(k=k, witness=DgcWitness(k=k, x=supp_mu, y=supp_lam), check=check)
        )
    return DgcReport(M, tuple(entries), note="marginal supports as witnesses")


def growth_probability_bound(
    report: DgcReport,
    mu: JointSurvivalDistribution,
    lam: JointSurvivalDistribution,
    n: int,
) -> Fraction:
    """Exact lower bound on the probability that every witness pair drives
    the growth process for n consecutive steps.

    The pair for letter k must repeat for each of the |X_k|**(j-1) squares
    alive at step j, whence the exponents sum(|X_k|**(j-1), j=1..n).
    """
    if not report.overall:
        raise HypothesisNotMetError("bound needs a complete witness family")
    if n < 0:
        raise ParameterOutOfRangeError(f"n must be >= 0, got {n}")
    result = Fraction(1)
    for entry in report.entries:
        w = entry.witness
        ex = sum(w.x.size ** (j - 1) for j in range(1, n + 1))
        ey = sum(w.y.size ** (j - 1) for j in range(1, n + 1))
        result *= mu.mass(w.x) ** ex * lam.mass(w.y) ** ey
    return result


def log10_fraction(value: Fraction) -> float:
    """log10 of a positive rational without converting it to a float.

    Needed because growth bounds underflow double precision long before
    their exact value stops being meaningful.
    """
    if value <= 0:
        raise ParameterOutOfRangeError("log of a nonpositive value")
    return math.log10(value.numerator) - math.log10(value.denominator)
