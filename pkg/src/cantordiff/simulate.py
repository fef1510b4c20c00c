"""Seeded sampling of construction trees and difference-set diagnostics.

A realization stores, per level n, the sorted survivor addresses (integers in
[0, M**n)).  Two independent realizations define a product set whose 45-degree
projection onto [-1, 1] is the finite-depth stand-in for the difference set:
a survivor pair (x, y) sits on offset d = x - y, its right triangle covers
projection column d and its left triangle column d - 1 (columns of width
1/M**n, indexed -M**n .. M**n - 1).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import limits
from .core import (
    JointSurvivalDistribution,
    LetterSet,
    make_distribution,
)
from .errors import (
    AlphabetMismatchError,
    DepthMismatchError,
    HypothesisNotMetError,
    IndexOutOfRangeError,
    InvariantViolationError,
    ParameterOutOfRangeError,
    ResourceLimitExceededError,
    WordLengthMismatchError,
)
from .rng import substream
from .spectra import ExpectationMatrix, word_matrix
from .dgc import _check_masks

_SPARSE_PAIR_LIMIT = 2_000_000


def word_value(word: Sequence[int], M: int) -> int:
    """Integer addressed by a word, most significant letter first."""
    v = 0
    for k in word:
        k = int(k)
        if not 0 <= k < M:
            raise IndexOutOfRangeError(f"letter {k} outside [0, {M})")
        v = v * M + k
    return v


@dataclass(frozen=True, eq=False)
class Realization:
    """Nested survivor sets F^0 through F^depth of one sampled construction."""

    alphabet_size: int
    depth: int
    levels: tuple[np.ndarray, ...]
    seed_key: tuple[int, ...]

    def level(self, n: int) -> np.ndarray:
        if not 0 <= n <= self.depth:
            raise DepthMismatchError(f"level {n} outside sampled depth {self.depth}")
        return self.levels[n]

    def survivors(self, n: int) -> int:
        return int(self.level(n).size)


def _assert_nested(levels: Sequence[np.ndarray], M: int) -> None:
    for n in range(1, len(levels)):
        parents = levels[n - 1]
        childs = levels[n]
        if childs.size and not np.all(np.isin(childs // M, parents)):
            raise InvariantViolationError(f"level {n} contains an orphan address")


def _sample_children(
    dist: JointSurvivalDistribution, parents: np.ndarray, rng: np.random.Generator
) -> np.ndarray:
    M = dist.alphabet_size
    K = parents.size
    if K == 0:
        return parents
    fam = dist.family
    if fam is not None:
        alive = rng.random(K) >= float(dist.empty_mass)
        live = parents[alive]
        if live.size == 0:
            return live
        keys = rng.random((live.size, M))
        chosen = np.argsort(keys, axis=1)[:, : fam.m]
        children = (live[:, None] * M + chosen).ravel()
        return np.sort(children)
    cum, masks, members = dist._sampling_table()
    idx = np.searchsorted(cum, rng.random(K), side="right")
    idx = np.minimum(idx, len(masks) - 1)
    parts = []
    for a, mem in enumerate(members):
        if mem.size == 0:
            continue
        sel = parents[idx == a]
        if sel.size:
            parts.append((sel[:, None] * M + mem[None, :]).ravel())
    if not parts:
        return np.empty(0, dtype=np.int64)
    return np.sort(np.concatenate(parts))


def sample_realization(
    dist: JointSurvivalDistribution,
    depth: int,
    seed: int | tuple[int, ...],
    survivor_cap: int | None = None,
) -> Realization:
    """Sample F^0 .. F^depth; each surviving parent draws one subset from dist."""
    if depth < 0:
        raise ParameterOutOfRangeError(f"depth must be >= 0, got {depth}")
    cap = limits.survivor_cap() if survivor_cap is None else survivor_cap
    mean = float(sum(float(v) for v in dist.marginals()))
    expected = sum(mean**j for j in range(depth + 1))
    if expected > cap:
        raise ResourceLimitExceededError(
            f"expected survivor total {expected:.3g} exceeds cap {cap}"
        )
    seed_key = (seed,) if isinstance(seed, int) else tuple(int(s) for s in seed)
    rng = substream(*seed_key)
    levels = [np.zeros(1, dtype=np.int64)]
    for _ in range(depth):
        children = _sample_children(dist, levels[-1], rng)
        if children.size > cap:
            raise ResourceLimitExceededError(
                f"sampled level of {children.size} survivors exceeds cap {cap}"
            )
        levels.append(children)
    _assert_nested(levels, dist.alphabet_size)
    return Realization(
        alphabet_size=dist.alphabet_size,
        depth=depth,
        levels=tuple(levels),
        seed_key=seed_key,
    )


def deterministic_realization(survivor: LetterSet, depth: int,
                              survivor_cap: int | None = None) -> Realization:
    """Realization of the deterministic process that always draws ``survivor``."""
    if depth < 0:
        raise ParameterOutOfRangeError(f"depth must be >= 0, got {depth}")
    cap = limits.survivor_cap() if survivor_cap is None else survivor_cap
    if survivor.size and survivor.size**depth > cap:
        raise ResourceLimitExceededError("deterministic tree exceeds survivor cap")
    M = survivor.alphabet_size
    members = np.array(survivor.members, dtype=np.int64)
    levels = [np.zeros(1, dtype=np.int64)]
    for _ in range(depth):
        prev = levels[-1]
        if prev.size == 0 or members.size == 0:
            levels.append(np.empty(0, dtype=np.int64))
            continue
        levels.append(np.sort((prev[:, None] * M + members[None, :]).ravel()))
    return Realization(alphabet_size=M, depth=depth, levels=tuple(levels), seed_key=())


@dataclass(frozen=True, eq=False)
class DiagonalCounts:
    """Pair counts per offset d = x - y, for x, y survivors at one level."""

    alphabet_size: int
    depth: int
    values: np.ndarray  # int64, length 2*M**depth - 1; offset d at index d + M**depth - 1
    backend: str

    @property
    def span(self) -> int:
        return self.alphabet_size**self.depth

    def count(self, d: int) -> int:
        idx = d + self.span - 1
        if not 0 <= idx < self.values.size:
            return 0
        return int(self.values[idx])

    @property
    def total_pairs(self) -> int:
        return int(self.values.sum())

    def nonzero_offsets(self) -> np.ndarray:
        return np.flatnonzero(self.values) - (self.span - 1)


def _counts_sparse(a: np.ndarray, b: np.ndarray, span: int) -> np.ndarray:
    values = np.zeros(2 * span - 1, dtype=np.int64)
    if a.size == 0 or b.size == 0:
        return values
    chunk = max(1, _SPARSE_PAIR_LIMIT // max(1, b.size))
    for start in range(0, a.size, chunk):
        diffs = (a[start : start + chunk, None] - b[None, :]).ravel()
        values += np.bincount(diffs + span - 1, minlength=2 * span - 1).astype(np.int64)
    return values


def _counts_fft(a: np.ndarray, b: np.ndarray, span: int) -> np.ndarray:
    if span > limits.fft_cap():
        raise ResourceLimitExceededError(
            f"index space {span} exceeds FFT cap {limits.fft_cap()}"
        )
    ind_a = np.zeros(span, dtype=np.float64)
    ind_b = np.zeros(span, dtype=np.float64)
    ind_a[a] = 1.0
    ind_b[b] = 1.0
    L = 1 << int(2 * span - 1).bit_length()
    fa = np.fft.rfft(ind_a, L)
    fb = np.fft.rfft(ind_b, L)
    corr = np.fft.irfft(fa * np.conj(fb), L)
    # counts(d) = sum_y 1A(y + d) 1B(y); negative d wraps to the tail
    full = np.concatenate([corr[L - span + 1 :], corr[: span]])
    rounded = np.rint(full)
    if np.max(np.abs(full - rounded)) > 0.25:
        raise InvariantViolationError("FFT correlation drifted from integers")
    return rounded.astype(np.int64)


def diagonal_counts(
    r1: Realization,
    r2: Realization,
    n: int,
    backend: str = "auto",
) -> DiagonalCounts:
    """Exact pair counts per offset at level n.

    Two interchangeable backends: a sparse merge over explicit differences
    and an FFT cross-correlation of indicator vectors; they agree exactly
    (the FFT result is rounded and checked against an integer drift guard).
    """
    if r1.alphabet_size != r2.alphabet_size:
        raise AlphabetMismatchError("realizations have different alphabets")
    if n > r1.depth or n > r2.depth:
        raise DepthMismatchError(f"level {n} beyond sampled depths")
    a = r1.level(n)
    b = r2.level(n)
    span = r1.alphabet_size**n
    if backend == "auto":
        backend = "sparse" if a.size * b.size <= _SPARSE_PAIR_LIMIT else "fft"
    if backend == "sparse":
        values = _counts_sparse(a, b, span)
    elif backend == "fft":
        values = _counts_fft(a, b, span)
    else:
        raise ParameterOutOfRangeError(f"unknown backend {backend!r}")
    return DiagonalCounts(
        alphabet_size=r1.alphabet_size, depth=n, values=values, backend=backend
    )


def triangle_counts(
    dc: DiagonalCounts, side: str, word: Sequence[int]
) -> tuple[int, int]:
    """(left-triangle count, right-triangle count) in the column of ``word``.

    ``side`` selects the right half [0, 1] ('R') or left half [-1, 0] ('L')
    of the projection range.
    """
    if len(word) != dc.depth:
        raise WordLengthMismatchError(
            f"word of length {len(word)} for counts at level {dc.depth}"
        )
    v = word_value(word, dc.alphabet_size)
    span = dc.span
    if side == "R":
        return dc.count(v + 1), dc.count(v)
    if side == "L":
        return dc.count(v + 1 - span), dc.count(v - span)
    raise ParameterOutOfRangeError(f"side must be 'L' or 'R', got {side!r}")


@dataclass(frozen=True, eq=False)
class OccupancyProfile:
    """Which projection columns contain at least one triangle, plus the runs."""

    alphabet_size: int
    depth: int
    occupied: np.ndarray  # bool, length 2*M**depth; index i is column i - M**depth
    runs: tuple[tuple[int, int], ...]  # (first column, length), maximal runs

    @property
    def span(self) -> int:
        return self.alphabet_size**self.depth

    @property
    def n_occupied(self) -> int:
        return int(self.occupied.sum())

    @property
    def longest_run(self) -> int:
        return max((length for _, length in self.runs), default=0)

    @property
    def full(self) -> bool:
        return bool(self.occupied.all())

    def to_rle(self) -> list[dict]:
        return [{"start": int(s), "length": int(l)} for s, l in self.runs]


def occupancy_profile(dc: DiagonalCounts) -> OccupancyProfile:
    """Column occupancy from pair counts: column c is hit by right triangles
    of offset c and left triangles of offset c + 1."""
    span = dc.span
    padded = np.zeros(2 * span + 1, dtype=np.int64)
    padded[1:-1] = dc.values
    occupied = (padded[:-1] + padded[1:]) > 0
    flat = np.flatnonzero(np.diff(np.concatenate(([0], occupied.astype(np.int8), [0]))))
    starts, ends = flat[::2], flat[1::2]
    runs = tuple((int(s) - span, int(e - s)) for s, e in zip(starts, ends))
    return OccupancyProfile(
        alphabet_size=dc.alphabet_size, depth=dc.depth, occupied=occupied, runs=runs
    )


@dataclass(frozen=True)
class CriticalProcesses:
    """Central-square process and the two post-extinction boundary processes."""

    central: tuple[int, ...]  # number of surviving diagonal pairs per level
    extinction_level: int | None
    right_column: tuple[int, ...]  # left triangles in the innermost right column
    left_column: tuple[int, ...]  # right triangles in the innermost left column

    def to_dict(self) -> dict:
        return {
            "central": list(self.central),
            "extinction_level": self.extinction_level,
            "right_column": list(self.right_column),
            "left_column": list(self.left_column),
        }


def critical_processes(r1: Realization, r2: Realization, depth: int) -> CriticalProcesses:
    """Track the diagonal survivor count Z_n = |F1^n ∩ F2^n| and, once it
    dies at level N, the single-type counts hugging zero from either side."""
    if r1.alphabet_size != r2.alphabet_size:
        raise AlphabetMismatchError("realizations have different alphabets")
    if depth > r1.depth or depth > r2.depth:
        raise DepthMismatchError("depth beyond sampled realizations")
    central = []
    for n in range(depth + 1):
        central.append(int(np.intersect1d(r1.level(n), r2.level(n)).size))
    extinction = next((n for n, z in enumerate(central) if z == 0), None)
    right = []
    left = []
    if extinction is not None:
        for n in range(extinction, depth + 1):
            a, b = r1.level(n), r2.level(n)
            right.append(int(np.intersect1d(a, b + 1).size))  # offset +1
            left.append(int(np.intersect1d(a, b - 1).size))  # offset -1
    return CriticalProcesses(
        central=tuple(central),
        extinction_level=extinction,
        right_column=tuple(right),
        left_column=tuple(left),
    )


@dataclass(frozen=True)
class UnalignedCount:
    """Greedy count of pairwise-unaligned triangles of each type in one column."""

    left: int
    right: int
    threshold: int

    @property
    def event(self) -> bool:
        return self.left >= self.threshold and self.right >= self.threshold


def count_unaligned_triangles(
    r1: Realization, r2: Realization, n: int, side: str, word: Sequence[int]
) -> UnalignedCount:
    """Lower bound on the largest family of triangles in one column whose
    squares share no row and no column coordinate.

    Same-offset squares are automatically unaligned among themselves, so the
    greedy pass (ascending row, left triangles first) only has to resolve
    conflicts between the two offsets feeding the column.
    """
    if len(word) != n:
        raise WordLengthMismatchError(f"word of length {len(word)} for level {n}")
    M = r1.alphabet_size
    span = M**n
    v = word_value(word, M)
    if side == "R":
        d_left, d_right = v + 1, v
    elif side == "L":
        d_left, d_right = v + 1 - span, v - span
    else:
        raise ParameterOutOfRangeError(f"side must be 'L' or 'R', got {side!r}")
    a1, a2 = r1.level(n), r2.level(n)
    rows_left = np.intersect1d(a1, a2 + d_left)
    rows_right = np.intersect1d(a1, a2 + d_right)
    candidates = sorted(
        [(int(x), 0, int(x - d_left)) for x in rows_left]
        + [(int(x), 1, int(x - d_right)) for x in rows_right]
    )
    used_x: set[int] = set()
    used_y: set[int] = set()
    taken = [0, 0]
    for x, kind, y in candidates:
        if x in used_x or y in used_y:
            continue
        used_x.add(x)
        used_y.add(y)
        taken[kind] += 1
    return UnalignedCount(left=taken[0], right=taken[1], threshold=M)


@dataclass(frozen=True)
class GrowthCheck:
    """Deterministic-growth verification along one subcolumn word."""

    word: tuple[int, ...]
    left_count: int
    right_count: int
    matrix: ExpectationMatrix
    lower_bound: int
    eta: float
    eta_bound: float

    @property
    def passed(self) -> bool:
        return self.left_count >= self.lower_bound and self.right_count >= self.lower_bound


def deterministic_growth_check(
    x: LetterSet, y: LetterSet, k: int, word: Sequence[int],
    survivor_cap: int | None = None,
) -> GrowthCheck:
    """Run the deterministic processes concentrated on a witness pair down a
    subcolumn word and compare the realized triangle counts with the exact
    matrix prediction and with the doubling lower bound 2**(#k in word)."""
    M = x.alphabet_size
    if y.alphabet_size != M:
        raise AlphabetMismatchError("alphabets differ")
    word = tuple(int(w) for w in word)
    if not word:
        raise ParameterOutOfRangeError("word must be nonempty")
    check = _check_masks(True, x.mask, y.mask, k, M)
    if not (check.dg1 and check.dg2):
        raise HypothesisNotMetError(
            f"(x, y) is not a growth witness for letter {k}: {check}"
        )
    n = len(word)
    r1 = deterministic_realization(x, n, survivor_cap)
    r2 = deterministic_realization(y, n, survivor_cap)
    dc = diagonal_counts(r1, r2, n)
    v = word_value(word, M)
    span = M**n
    z_ll, z_lr = dc.count(v + 1 - span), dc.count(v - span)
    z_rl, z_rr = dc.count(v + 1), dc.count(v)
    mu_star = make_distribution(M, [(x, 1)])
    lam_star = make_distribution(M, [(y, 1)])
    mat = word_matrix(mu_star, lam_star, word)
    realized = ((z_ll, z_lr), (z_rl, z_rr))
    if tuple(tuple(row) for row in mat.rows()) != realized:
        raise InvariantViolationError(
            f"deterministic counts {realized} differ from matrix prediction {mat.rows()}"
        )
    bound = 2 ** sum(1 for w in word if w == k)
    eta = 2.0 ** (1.0 / M)
    return GrowthCheck(
        word=word,
        left_count=z_ll + z_rl,
        right_count=z_lr + z_rr,
        matrix=mat,
        lower_bound=bound,
        eta=eta,
        eta_bound=eta ** len(word),
    )
