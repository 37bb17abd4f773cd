"""(n, k) perfect hash families.

A hash function colors each of the n qubits with one of k colors (0-based).
A family is perfect when every k-subset of qubits receives k distinct colors
under at least one member.  Qubit and function indices are 0-based here; the
JSON family file stores colors positionally, qubit 1 first.
"""
from __future__ import annotations

import itertools
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .errors import InvalidArgument, ResourceLimit

VERIFY_LIMIT = 10**8
_CHUNK = 1 << 16


@dataclass(frozen=True)
class HashFunction:
    colors: tuple[int, ...]
    k: int

    def __post_init__(self):
        if self.k < 1:
            raise InvalidArgument(f"k must be positive, got {self.k}")
        if not self.colors:
            raise InvalidArgument("a hash function needs at least one qubit")
        bad = [c for c in self.colors if not 0 <= c < self.k]
        if bad:
            raise InvalidArgument(f"colors must lie in 0..{self.k - 1}, got {bad[0]}")

    @property
    def n(self) -> int:
        return len(self.colors)

    def __call__(self, qubit: int) -> int:
        return self.colors[qubit]

    def is_injective_on(self, subset: Sequence[int]) -> bool:
        seen = {self.colors[q] for q in subset}
        return len(seen) == len(subset)

    def classes(self) -> list[list[int]]:
        """Color classes (the partition of the qubits), indexed by color."""
        out: list[list[int]] = [[] for _ in range(self.k)]
        for q, c in enumerate(self.colors):
            out[c].append(q)
        return out


@dataclass(frozen=True)
class PerfectHashFamily:
    n: int
    k: int
    functions: tuple[HashFunction, ...]
    construction: str = "explicit"
    params: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not 1 <= self.k <= self.n:
            raise InvalidArgument(f"need 1 <= k <= n, got n={self.n}, k={self.k}")
        for f in self.functions:
            if f.n != self.n:
                raise InvalidArgument(f"function over {f.n} qubits in a family with n={self.n}")
            if f.k != self.k:
                raise InvalidArgument(f"function with k={f.k} in a family with k={self.k}")

    def __len__(self) -> int:
        return len(self.functions)

    def __iter__(self):
        return iter(self.functions)

    def __getitem__(self, i) -> HashFunction:
        return self.functions[i]

    def color_matrix(self) -> np.ndarray:
        """(N, n) array of colors."""
        return np.array([f.colors for f in self.functions], dtype=np.int64).reshape(len(self), self.n)

    @classmethod
    def from_colors(cls, colors, k: int, construction: str = "explicit", **params) -> PerfectHashFamily:
        colors = np.asarray(colors, dtype=np.int64)
        if colors.ndim != 2:
            raise InvalidArgument("colors must be a 2-d array (functions x qubits)")
        fns = tuple(HashFunction(tuple(int(c) for c in row), k) for row in colors)
        return cls(colors.shape[1], k, fns, construction, dict(params))

    def to_dict(self) -> dict:
        construction = self.construction
        if self.params:
            construction = f"{construction}({', '.join(f'{k}={v}' for k, v in self.params.items())})"
        return {
            "n": self.n,
            "k": self.k,
            "construction": construction,
            "functions": [list(f.colors) for f in self.functions],
        }

    @classmethod
    def from_dict(cls, data: dict) -> PerfectHashFamily:
        try:
            n, k, fns = int(data["n"]), int(data["k"]), data["functions"]
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidArgument(f"malformed family record: {exc}") from exc
        construction = str(data.get("construction", "explicit"))
        tag = construction.split("(", 1)[0]
        family = cls(n, k, tuple(HashFunction(tuple(int(c) for c in row), k) for row in fns), tag)
        return family

    def dumps(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def loads(cls, text: str) -> PerfectHashFamily:
        return cls.from_dict(json.loads(text))


def binary_family(n: int) -> PerfectHashFamily:
    """The ceil(log2 n)-member (n, 2) family: function i reads the i-th most
    significant bit of the qubit's 0-based index."""
    if n < 2:
        raise InvalidArgument(f"binary_family needs n >= 2, got {n}")
    q = (n - 1).bit_length()
    idx = np.arange(n)
    colors = (idx[None, :] >> (q - 1 - np.arange(q))[:, None]) & 1
    return PerfectHashFamily.from_colors(colors, 2, "binary")


def _check_nk(n: int, k: int):
    if k < 2 or k > n:
        raise InvalidArgument(f"need 2 <= k <= n, got n={n}, k={k}")


def required_random_size(n: int, k: int, delta: float) -> int:
    """Number of uniformly random colorings needed so that the union bound
    C(n,k) (1 - k!/k^k)^N on the failure probability drops to delta."""
    _check_nk(n, k)
    if not 0 < delta < 1:
        raise InvalidArgument(f"delta must lie in (0, 1), got {delta}")
    miss = 1 - Fraction(math.factorial(k), k**k)
    subsets = math.comb(n, k)
    ratio = math.log(subsets / delta) / -math.log(miss)
    size = max(1, math.ceil(ratio))
    # ceil() on floats can land one off near integers; settle it exactly
    target = Fraction(delta)
    while size > 1 and subsets * miss ** (size - 1) <= target:
        size -= 1
    while subsets * miss**size > target:
        size += 1
    return size


def random_family(n: int, k: int, delta: float, seed=None) -> PerfectHashFamily:
    """Draw required_random_size(n, k, delta) i.i.d. uniform colorings.

    The result is perfect only with probability >= 1 - delta; run
    verify_perfect on it if that matters.
    """
    size = required_random_size(n, k, delta)
    rng = np.random.default_rng(seed)
    colors = rng.integers(0, k, size=(size, n))
    return PerfectHashFamily.from_colors(colors, k, "random", seed=seed, delta=delta)


def _subset_chunks(n: int, k: int):
    it = itertools.combinations(range(n), k)
    while True:
        block = list(itertools.islice(it, _CHUNK))
        if not block:
            return
        yield np.array(block, dtype=np.int64)


def _first_uncovered(colors: np.ndarray, k: int, subsets: np.ndarray) -> int:
    """Index of the first row of `subsets` that no function colors injectively, or -1."""
    full = (1 << k) - 1
    covered = np.zeros(len(subsets), dtype=bool)
    for row in colors:
        mask = np.bitwise_or.reduce(1 << row[subsets], axis=1)
        covered |= mask == full
    miss = np.flatnonzero(~covered)
    return int(miss[0]) if len(miss) else -1


def verify_perfect(family: PerfectHashFamily, workers: int = 1):
    """Exhaustively check the perfect-hash property.

    Returns None when the family is perfect, otherwise the lexicographically
    first k-subset (tuple of 0-based qubits) that no member separates.
    """
    n, k = family.n, family.k
    total = math.comb(n, k)
    if total > VERIFY_LIMIT:
        raise ResourceLimit(f"C({n},{k}) = {total} subsets exceeds the exhaustive limit {VERIFY_LIMIT}")
    colors = family.color_matrix()
    if k > 62:
        raise ResourceLimit(f"k={k} too large for bitmask verification")

    def scan(block):
        i = _first_uncovered(colors, k, block)
        return None if i < 0 else tuple(int(q) for q in block[i])

    if workers <= 1:
        for block in _subset_chunks(n, k):
            hit = scan(block)
            if hit is not None:
                return hit
        return None
    with ThreadPoolExecutor(workers) as pool:
        for hit in pool.map(scan, _subset_chunks(n, k)):
            if hit is not None:
                return hit
    return None


def _check_subset(family: PerfectHashFamily, subset: Sequence[int]) -> tuple[int, ...]:
    subset = tuple(int(q) for q in subset)
    if len(subset) != family.k:
        raise InvalidArgument(f"subset must have {family.k} qubits, got {len(subset)}")
    if len(set(subset)) != len(subset):
        raise InvalidArgument(f"subset has repeated qubits: {subset}")
    if any(not 0 <= q < family.n for q in subset):
        raise InvalidArgument(f"subset {subset} out of range for n={family.n}")
    return subset


def injective_functions(family: PerfectHashFamily, subset: Sequence[int]) -> list[int]:
    subset = _check_subset(family, subset)
    return [i for i, f in enumerate(family.functions) if f.is_injective_on(subset)]


def checkerboard_coloring(side: int) -> HashFunction:
    """Two-coloring of a side x side square lattice (row-major sites) by parity
    of row + col, so every nearest-neighbour pair is bichromatic."""
    if side < 2:
        raise InvalidArgument(f"lattice side must be >= 2, got {side}")
    return HashFunction(tuple((r + c) % 2 for r in range(side) for c in range(side)), 2)
