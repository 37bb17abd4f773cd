"""Compile hash families into parallel measurement plans."""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import InvalidArgument
from .hash_family import PerfectHashFamily

BASES = "xyz"
# Step-2 order: (red basis, blue basis)
K2_MIXED_ORDER = ("xy", "yx", "xz", "zx", "yz", "zy")


@dataclass(frozen=True)
class Provenance:
    """Where a setting came from.

    kind is "uniform" (every qubit in `basis`) or "derived" (hash function
    `function`, 0-based, with color c measured in basis `color_map[c]`).
    """

    kind: str
    basis: str = ""
    function: int = -1
    color_map: str = ""

    def to_dict(self) -> dict:
        if self.kind == "uniform":
            return {"kind": "uniform", "basis": self.basis}
        # function is written 1-based, like qubits
        return {"kind": "derived", "function": self.function + 1, "colors": self.color_map}

    @classmethod
    def from_dict(cls, d: dict) -> Provenance:
        if d.get("kind") == "uniform":
            return cls("uniform", basis=str(d["basis"]))
        if d.get("kind") == "derived":
            return cls("derived", function=int(d["function"]) - 1, color_map=str(d["colors"]))
        return cls(str(d.get("kind", "external")))


@dataclass(frozen=True)
class Setting:
    bases: str
    provenance: Provenance


@dataclass(frozen=True)
class MeasurementPlan:
    n: int
    k: int
    shots: int
    settings: tuple[Setting, ...]

    def __post_init__(self):
        if self.shots < 1:
            raise InvalidArgument(f"shots per setting must be >= 1, got {self.shots}")
        seen = set()
        for i, s in enumerate(self.settings):
            if len(s.bases) != self.n:
                raise InvalidArgument(f"setting {i} has {len(s.bases)} bases, expected {self.n}")
            if set(s.bases) - set(BASES):
                raise InvalidArgument(f"setting {i} has bases outside x|y|z: {s.bases!r}")
            if s.bases in seen:
                raise InvalidArgument(f"setting {i} duplicates an earlier basis vector")
            seen.add(s.bases)

    def __len__(self) -> int:
        return len(self.settings)

    @property
    def total_rounds(self) -> int:
        return self.shots * len(self.settings)

    @cached_property
    def index(self) -> dict[str, int]:
        """Basis string -> setting id."""
        return {s.bases: i for i, s in enumerate(self.settings)}

    @cached_property
    def basis_matrix(self) -> np.ndarray:
        """(settings, n) array of basis codes 0=x, 1=y, 2=z."""
        table = np.frombuffer(b"".join(s.bases.encode() for s in self.settings), dtype=np.uint8)
        codes = np.full(256, 255, dtype=np.uint8)
        for i, b in enumerate(BASES):
            codes[ord(b)] = i
        return codes[table].reshape(len(self.settings), self.n)

    def find(self, bases: str) -> int | None:
        return self.index.get(bases)

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "k": self.k,
            "shots": self.shots,
            "settings": [
                {"id": i, "bases": s.bases, "provenance": s.provenance.to_dict()}
                for i, s in enumerate(self.settings)
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> MeasurementPlan:
        try:
            rows = sorted(data["settings"], key=lambda r: int(r["id"]))
            if [int(r["id"]) for r in rows] != list(range(len(rows))):
                raise InvalidArgument("setting ids must be 0..len-1")
            settings = tuple(
                Setting(str(r["bases"]).lower(), Provenance.from_dict(r.get("provenance", {})))
                for r in rows
            )
            return cls(int(data["n"]), int(data["k"]), int(data["shots"]), settings)
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, InvalidArgument):
                raise
            raise InvalidArgument(f"malformed plan record: {exc}") from exc

    def dumps(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def loads(cls, text: str) -> MeasurementPlan:
        return cls.from_dict(json.loads(text))


def _paint(colors, color_map: str) -> str:
    return "".join(color_map[c] for c in colors)


class _Builder:
    def __init__(self, n):
        self.n = n
        self.settings: list[Setting] = []
        self.seen: set[str] = set()

    def add(self, bases, provenance):
        if bases not in self.seen:
            self.seen.add(bases)
            self.settings.append(Setting(bases, provenance))


def plan_k2(family: PerfectHashFamily, shots: int) -> MeasurementPlan:
    """Uniform x, y, z settings followed by the six red/blue mixed settings of
    every function (color 0 is red, color 1 blue)."""
    if family.k != 2:
        raise InvalidArgument(f"plan_k2 needs a k=2 family, got k={family.k}")
    b = _Builder(family.n)
    for basis in BASES:
        b.add(basis * family.n, Provenance("uniform", basis=basis))
    for i, f in enumerate(family.functions):
        for cmap in K2_MIXED_ORDER:
            b.add(_paint(f.colors, cmap), Provenance("derived", function=i, color_map=cmap))
    return MeasurementPlan(family.n, 2, shots, tuple(b.settings))


def plan_general(family: PerfectHashFamily, shots: int) -> MeasurementPlan:
    """All 3^k color->basis assignments of every function, deduplicated.

    Uniform settings come first; for k=2 this is exactly plan_k2.
    """
    if family.k < 2:
        raise InvalidArgument(f"need k >= 2, got {family.k}")
    if family.k == 2:
        return plan_k2(family, shots)
    b = _Builder(family.n)
    for basis in BASES:
        b.add(basis * family.n, Provenance("uniform", basis=basis))
    for i, f in enumerate(family.functions):
        for cmap in itertools.product(BASES, repeat=family.k):
            cmap = "".join(cmap)
            b.add(_paint(f.colors, cmap), Provenance("derived", function=i, color_map=cmap))
    return MeasurementPlan(family.n, family.k, shots, tuple(b.settings))


def build_plan(family: PerfectHashFamily, shots: int) -> MeasurementPlan:
    return plan_k2(family, shots) if family.k == 2 else plan_general(family, shots)


def naive_rounds(n: int, k: int, shots: int) -> int:
    """Rounds for tomography of disjoint pairs measured in parallel:
    9 M C(n,2) / (n/2)."""
    if k != 2:
        raise InvalidArgument("naive round count is only defined for k=2")
    if n < 2 or n % 2:
        raise InvalidArgument(f"naive strategy needs an even n >= 2, got {n}")
    if shots < 1:
        raise InvalidArgument(f"shots must be >= 1, got {shots}")
    return 9 * shots * math.comb(n, 2) // (n // 2)
