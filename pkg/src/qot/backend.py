"""Simulated measurement data and exact oracles.

Conventions used throughout:

* Amplitude index bit order is big-endian: qubit 0 is the most significant
  bit, so outcome strings read qubit 0 (qubit 1 in files) first.
* Outcome bit 0 means the +1 eigenvalue, bit 1 means -1, in every basis.
* X readout applies H before computational readout; Y readout applies S^dagger
  then H.
* RNG: the master seed feeds ``numpy.random.SeedSequence(seed)``, which is
  spawned into one child per setting (in setting order); each child drives a
  ``numpy.random.Generator(PCG64)``.  Within a setting, a dense state draws
  ``rng.random(M)`` and inverts the cumulative Born distribution
  (``searchsorted`` on the running sum, side='right'); a dimer state draws
  ``rng.random((M, pairs))`` and inverts each pair's 4-outcome distribution.
  If a bit-flip probability is set, ``rng.random((M, n)) < flip`` is drawn
  afterwards from the same generator.
"""
from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import reduce
from typing import Iterable, Sequence, Union

import numpy as np

from .errors import InvalidArgument, MissingData, ResourceLimit
from .schedule import MeasurementPlan

DENSE_LIMIT = 20
RDM_LIMIT = 6

PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}
_H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
_SDG = np.array([[1, 0], [0, -1j]], dtype=complex)
ROTATION = {"x": _H, "y": _H @ _SDG, "z": np.eye(2, dtype=complex)}

BELL = np.array([[1, 0, 0, 1], [0, 0, 0, 0], [0, 0, 0, 0], [1, 0, 0, 1]], dtype=complex) / 2
MAX_MIXED_2 = np.eye(4, dtype=complex) / 4


def pauli_string(label: str) -> np.ndarray:
    return reduce(np.kron, (PAULI[c] for c in label.upper()))


def werner(p: float) -> np.ndarray:
    return p * BELL + (1 - p) * MAX_MIXED_2


@dataclass(frozen=True, eq=False)
class PureState:
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex).ravel()
        n = int(round(np.log2(len(amps)))) if len(amps) else 0
        if len(amps) < 2 or 2**n != len(amps):
            raise InvalidArgument(f"amplitude vector length {len(amps)} is not a power of two")
        if n > DENSE_LIMIT:
            raise ResourceLimit(f"dense state on {n} qubits exceeds the limit of {DENSE_LIMIT}")
        if abs(np.vdot(amps, amps).real - 1) > 1e-10:
            raise InvalidArgument("state is not normalized")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @property
    def n(self) -> int:
        return int(np.log2(len(self.amplitudes)))

    def tensor(self) -> np.ndarray:
        return self.amplitudes.reshape((2,) * self.n)


@dataclass(frozen=True, eq=False)
class DimerState:
    """Product of two-qubit density matrices over a perfect matching.

    pairs are 0-based (a, b); pair_states[i] is ordered (a, b).
    """

    n: int
    pairs: tuple[tuple[int, int], ...]
    pair_states: tuple[np.ndarray, ...]

    def __post_init__(self):
        if self.n < 2 or self.n % 2:
            raise InvalidArgument(f"dimer state needs an even n >= 2, got {self.n}")
        flat = [q for p in self.pairs for q in p]
        if sorted(flat) != list(range(self.n)):
            raise InvalidArgument("pairing must cover every qubit exactly once")
        states = self.pair_states
        if len(states) == 1 and len(self.pairs) > 1:
            states = states * len(self.pairs)
        if len(states) != len(self.pairs):
            raise InvalidArgument("need one pair state, or one per pair")
        checked = []
        for rho in states:
            rho = np.asarray(rho, dtype=complex)
            if rho.shape != (4, 4):
                raise InvalidArgument("pair states must be 4x4")
            if not np.allclose(rho, rho.conj().T, atol=1e-10):
                raise InvalidArgument("pair state is not Hermitian")
            if abs(np.trace(rho).real - 1) > 1e-10:
                raise InvalidArgument("pair state does not have unit trace")
            if np.linalg.eigvalsh(rho).min() < -1e-10:
                raise InvalidArgument("pair state is not positive semidefinite")
            checked.append(rho)
        object.__setattr__(self, "pairs", tuple((int(a), int(b)) for a, b in self.pairs))
        object.__setattr__(self, "pair_states", tuple(checked))
        partner = {}
        for i, (a, b) in enumerate(self.pairs):
            partner[a] = (i, 0)
            partner[b] = (i, 1)
        object.__setattr__(self, "_slot", partner)


State = Union[PureState, DimerState]


def random_state(n: int, seed=None) -> PureState:
    """Normalized complex Gaussian amplitudes (Haar-distributed)."""
    if n > DENSE_LIMIT:
        raise ResourceLimit(f"dense state on {n} qubits exceeds the limit of {DENSE_LIMIT}")
    rng = np.random.default_rng(seed)
    amps = rng.normal(size=2**n) + 1j * rng.normal(size=2**n)
    return PureState(amps / np.linalg.norm(amps))


def ghz_state(n: int) -> PureState:
    if n > DENSE_LIMIT:
        raise ResourceLimit(f"dense state on {n} qubits exceeds the limit of {DENSE_LIMIT}")
    amps = np.zeros(2**n, dtype=complex)
    amps[0] = amps[-1] = 1 / np.sqrt(2)
    return PureState(amps)


def zero_state(n: int) -> PureState:
    if n > DENSE_LIMIT:
        raise ResourceLimit(f"dense state on {n} qubits exceeds the limit of {DENSE_LIMIT}")
    amps = np.zeros(2**n, dtype=complex)
    amps[0] = 1
    return PureState(amps)


def product_state(qubit_states: Sequence[Sequence[complex]]) -> PureState:
    vecs = [np.asarray(v, dtype=complex) / np.linalg.norm(v) for v in qubit_states]
    return PureState(reduce(np.kron, vecs))


def dimer_chain(n: int, pair_state=BELL) -> DimerState:
    """Pairs (0,1), (2,3), ... each in `pair_state` (or a list, one per pair)."""
    pairs = tuple((2 * i, 2 * i + 1) for i in range(n // 2))
    if isinstance(pair_state, np.ndarray) and pair_state.ndim == 2:
        states = (pair_state,)
    else:
        states = tuple(pair_state)
    return DimerState(n, pairs, states)


def _check_subset(n: int, qubits: Sequence[int]) -> tuple[int, ...]:
    qubits = tuple(int(q) for q in qubits)
    if not qubits:
        raise InvalidArgument("empty qubit subset")
    if len(set(qubits)) != len(qubits):
        raise InvalidArgument(f"qubit subset has repeats: {qubits}")
    if any(not 0 <= q < n for q in qubits):
        raise InvalidArgument(f"qubit subset {qubits} out of range for n={n}")
    return qubits


def _apply_1q(psi: np.ndarray, gate: np.ndarray, axis: int) -> np.ndarray:
    return np.moveaxis(np.tensordot(gate, psi, axes=([1], [axis])), 0, axis)


def exact_expectation(state: State, qubits: Sequence[int], paulis: Sequence[str]) -> float:
    """<P_1 ... P_k> with P_j acting on qubits[j] and identity elsewhere."""
    qubits = _check_subset(state.n, qubits)
    paulis = [p.upper() for p in paulis]
    if len(paulis) != len(qubits):
        raise InvalidArgument("need one Pauli label per qubit")
    if any(p not in PAULI for p in paulis):
        raise InvalidArgument(f"unknown Pauli label in {paulis}")
    if all(p == "I" for p in paulis):
        raise InvalidArgument("the all-identity coefficient is fixed at 1 and is not measured")
    if isinstance(state, DimerState):
        return _dimer_expectation(state, qubits, paulis)
    psi = state.tensor()
    phi = psi
    for q, p in zip(qubits, paulis):
        if p != "I":
            phi = _apply_1q(phi, PAULI[p], q)
    return float(np.vdot(psi, phi).real)


def _dimer_expectation(state: DimerState, qubits, paulis) -> float:
    per_pair: dict[int, list[str]] = {}
    for q, p in zip(qubits, paulis):
        i, slot = state._slot[q]
        per_pair.setdefault(i, ["I", "I"])[slot] = p
    value = 1.0
    for i, (pa, pb) in per_pair.items():
        op = np.kron(PAULI[pa], PAULI[pb])
        value *= float(np.trace(op @ state.pair_states[i]).real)
    return value


def exact_rdm(state: State, qubits: Sequence[int]) -> np.ndarray:
    """Partial trace onto `qubits`, in the given order (first = most significant)."""
    qubits = _check_subset(state.n, qubits)
    k = len(qubits)
    if k > RDM_LIMIT:
        raise ResourceLimit(f"reduced density matrix on {k} qubits exceeds the limit of {RDM_LIMIT}")
    if isinstance(state, DimerState):
        return _dimer_rdm(state, qubits)
    rest = [q for q in range(state.n) if q not in qubits]
    psi = np.transpose(state.tensor(), list(qubits) + rest).reshape(2**k, -1)
    return psi @ psi.conj().T


def _dimer_rdm(state: DimerState, qubits) -> np.ndarray:
    # tensor product of the touched pair marginals, then permute into order
    blocks, order = [], []
    for i in sorted({state._slot[q][0] for q in qubits}):
        a, b = state.pairs[i]
        rho = state.pair_states[i].reshape(2, 2, 2, 2)
        if a in qubits and b in qubits:
            blocks.append(rho.reshape(4, 4))
            order += [a, b]
        elif a in qubits:
            blocks.append(np.einsum("ijkj->ik", rho))
            order.append(a)
        else:
            blocks.append(np.einsum("ijil->jl", rho))
            order.append(b)
    full = reduce(np.kron, blocks)
    k = len(qubits)
    perm = [order.index(q) for q in qubits]
    t = full.reshape((2,) * (2 * k))
    t = np.transpose(t, perm + [p + k for p in perm])
    return t.reshape(2**k, 2**k)


class CountsTable:
    """Per-setting tallies of n-bit outcome strings.

    Stored per setting as a (distinct outcomes, n) uint8 bit matrix plus a
    count vector.
    """

    def __init__(self, n: int, data: dict[int, tuple[np.ndarray, np.ndarray]]):
        self.n = n
        self._data = {}
        for sid, (bits, counts) in data.items():
            bits = np.asarray(bits, dtype=np.uint8).reshape(-1, n)
            counts = np.asarray(counts, dtype=np.int64)
            if len(bits) != len(counts):
                raise InvalidArgument(f"setting {sid}: outcome and count lengths differ")
            if (counts < 0).any():
                raise InvalidArgument(f"setting {sid}: negative count")
            self._data[int(sid)] = (bits, counts)
        self._signs: dict[int, np.ndarray] = {}

    def __contains__(self, sid) -> bool:
        return sid in self._data and self.shots(sid) > 0

    def settings(self) -> list[int]:
        return sorted(self._data)

    def shots(self, sid: int) -> int:
        if sid not in self._data:
            return 0
        return int(self._data[sid][1].sum())

    def tally(self, sid: int) -> dict[str, int]:
        bits, counts = self._data.get(sid, (np.zeros((0, self.n), np.uint8), np.zeros(0, np.int64)))
        return {"".join("01"[b] for b in row): int(c) for row, c in zip(bits, counts)}

    def _require(self, sid: int):
        if sid not in self:
            raise MissingData(f"no counts recorded for setting {sid}", setting_id=sid)
        return self._data[sid]

    def signs(self, sid: int) -> tuple[np.ndarray, np.ndarray]:
        """(+1/-1 matrix as int8, counts) for one setting."""
        bits, counts = self._require(sid)
        if sid not in self._signs:
            self._signs[sid] = (1 - 2 * bits.astype(np.int8))
        return self._signs[sid], counts

    def expectation(self, sid: int, qubits: Sequence[int]) -> float:
        return float(self.product_sum(sid, qubits)) / self.shots(sid)

    def product_sum(self, sid: int, qubits: Sequence[int]) -> int:
        """Sum over shots of the product of the eigenvalue signs on `qubits`."""
        signs, counts = self.signs(sid)
        qubits = _check_subset(self.n, qubits)
        prod = signs[:, qubits[0]].astype(np.int64)
        for q in qubits[1:]:
            prod = prod * signs[:, q]
        return int(prod @ counts)

    def check_against(self, plan: MeasurementPlan):
        if self.n != plan.n:
            raise InvalidArgument(f"counts have n={self.n}, plan has n={plan.n}")
        for sid in self._data:
            if not 0 <= sid < len(plan):
                raise InvalidArgument(f"counts reference unknown setting {sid}")

    def records(self) -> Iterable[dict]:
        for sid in self.settings():
            bits, counts = self._data[sid]
            for row, c in zip(bits, counts):
                yield {"setting": sid, "outcome": "".join("01"[b] for b in row), "count": int(c)}

    def dumps(self) -> str:
        return "".join(json.dumps(r) + "\n" for r in self.records())

    @classmethod
    def loads(cls, text: str, n: int | None = None) -> CountsTable:
        tallies: dict[int, dict[str, int]] = {}
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
                sid, outcome, count = int(rec["setting"]), str(rec["outcome"]), int(rec["count"])
            except (KeyError, TypeError, ValueError) as exc:
                raise InvalidArgument(f"counts line {lineno}: {exc}") from exc
            if set(outcome) - {"0", "1"}:
                raise InvalidArgument(f"counts line {lineno}: outcome must be a 0/1 string")
            if n is None:
                n = len(outcome)
            if len(outcome) != n:
                raise InvalidArgument(f"counts line {lineno}: outcome length {len(outcome)} != {n}")
            tab = tallies.setdefault(sid, {})
            tab[outcome] = tab.get(outcome, 0) + count
        if n is None:
            raise MissingData("counts file is empty")
        data = {}
        for sid, tab in tallies.items():
            keys = sorted(tab)
            bits = np.array([[ch == "1" for ch in key] for key in keys], dtype=np.uint8)
            data[sid] = (bits, np.array([tab[key] for key in keys]))
        return cls(n, data)


def _tally(bits: np.ndarray):
    rows, counts = np.unique(bits, axis=0, return_counts=True)
    return rows.astype(np.uint8), counts


def _rotated_probs(state: PureState, bases: str) -> np.ndarray:
    psi = state.tensor()
    for q, b in enumerate(bases):
        if b != "z":
            psi = _apply_1q(psi, ROTATION[b], q)
    return np.abs(psi.ravel()) ** 2


def _sample_dense(state: PureState, bases: str, shots: int, rng) -> np.ndarray:
    cdf = np.cumsum(_rotated_probs(state, bases))
    idx = np.searchsorted(cdf, rng.random(shots) * cdf[-1], side="right")
    idx = np.minimum(idx, len(cdf) - 1)
    shifts = state.n - 1 - np.arange(state.n)
    return ((idx[:, None] >> shifts) & 1).astype(np.uint8)


def _sample_dimer(state: DimerState, bases: str, shots: int, rng) -> np.ndarray:
    cdfs = np.empty((len(state.pairs), 4))
    for i, ((a, b), rho) in enumerate(zip(state.pairs, state.pair_states)):
        u = np.kron(ROTATION[bases[a]], ROTATION[bases[b]])
        p = np.clip(np.diag(u @ rho @ u.conj().T).real, 0, None)
        cdfs[i] = np.cumsum(p / p.sum())
    draws = rng.random((shots, len(state.pairs)))
    outcome = (draws[:, :, None] >= cdfs[None, :, :3]).sum(axis=2)
    bits = np.empty((shots, state.n), dtype=np.uint8)
    a_idx = [a for a, _ in state.pairs]
    b_idx = [b for _, b in state.pairs]
    bits[:, a_idx] = outcome >> 1
    bits[:, b_idx] = outcome & 1
    return bits


def sample(state: State, plan: MeasurementPlan, seed, flip=0.0, workers: int = 1) -> CountsTable:
    """Draw plan.shots outcomes for every setting.

    `flip` is a symmetric bit-flip probability applied independently to each
    readout bit (scalar or one value per qubit).
    """
    if seed is None:
        raise InvalidArgument("sampling requires an explicit seed")
    if state.n != plan.n:
        raise InvalidArgument(f"state has n={state.n}, plan has n={plan.n}")
    flip = np.broadcast_to(np.asarray(flip, dtype=float), (state.n,))
    if ((flip < 0) | (flip > 1)).any():
        raise InvalidArgument("bit-flip probability must lie in [0, 1]")
    noisy = bool(flip.any())
    draw = _sample_dimer if isinstance(state, DimerState) else _sample_dense
    children = np.random.SeedSequence(seed).spawn(len(plan))

    def one(sid):
        rng = np.random.Generator(np.random.PCG64(children[sid]))
        bits = draw(state, plan.settings[sid].bases, plan.shots, rng)
        if noisy:
            bits ^= (rng.random(bits.shape) < flip).astype(np.uint8)
        return _tally(bits)

    ids = range(len(plan))
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(one, ids))
    else:
        results = [one(sid) for sid in ids]
    return CountsTable(state.n, dict(zip(ids, results)))


class ExactData:
    """Infinite-shot stand-in for a CountsTable: each setting reports the exact
    expectation of the Paulis it measures."""

    def __init__(self, state: State, plan: MeasurementPlan):
        if state.n != plan.n:
            raise InvalidArgument(f"state has n={state.n}, plan has n={plan.n}")
        self.state = state
        self.plan = plan
        self.n = state.n

    def __contains__(self, sid) -> bool:
        return 0 <= sid < len(self.plan)

    def shots(self, sid: int) -> int:
        return self.plan.shots

    def expectation(self, sid: int, qubits: Sequence[int]) -> float:
        bases = self.plan.settings[sid].bases
        return exact_expectation(self.state, qubits, [bases[q].upper() for q in qubits])

    def check_against(self, plan: MeasurementPlan):
        if plan is not self.plan and plan != self.plan:
            raise InvalidArgument("exact data was built for a different plan")
