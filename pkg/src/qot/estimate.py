"""Pauli-coefficient estimation and reduced density matrix assembly.

A k-qubit state expands as rho = 2^-k sum_P <P> P over the 4^k Pauli strings
P; the 2^-k prefactor is what makes tr rho = 1 with unnormalized Paulis.

Routing: for an ordered subset S and a Pauli label (one of I/X/Y/Z per qubit
of S) we need a setting that measures every non-identity qubit of S in the
matching basis.

* Labels whose non-identity letters all agree (XX, IY, ZIZ, ...) come from the
  uniform all-X / all-Y / all-Z setting.
* Other labels come from the first family member that is injective on S:
  color f(S_j) is assigned the basis of label letter j; identity positions
  take basis x.  For the binary k=2 family this is the most significant bit
  on which the two qubit indices differ.
* With pooling, each coefficient is the shot-weighted mean over every setting
  in the plan that measures the label's support in the right bases.
"""
from __future__ import annotations

import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Sequence

import numpy as np

from .backend import PAULI
from .errors import InvalidArgument, MissingData
from .hash_family import PerfectHashFamily, injective_functions
from .schedule import MeasurementPlan

PSD_TOL = 1e-8


@lru_cache(maxsize=None)
def pauli_labels(k: int) -> tuple[str, ...]:
    """All 4^k labels, identity first, in IXYZ lexicographic order."""
    return tuple("".join(t) for t in itertools.product("IXYZ", repeat=k))


@lru_cache(maxsize=None)
def _pauli_stack(k: int) -> np.ndarray:
    mats = []
    for label in pauli_labels(k):
        m = np.ones((1, 1), dtype=complex)
        for c in label:
            m = np.kron(m, PAULI[c])
        mats.append(m)
    return np.array(mats)


def matrix_from_coeffs(coeffs: dict[str, float], k: int) -> np.ndarray:
    vec = np.array([coeffs.get(lbl, 0.0) for lbl in pauli_labels(k)])
    vec[0] = 1.0
    return np.tensordot(vec, _pauli_stack(k), axes=1) / 2**k


def coeffs_from_matrix(matrix: np.ndarray, k: int) -> dict[str, float]:
    vals = np.einsum("lij,ji->l", _pauli_stack(k), matrix).real
    return dict(zip(pauli_labels(k), (float(v) for v in vals)))


@dataclass(frozen=True, eq=False)
class ReducedDensityMatrix:
    qubits: tuple[int, ...]
    pauli_coeffs: dict[str, float]
    matrix: np.ndarray
    projected: bool = False
    sources: dict[str, tuple[int, ...]] = field(default_factory=dict, repr=False)

    @property
    def k(self) -> int:
        return len(self.qubits)

    @classmethod
    def from_coeffs(cls, qubits, coeffs, **kw) -> ReducedDensityMatrix:
        k = len(qubits)
        coeffs = dict(coeffs)
        coeffs["I" * k] = 1.0
        return cls(tuple(qubits), coeffs, matrix_from_coeffs(coeffs, k), **kw)

    def to_record(self, with_entanglement: bool = True) -> dict:
        conc = eof = None
        if with_entanglement and self.k == 2:
            rho = self if self.projected else project_psd(self)
            conc = concurrence(rho)
            eof = entanglement_of_formation(rho)
        return {
            "qubits": [q + 1 for q in self.qubits],
            "pauli_coeffs": {lbl: self.pauli_coeffs[lbl] for lbl in pauli_labels(self.k)},
            "matrix_re": self.matrix.real.tolist(),
            "matrix_im": self.matrix.imag.tolist(),
            "concurrence": conc,
            "eof": eof,
            "projected": self.projected,
        }

    @classmethod
    def from_record(cls, rec: dict) -> ReducedDensityMatrix:
        matrix = np.array(rec["matrix_re"], dtype=float) + 1j * np.array(rec["matrix_im"], dtype=float)
        return cls(
            tuple(q - 1 for q in rec["qubits"]),
            {k: float(v) for k, v in rec["pauli_coeffs"].items()},
            matrix,
            bool(rec.get("projected", False)),
        )


def expectation_from_counts(counts, setting_id: int, qubits: Sequence[int]) -> float:
    """Mean over shots of the product of the +/-1 outcomes on `qubits`."""
    if setting_id not in counts:
        raise MissingData(f"no counts recorded for setting {setting_id}", setting_id=setting_id)
    return counts.expectation(setting_id, qubits)


def _check_subset(n: int, subset) -> tuple[int, ...]:
    subset = tuple(int(q) for q in subset)
    if len(set(subset)) != len(subset):
        raise InvalidArgument(f"subset has repeated qubits: {subset}")
    if any(not 0 <= q < n for q in subset):
        raise InvalidArgument(f"subset {subset} out of range for n={n}")
    if len(subset) < 1:
        raise InvalidArgument("empty subset")
    return subset


def _support(label: str) -> tuple[int, ...]:
    return tuple(j for j, c in enumerate(label) if c != "I")


def _default_setting(subset, label, plan: MeasurementPlan, family, injective) -> int:
    letters = {c for c in label if c != "I"}
    if len(letters) == 1:
        sid = plan.find(letters.pop().lower() * plan.n)
        if sid is not None:
            return sid
    for i in injective:
        f = family.functions[i]
        cmap = ["x"] * family.k
        for q, c in zip(subset, label):
            if c != "I":
                cmap[f.colors[q]] = c.lower()
        sid = plan.find("".join(cmap[c] for c in f.colors))
        if sid is not None:
            return sid
    # no family (or no injective member): first setting that fits
    return _pooled_settings(subset, label, plan)[0]


def _pooled_settings(subset, label, plan: MeasurementPlan) -> tuple[int, ...]:
    sup = _support(label)
    cols = [subset[j] for j in sup]
    want = np.array(["xyz".index(label[j].lower()) for j in sup], dtype=np.uint8)
    hits = np.flatnonzero((plan.basis_matrix[:, cols] == want).all(axis=1))
    if not len(hits):
        raise MissingData(
            f"plan has no setting measuring qubits {tuple(q + 1 for q in subset)} as {label}"
        )
    return tuple(int(h) for h in hits)


def route_subset(subset, plan: MeasurementPlan, family: PerfectHashFamily | None, pooling=False):
    """Map every non-identity label of `subset` to the setting ids used for it."""
    subset = _check_subset(plan.n, subset)
    k = len(subset)
    injective = []
    if family is not None and family.k == k:
        injective = injective_functions(family, subset)
    routes = {}
    for label in pauli_labels(k)[1:]:
        if pooling:
            routes[label] = _pooled_settings(subset, label, plan)
        else:
            routes[label] = (_default_setting(subset, label, plan, family, injective),)
    return routes


def route_pair(r: int, s: int, plan: MeasurementPlan, family: PerfectHashFamily) -> dict[str, int]:
    """Setting id for each of the 15 non-identity labels of the ordered pair (r, s)."""
    if r == s:
        raise InvalidArgument(f"pair needs two distinct qubits, got ({r}, {s})")
    return {lbl: ids[0] for lbl, ids in route_subset((r, s), plan, family).items()}


def _estimate(data, subset, label, ids) -> float:
    sup = [subset[j] for j in _support(label)]
    if len(ids) == 1:
        return expectation_from_counts(data, ids[0], sup)
    total = 0.0
    shots = 0
    for sid in ids:
        if sid not in data:
            raise MissingData(f"no counts recorded for setting {sid}", setting_id=sid)
        m = data.shots(sid)
        total += data.expectation(sid, sup) * m
        shots += m
    return total / shots


def reconstruct_rdm(
    subset,
    counts,
    plan: MeasurementPlan,
    family: PerfectHashFamily | None = None,
    pooling: bool = False,
    psd_projection: bool = False,
) -> ReducedDensityMatrix:
    """Linear-inversion estimate of the reduced state on `subset`.

    `counts` is a CountsTable, or backend.ExactData for infinite-shot values.
    """
    subset = _check_subset(plan.n, subset)
    routes = route_subset(subset, plan, family, pooling)
    coeffs = {lbl: _estimate(counts, subset, lbl, ids) for lbl, ids in routes.items()}
    rdm = ReducedDensityMatrix.from_coeffs(subset, coeffs, sources=routes)
    return project_psd(rdm) if psd_projection else rdm


def reconstruct_all(
    counts,
    plan: MeasurementPlan,
    family: PerfectHashFamily | None,
    k: int,
    pooling: bool = False,
    psd_projection: bool = False,
    workers: int = 1,
) -> dict[tuple[int, ...], ReducedDensityMatrix]:
    """Every k-subset's RDM, keyed by ascending 0-based qubit tuple."""
    if not 1 <= k <= plan.n:
        raise InvalidArgument(f"need 1 <= k <= n, got k={k}")
    subsets = list(itertools.combinations(range(plan.n), k))

    def one(s):
        return reconstruct_rdm(s, counts, plan, family, pooling, psd_projection)

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            rdms = list(pool.map(one, subsets, chunksize=64))
    else:
        rdms = [one(s) for s in subsets]
    return dict(zip(subsets, rdms))


def _simplex_projection(values: np.ndarray) -> np.ndarray:
    """Euclidean projection of a real vector onto the probability simplex."""
    u = np.sort(values)[::-1]
    css = np.cumsum(u) - 1
    idx = np.arange(1, len(u) + 1)
    rho = np.flatnonzero(u - css / idx > 0)[-1]
    theta = css[rho] / (rho + 1)
    return np.clip(values - theta, 0, None)


def project_psd(rdm):
    """Closest unit-trace PSD matrix in Frobenius norm.

    Eigendecompose, then project the eigenvalues onto the probability simplex:
    negative weight is clipped and the deficit is taken evenly from the
    remaining eigenvalues.  Accepts a ReducedDensityMatrix or a bare array.
    """
    matrix = rdm.matrix if isinstance(rdm, ReducedDensityMatrix) else np.asarray(rdm, dtype=complex)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise InvalidArgument("project_psd needs a square matrix")
    scale = max(1.0, float(np.abs(matrix).max()))
    if not np.allclose(matrix, matrix.conj().T, atol=1e-10 * scale):
        raise InvalidArgument("project_psd needs a Hermitian matrix")
    herm = (matrix + matrix.conj().T) / 2
    w, v = np.linalg.eigh(herm)
    w = _simplex_projection(w)
    out = (v * w) @ v.conj().T
    out = (out + out.conj().T) / 2
    if not isinstance(rdm, ReducedDensityMatrix):
        return out
    coeffs = coeffs_from_matrix(out, rdm.k)
    coeffs["I" * rdm.k] = 1.0
    return replace(rdm, pauli_coeffs=coeffs, matrix=out, projected=True)


_YY = np.kron(PAULI["Y"], PAULI["Y"])


def _as_two_qubit(rdm) -> np.ndarray:
    m = rdm.matrix if isinstance(rdm, ReducedDensityMatrix) else np.asarray(rdm, dtype=complex)
    if m.shape != (4, 4):
        raise InvalidArgument("entanglement measures need a two-qubit (4x4) density matrix")
    if not np.allclose(m, m.conj().T, atol=1e-10):
        raise InvalidArgument("density matrix is not Hermitian")
    if abs(np.trace(m).real - 1) > 1e-8:
        raise InvalidArgument("density matrix does not have unit trace")
    if np.linalg.eigvalsh(m).min() < -PSD_TOL:
        raise InvalidArgument("density matrix is not PSD; apply project_psd first")
    return m


def concurrence(rdm) -> float:
    """Wootters concurrence max(0, l1 - l2 - l3 - l4), where l_i are the
    decreasing square roots of the eigenvalues of rho (YY) rho* (YY)."""
    rho = _as_two_qubit(rdm)
    w, v = np.linalg.eigh(rho)
    sqrt_rho = (v * np.sqrt(np.clip(w, 0, None))) @ v.conj().T
    flipped = _YY @ rho.conj() @ _YY
    r = sqrt_rho @ flipped @ sqrt_rho
    lam = np.sqrt(np.clip(np.linalg.eigvalsh((r + r.conj().T) / 2), 0, None))[::-1]
    return float(min(1.0, max(0.0, lam[0] - lam[1] - lam[2] - lam[3])))


def _binary_entropy(p: float) -> float:
    if p <= 0 or p >= 1:
        return 0.0
    return float(-p * np.log2(p) - (1 - p) * np.log2(1 - p))


def entanglement_of_formation(rdm) -> float:
    c = concurrence(rdm)
    return _binary_entropy((1 + np.sqrt(max(0.0, 1 - c * c))) / 2)
