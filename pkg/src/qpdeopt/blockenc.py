"""Block-encodings built from linear combinations of unitaries.

Convention: in every encoding built here the system register occupies
qubits ``[0, n)`` and the ancillas follow. The encoded block is
``<0|_anc U |0>_anc`` read as a matrix on the system register.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import qcore
from .qcore import Circuit, Gate, MAX_QUBITS, QubitLayout

DIRICHLET = "dirichlet-both"
NEUMANN_RIGHT = "dirichlet-left-neumann-right"
BOUNDARIES = (DIRICHLET, NEUMANN_RIGHT)


@dataclass(frozen=True)
class BlockEncoding:
    circuit: Circuit
    alpha: float
    system_qubits: tuple[int, ...]
    ancilla_qubits: tuple[int, ...]
    error_bound: float = 0.0
    layout: QubitLayout | None = field(default=None, compare=False)

    def __post_init__(self):
        sys_q = tuple(int(q) for q in self.system_qubits)
        anc_q = tuple(int(q) for q in self.ancilla_qubits)
        if sorted(sys_q + anc_q) != list(range(self.circuit.num_qubits)):
            raise ValueError("system and ancilla qubits must partition the circuit")
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if self.error_bound < 0:
            raise ValueError("error bound must be non-negative")
        object.__setattr__(self, "system_qubits", sys_q)
        object.__setattr__(self, "ancilla_qubits", anc_q)

    @property
    def num_system(self) -> int:
        return len(self.system_qubits)

    @property
    def num_ancilla(self) -> int:
        return len(self.ancilla_qubits)

    def system_index(self, j: np.ndarray | int) -> np.ndarray:
        """Full-register index of system basis state ``j`` with ancillas at zero."""
        j = np.asarray(j, dtype=np.int64)
        out = np.zeros_like(j)
        for b, q in enumerate(self.system_qubits):
            out |= ((j >> b) & 1) << q
        return out

    def apply_to_system_columns(self, columns: Sequence[int]) -> np.ndarray:
        """Project ``U|j>|0>`` back onto ancilla zero, for each system index j.

        Returns a (2^n_sys, len(columns)) array.
        """
        q = self.circuit.num_qubits
        cols = np.asarray(columns, dtype=np.int64)
        psi = np.zeros((2**q, cols.size), dtype=complex)
        psi[self.system_index(cols), np.arange(cols.size)] = 1.0
        out = qcore.apply_to_columns(psi, self.circuit)
        rows = self.system_index(np.arange(2**self.num_system))
        return out[rows, :]

    def matrix(self) -> np.ndarray:
        """alpha times the extracted block."""
        return self.alpha * extract_block(self)


def extract_block(be: BlockEncoding, cap: int = MAX_QUBITS) -> np.ndarray:
    if be.circuit.num_qubits > cap:
        raise ValueError(f"{be.circuit.num_qubits} qubits exceeds the cap of {cap}")
    return be.apply_to_system_columns(np.arange(2**be.num_system))


@dataclass(frozen=True)
class ProjectorPattern:
    """Per-qubit projector entries, qubit 0 first: '0', '1' or 'I'."""

    entries: tuple[str, ...]

    def __post_init__(self):
        entries = tuple(str(e) for e in self.entries)
        if any(e not in ("0", "1", "I") for e in entries):
            raise ValueError("pattern entries must be '0', '1' or 'I'")
        object.__setattr__(self, "entries", entries)

    @classmethod
    def from_index(cls, n: int, j: int) -> "ProjectorPattern":
        """Rank-one projector |j><j| on n qubits."""
        return cls(tuple(str((j >> b) & 1) for b in range(n)))

    @classmethod
    def identity(cls, n: int) -> "ProjectorPattern":
        return cls(("I",) * n)

    def __len__(self) -> int:
        return len(self.entries)

    def extend(self, other: "ProjectorPattern") -> "ProjectorPattern":
        """This pattern on the low qubits, ``other`` on the qubits above."""
        return ProjectorPattern(self.entries + other.entries)

    @property
    def fixed(self) -> dict[int, int]:
        return {q: int(e) for q, e in enumerate(self.entries) if e != "I"}

    def diagonal(self) -> np.ndarray:
        idx = np.arange(2 ** len(self.entries))
        d = np.ones(idx.size)
        for q, v in self.fixed.items():
            d *= ((idx >> q) & 1) == v
        return d


@dataclass(frozen=True)
class BandOperatorSpec:
    alpha1: float
    alpha2: float
    phi: float
    n_x: int
    boundary: str = DIRICHLET


@dataclass(frozen=True)
class PiecewiseDiagonalSpec:
    terms: tuple[tuple[float, ProjectorPattern], ...]


def _pattern_phase_gate(pattern: dict[int, int], phase: complex, num_qubits: int) -> Gate:
    """Diagonal gate multiplying the pattern's subspace by ``phase``."""
    qs = sorted(pattern)
    t = qs[0]
    m = np.diag([1.0, phase]) if pattern[t] == 1 else np.diag([phase, 1.0])
    ctrl = tuple(qs[1:])
    return Gate(m, (t,), ctrl, tuple(pattern[c] for c in ctrl), "PH")


def global_phase(num_qubits: int, phase: complex, qubit: int = 0) -> Circuit:
    if abs(phase - 1) < 1e-15:
        return Circuit(num_qubits)
    return Circuit(num_qubits, (qcore.gate(phase * np.eye(2), qubit, "GPH"),))


def reflection(pattern: ProjectorPattern, num_qubits: int | None = None) -> Circuit:
    """2P - I for the pattern's projector P."""
    n = num_qubits if num_qubits is not None else len(pattern)
    fixed = pattern.fixed
    if not fixed:
        return Circuit(n)
    # I - 2P is a polarity-controlled Z; the leading minus is a global phase
    flip = _pattern_phase_gate(fixed, -1.0, n)
    return Circuit(n, (flip,)).then(global_phase(n, -1.0))


def _lcu(unitaries: Sequence[tuple[Circuit, int]], coefficients: Sequence[complex], n_sys: int) -> tuple[Circuit, float, int]:
    """PREP/SELECT/PREP^dag over circuits sharing a system register.

    Each unitary is (circuit, n_anc): circuit qubits [0, n_sys) are system,
    the next n_anc are that term's own ancillas. Returns (circuit, l1-weight,
    total ancilla count). The select register sits above the shared ancillas.
    """
    coeffs = np.asarray(coefficients, dtype=complex)
    keep = np.flatnonzero(np.abs(coeffs) > 0)
    if keep.size == 0:
        raise ValueError("coefficients are all zero")
    terms = [unitaries[i] for i in keep]
    coeffs = coeffs[keep]
    shared = max(a for _, a in terms)
    n_sel = int(np.ceil(np.log2(len(terms)))) if len(terms) > 1 else 0
    width = n_sys + shared + n_sel
    sel = list(range(n_sys + shared, width))
    weight = float(np.sum(np.abs(coeffs)))
    amps = np.zeros(2**n_sel)
    amps[: len(terms)] = np.sqrt(np.abs(coeffs) / weight)
    prep = qcore.prepare_state(amps, sel, width) if n_sel else Circuit(width)
    body = Circuit(width)
    for j, ((circ, _), c) in enumerate(zip(terms, coeffs)):
        wide = circ.widen(width, list(range(circ.num_qubits)))
        pattern = {q: (j >> b) & 1 for b, q in enumerate(sel)}
        body = body.then(qcore.controlled(wide, pattern, width))
        ph = np.exp(1j * np.angle(c))
        if abs(ph - 1) > 1e-15:
            if pattern:
                body = body.append(_pattern_phase_gate(pattern, ph, width))
            else:
                body = body.then(global_phase(width, ph))
    return prep.then(body, qcore.adjoint(prep)), weight, shared + n_sel


def _encoding(circuit: Circuit, alpha: float, n_sys: int, error: float = 0.0) -> BlockEncoding:
    q = circuit.num_qubits
    return BlockEncoding(circuit, alpha, tuple(range(n_sys)), tuple(range(n_sys, q)), error)


def build_shift(n: int, direction: str = "plus") -> Circuit:
    """Cyclic increment (plus) or decrement (minus) on n qubits."""
    if n < 1:
        raise ValueError("need at least one qubit")
    if direction not in ("plus", "minus"):
        raise ValueError("direction must be 'plus' or 'minus'")
    pol = 1 if direction == "plus" else 0
    gates = []
    for t in range(n - 1, -1, -1):
        ctrl = tuple(range(t))
        gates.append(qcore.mcx(ctrl, t, (pol,) * t))
    return Circuit(n, tuple(gates))


def build_ghz_preparer(n: int, phi: float) -> Circuit:
    """|0..0> -> (|0..0> + e^{i phi}|1..1>)/sqrt2, |10..0> -> same with minus.

    The second input is the state with only the most significant qubit set.
    """
    if n < 1:
        raise ValueError("need at least one qubit")
    top = n - 1
    gates = [qcore.gate(qcore.H, top, "H")]
    if phi != 0:
        gates.append(qcore.gate(qcore.phase_matrix(phi), top, "P"))
    gates += [qcore.cnot(top, t) for t in range(top)]
    return Circuit(n, tuple(gates))


def band_matrix(spec: BandOperatorSpec) -> np.ndarray:
    """Dense target matrix for a band operator spec."""
    N = 2**spec.n_x
    a1, a2 = spec.alpha1, spec.alpha2
    up = a1 * np.exp(1j * spec.phi)
    B = a2 * np.eye(N, dtype=complex)
    B += up * np.eye(N, k=1) + np.conj(up) * np.eye(N, k=-1)
    if spec.boundary == NEUMANN_RIGHT:
        # ghost node u_N = u_{N-1} enters through the superdiagonal coefficient
        B[N - 1, N - 1] += up
    elif spec.boundary != DIRICHLET:
        raise ValueError(f"unsupported boundary {spec.boundary!r}")
    return B


def _band_terms(spec: BandOperatorSpec) -> tuple[list[Circuit], list[complex]]:
    n = spec.n_x
    if spec.boundary not in BOUNDARIES:
        raise ValueError(f"unsupported boundary {spec.boundary!r}")
    a1, a2, phi = float(spec.alpha1), float(spec.alpha2), float(spec.phi)
    circuits: list[Circuit] = []
    coeffs: list[complex] = []
    if a1 != 0:
        ghz = build_ghz_preparer(n, phi)
        ghz_dag = qcore.adjoint(ghz)
        top = n - 1
        z_top = Circuit(n, (qcore.gate(qcore.Z, top, "Z"),))
        rest = {q: 0 for q in range(top)}
        if rest:
            # Z on the top qubit times (I - 2|0><0|) on the rest
            z_r0 = z_top.append(_pattern_phase_gate(rest, -1.0, n))
        else:
            z_r0 = z_top.then(global_phase(n, -1.0))
        circuits += [
            build_shift(n, "minus"),
            build_shift(n, "plus"),
            ghz_dag.then(z_r0, ghz),
            ghz_dag.then(z_top, ghz),
        ]
        coeffs += [a1 * np.exp(1j * phi), a1 * np.exp(-1j * phi), a1 / 2, -a1 / 2]
        if spec.boundary == NEUMANN_RIGHT:
            last = ProjectorPattern.from_index(n, 2**n - 1)
            circuits += [Circuit(n), reflection(last)]
            up = a1 * np.exp(1j * phi)
            coeffs += [up / 2, up / 2]
    if a2 != 0:
        circuits.append(Circuit(n))
        coeffs.append(a2)
    return circuits, coeffs


def build_band_operator(spec: BandOperatorSpec) -> BlockEncoding:
    """Block-encoding of the Hermitian band operator B(alpha1, alpha2, phi).

    Terms: alpha1 e^{i phi} DEC + alpha1 e^{-i phi} INC + alpha2 I minus the
    two cyclic wrap entries, which are removed through a GHZ-basis rotation.
    """
    if spec.alpha1 == 0 and spec.alpha2 == 0:
        raise ValueError("alpha1 and alpha2 cannot both be zero")
    circuits, coeffs = _band_terms(spec)
    circ, weight, _ = _lcu([(c, 0) for c in circuits], coeffs, spec.n_x)
    return _encoding(circ, weight, spec.n_x)


def build_multidim_band(specs: Sequence[BandOperatorSpec]) -> BlockEncoding:
    """Kronecker sum of band operators; axis 0 occupies the lowest qubits."""
    specs = list(specs)
    if not specs:
        raise ValueError("need at least one axis")
    n_total = sum(s.n_x for s in specs)
    circuits, coeffs = [], []
    offset = 0
    for s in specs:
        cs, ws = _band_terms(s)
        qmap = list(range(offset, offset + s.n_x))
        circuits += [c.widen(n_total, qmap) for c in cs]
        coeffs += ws
        offset += s.n_x
    if not coeffs:
        raise ValueError("every axis is zero")
    circ, weight, _ = _lcu([(c, 0) for c in circuits], coeffs, n_total)
    return _encoding(circ, weight, n_total)


def build_piecewise_diagonal(spec: PiecewiseDiagonalSpec, n: int) -> BlockEncoding:
    """Sum of alpha_k * P_k, each projector written as (R_k + I)/2."""
    if not spec.terms:
        raise ValueError("need at least one term")
    circuits, coeffs = [], []
    for a, pattern in spec.terms:
        if len(pattern) != n:
            raise ValueError("pattern width does not match n")
        if a == 0:
            continue
        circuits += [reflection(pattern, n), Circuit(n)]
        coeffs += [a / 2, a / 2]
    if not coeffs:
        raise ValueError("all coefficients are zero")
    circ, weight, _ = _lcu([(c, 0) for c in circuits], coeffs, n)
    return _encoding(circ, weight, n)


def piecewise_diagonal(spec: PiecewiseDiagonalSpec, n: int) -> np.ndarray:
    d = np.zeros(2**n)
    for a, pattern in spec.terms:
        d += a * pattern.diagonal()
    return d


def _normalized(be: BlockEncoding) -> tuple[Circuit, int]:
    """Relabel so system is [0, n) and ancillas follow."""
    qmap = [0] * be.circuit.num_qubits
    for i, q in enumerate(be.system_qubits + be.ancilla_qubits):
        qmap[q] = i
    return be.circuit.widen(be.circuit.num_qubits, qmap), be.num_ancilla


def lcu_combine(encodings: Sequence[BlockEncoding], coefficients: Sequence[complex]) -> BlockEncoding:
    """Block-encoding of sum_j c_j * (alpha_j * block_j)."""
    encodings = list(encodings)
    if len(encodings) != len(coefficients) or not encodings:
        raise ValueError("need one coefficient per encoding")
    n = encodings[0].num_system
    if any(e.num_system != n for e in encodings):
        raise ValueError("encodings act on different system sizes")
    coeffs = np.asarray(coefficients, dtype=complex)
    alphas = np.array([e.alpha for e in encodings])
    terms = [_normalized(e) for e in encodings]
    circ, weight, _ = _lcu(terms, coeffs * alphas, n)
    err = float(np.sum(np.abs(coeffs) * np.array([e.error_bound for e in encodings])))
    return _encoding(circ, weight, n, err)


def tensor_identity(be: BlockEncoding, n_extra: int) -> BlockEncoding:
    """I (on n_extra new high system qubits) tensor the encoding."""
    circ, n_anc = _normalized(be)
    n = be.num_system
    width = n + n_extra + n_anc
    qmap = list(range(n)) + list(range(n + n_extra, width))
    return _encoding(circ.widen(width, qmap), be.alpha, n + n_extra, be.error_bound)
