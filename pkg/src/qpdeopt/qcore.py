"""Circuit representation and dense statevector simulation.

Bit order is little-endian everywhere: qubit 0 is the least significant bit
of a basis-state index. A gate's matrix index uses ``targets[0]`` as its
least significant bit.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

MAX_QUBITS = 22
UNITARY_TOL = 1e-9
NORM_TOL = 1e-10


def _is_unitary(u: np.ndarray, tol: float = UNITARY_TOL) -> bool:
    d = u.shape[0]
    return bool(np.max(np.abs(u.conj().T @ u - np.eye(d))) <= tol)


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=complex)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class Gate:
    """A (possibly controlled) unitary on ``targets``.

    ``polarity[i]`` is the control value (0 or 1) required on ``controls[i]``.
    """

    matrix: np.ndarray
    targets: tuple[int, ...]
    controls: tuple[int, ...] = ()
    polarity: tuple[int, ...] = ()
    name: str = "U"
    diagonal: bool = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        targets = tuple(int(t) for t in self.targets)
        controls = tuple(int(c) for c in self.controls)
        polarity = tuple(int(p) for p in self.polarity) if self.polarity else (1,) * len(controls)
        mat = self.matrix
        if not (isinstance(mat, np.ndarray) and mat.dtype == complex and not mat.flags.writeable):
            mat = _readonly(mat)
        k = len(targets)
        if k == 0:
            raise ValueError("gate needs at least one target")
        if mat.shape != (2**k, 2**k):
            raise ValueError(f"matrix shape {mat.shape} does not match {k} target qubit(s)")
        if len(polarity) != len(controls) or any(p not in (0, 1) for p in polarity):
            raise ValueError("polarity must give a 0/1 value for every control")
        idx = targets + controls
        if len(set(idx)) != len(idx):
            raise ValueError("target and control qubits must be distinct")
        if min(idx) < 0:
            raise ValueError("negative qubit index")
        if not _is_unitary(mat):
            raise ValueError(f"gate {self.name!r} is not unitary")
        object.__setattr__(self, "matrix", mat)
        object.__setattr__(self, "targets", targets)
        object.__setattr__(self, "controls", controls)
        object.__setattr__(self, "polarity", polarity)
        offdiag = mat - np.diag(np.diag(mat))
        object.__setattr__(self, "diagonal", not np.any(offdiag))

    @property
    def kind(self) -> str:
        k = len(self.targets)
        if k > 1:
            return "block"
        if self.controls and self.name in ("X", "Z"):
            return "mc" + self.name.lower()
        return "controlled" if self.controls else "single"

    @property
    def qubits(self) -> tuple[int, ...]:
        return self.targets + self.controls

    def dagger(self) -> "Gate":
        name = self.name if self.name in ("X", "Y", "Z", "H") else self.name + "^dag"
        return Gate(self.matrix.conj().T, self.targets, self.controls, self.polarity, name)

    def with_controls(self, controls: Mapping[int, int]) -> "Gate":
        extra = tuple(controls)
        return Gate(
            self.matrix,
            self.targets,
            self.controls + extra,
            self.polarity + tuple(int(controls[c]) for c in extra),
            self.name,
        )

    def relabel(self, qmap: Sequence[int] | Mapping[int, int]) -> "Gate":
        return Gate(
            self.matrix,
            tuple(qmap[t] for t in self.targets),
            tuple(qmap[c] for c in self.controls),
            self.polarity,
            self.name,
        )


# Standard gate matrices
I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.diag([1, -1]).astype(complex)
H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
S = np.diag([1, 1j])
T = np.diag([1, np.exp(1j * np.pi / 4)])


def phase_matrix(phi: float) -> np.ndarray:
    return np.diag([1, np.exp(1j * phi)])


def ry_matrix(theta: float) -> np.ndarray:
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def gate(matrix, target: int, name: str = "U") -> Gate:
    return Gate(matrix, (target,), name=name)


def cnot(control: int, target: int) -> Gate:
    return Gate(X, (target,), (control,), (1,), "X")


def mcx(controls: Sequence[int], target: int, polarity: Sequence[int] | None = None) -> Gate:
    return Gate(X, (target,), tuple(controls), tuple(polarity) if polarity else (), "X")


def mcz(controls: Sequence[int], target: int, polarity: Sequence[int] | None = None) -> Gate:
    return Gate(Z, (target,), tuple(controls), tuple(polarity) if polarity else (), "Z")


def block(matrix, targets: Sequence[int], name: str = "U") -> Gate:
    return Gate(matrix, tuple(targets), name=name)


@dataclass(frozen=True)
class Circuit:
    num_qubits: int
    gates: tuple[Gate, ...] = ()

    def __post_init__(self):
        gates = tuple(self.gates)
        for g in gates:
            if max(g.qubits) >= self.num_qubits:
                raise ValueError(f"gate {g.name!r} touches qubit {max(g.qubits)} outside a {self.num_qubits}-qubit register")
        object.__setattr__(self, "gates", gates)

    def __len__(self) -> int:
        return len(self.gates)

    def then(self, *others: "Circuit") -> "Circuit":
        """This circuit followed by ``others`` (applied later)."""
        gates = list(self.gates)
        for o in others:
            if o.num_qubits != self.num_qubits:
                raise ValueError("cannot compose circuits of different widths")
            gates.extend(o.gates)
        return Circuit(self.num_qubits, tuple(gates))

    def append(self, *gates: Gate) -> "Circuit":
        return Circuit(self.num_qubits, self.gates + tuple(gates))

    def widen(self, num_qubits: int, qmap: Sequence[int] | None = None) -> "Circuit":
        """Embed into a larger register, qubit i going to ``qmap[i]``."""
        if qmap is None:
            qmap = list(range(self.num_qubits))
        if len(qmap) != self.num_qubits or len(set(qmap)) != len(qmap):
            raise ValueError("qubit map must be injective over the circuit's qubits")
        return Circuit(num_qubits, tuple(g.relabel(qmap) for g in self.gates))


def compose(*circuits: Circuit) -> Circuit:
    """Apply ``circuits`` in the given order."""
    if not circuits:
        raise ValueError("nothing to compose")
    return circuits[0].then(*circuits[1:])


@dataclass(frozen=True)
class StateVector:
    amplitudes: np.ndarray
    num_qubits: int

    def __post_init__(self):
        amp = _readonly(np.ravel(self.amplitudes))
        if amp.shape[0] != 2**self.num_qubits:
            raise ValueError(f"expected {2**self.num_qubits} amplitudes, got {amp.shape[0]}")
        object.__setattr__(self, "amplitudes", amp)

    @classmethod
    def from_vector(cls, v) -> "StateVector":
        v = np.asarray(v, dtype=complex).ravel()
        q = int(round(np.log2(v.shape[0]))) if v.shape[0] else -1
        if q < 0 or 2**q != v.shape[0]:
            raise ValueError("vector length must be a power of two")
        return cls(v, q)

    @classmethod
    def basis(cls, num_qubits: int, index: int = 0) -> "StateVector":
        v = np.zeros(2**num_qubits, dtype=complex)
        v[index] = 1.0
        return cls(v, num_qubits)

    @classmethod
    def uniform(cls, num_qubits: int) -> "StateVector":
        return cls(np.full(2**num_qubits, 2 ** (-num_qubits / 2), dtype=complex), num_qubits)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2


@dataclass(frozen=True)
class QubitLayout:
    """Named contiguous registers; each register is little-endian."""

    registers: tuple[tuple[str, int, int], ...]  # (name, start, size)
    num_qubits: int

    def __post_init__(self):
        covered = []
        names = set()
        for name, start, size in self.registers:
            if name in names:
                raise ValueError(f"duplicate register {name!r}")
            names.add(name)
            covered.extend(range(start, start + size))
        if sorted(covered) != list(range(self.num_qubits)):
            raise ValueError("registers must be disjoint and cover every qubit")

    @classmethod
    def stack(cls, **sizes: int) -> "QubitLayout":
        """Registers in keyword order starting from qubit 0."""
        regs, start = [], 0
        for name, size in sizes.items():
            regs.append((name, start, int(size)))
            start += int(size)
        return cls(tuple(regs), start)

    def __contains__(self, name: str) -> bool:
        return any(r[0] == name for r in self.registers)

    def qubits(self, name: str) -> tuple[int, ...]:
        for n, start, size in self.registers:
            if n == name:
                return tuple(range(start, start + size))
        raise KeyError(name)

    def size(self, name: str) -> int:
        return len(self.qubits(name))

    def index(self, **values: int) -> int:
        """Basis index with the given register values (others zero)."""
        out = 0
        for name, v in values.items():
            qs = self.qubits(name)
            if not 0 <= v < 2 ** len(qs):
                raise ValueError(f"value {v} does not fit register {name!r}")
            out |= int(v) << qs[0]
        return out


def _check_cap(q: int, cap: int) -> None:
    if q > cap:
        raise ValueError(f"{q} qubits exceeds the simulation cap of {cap}")


def _apply_gate(psi: np.ndarray, g: Gate, q: int) -> None:
    """In-place application to ``psi`` of shape (2,)*q + (batch,)."""
    idx: list = [slice(None)] * (q + 1)
    for c, p in zip(g.controls, g.polarity):
        idx[q - 1 - c] = p
    view = psi[tuple(idx)] if g.controls else psi
    # axes of the view, MSB first, skipping fixed controls
    remaining = [b for b in range(q - 1, -1, -1) if b not in g.controls]
    k = len(g.targets)
    tax = [remaining.index(t) for t in reversed(g.targets)]
    front = list(range(k))
    moved = np.moveaxis(view, tax, front)
    shape = moved.shape
    flat = moved.reshape(2**k, -1)
    if g.diagonal:
        out = flat * np.diag(g.matrix)[:, None]
    else:
        out = g.matrix @ flat
    view[...] = np.moveaxis(out.reshape(shape), front, tax)


def apply_to_columns(columns: np.ndarray, circuit: Circuit) -> np.ndarray:
    """Apply ``circuit`` to each column of a (2^q, batch) array."""
    q = circuit.num_qubits
    _check_cap(q, MAX_QUBITS)
    columns = np.asarray(columns, dtype=complex)
    if columns.ndim != 2 or columns.shape[0] != 2**q:
        raise ValueError(f"expected an array with {2**q} rows")
    batch = columns.shape[1]
    # row index i sits at tensor position with qubit b on axis q-1-b
    psi = np.array(columns).reshape((2,) * q + (batch,))
    for g in circuit.gates:
        _apply_gate(psi, g, q)
    return psi.reshape(2**q, batch)


def apply_circuit(state: StateVector, circuit: Circuit) -> StateVector:
    if state.num_qubits != circuit.num_qubits:
        raise ValueError(f"state has {state.num_qubits} qubits, circuit has {circuit.num_qubits}")
    out = apply_to_columns(state.amplitudes[:, None], circuit)[:, 0]
    return StateVector(out, state.num_qubits)


def circuit_to_matrix(circuit: Circuit, cap: int = MAX_QUBITS) -> np.ndarray:
    """Dense unitary, one column per computational basis state."""
    _check_cap(circuit.num_qubits, cap)
    return apply_to_columns(np.eye(2**circuit.num_qubits, dtype=complex), circuit)


def controlled(circuit: Circuit, controls: Mapping[int, int] | Iterable[int], num_qubits: int | None = None) -> Circuit:
    """Add the given controls to every gate.

    ``controls`` maps qubit -> required value; a plain iterable means value 1.
    """
    if not isinstance(controls, Mapping):
        controls = {int(c): 1 for c in controls}
    controls = {int(c): int(v) for c, v in controls.items()}
    if not controls:
        return circuit if num_qubits is None else circuit.widen(num_qubits)
    used = {b for g in circuit.gates for b in g.qubits}
    if used & set(controls):
        raise ValueError("control qubits overlap the circuit's qubits")
    if any(v not in (0, 1) for v in controls.values()):
        raise ValueError("control values must be 0 or 1")
    width = num_qubits or max(circuit.num_qubits, max(controls) + 1)
    return Circuit(width, tuple(g.with_controls(controls) for g in circuit.gates))


def adjoint(circuit: Circuit) -> Circuit:
    return Circuit(circuit.num_qubits, tuple(g.dagger() for g in reversed(circuit.gates)))


def state_preparation_matrix(v) -> np.ndarray:
    """Unitary whose first column is the unit vector ``v`` (Householder completion)."""
    v = np.asarray(v, dtype=complex).ravel()
    nrm = np.linalg.norm(v)
    if nrm == 0:
        raise ValueError("cannot prepare the zero vector")
    v = v / nrm
    theta = np.angle(v[0]) if abs(v[0]) > 0 else 0.0
    u = v * np.exp(-1j * theta)
    w = -u
    w[0] += 1.0
    wn = np.vdot(w, w).real
    d = v.shape[0]
    if wn < 1e-30:
        refl = np.eye(d, dtype=complex)
    else:
        refl = np.eye(d, dtype=complex) - 2.0 * np.outer(w, w.conj()) / wn
    return np.exp(1j * theta) * refl


def prepare_state(v, qubits: Sequence[int] | None = None, num_qubits: int | None = None, name: str = "PREP") -> Circuit:
    """Circuit mapping |0> on ``qubits`` to the normalized ``v``."""
    v = np.asarray(v, dtype=complex).ravel()
    k = int(round(np.log2(v.shape[0])))
    if 2**k != v.shape[0]:
        raise ValueError("vector length must be a power of two")
    qubits = tuple(range(k)) if qubits is None else tuple(qubits)
    if len(qubits) != k:
        raise ValueError("qubit count does not match vector length")
    width = num_qubits if num_qubits is not None else max(qubits) + 1
    if k == 0:
        return Circuit(width)
    return Circuit(width, (block(state_preparation_matrix(v), qubits, name),))
