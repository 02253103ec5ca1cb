"""Block-encoded objectives over the design register.

For a forward oracle whose design column |xi> outputs u(T; xi)/alpha,
U_obj = U^dag (I (x) R_P) U has diagonal block 2 F(xi)/alpha^2 - 1 where
F = ||P u||^2 (quad) or ||P(u - u_ref)||^2 (err, with U an LCU of the forward
oracle and the reference preparer).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import blockenc, qcore
from .blockenc import BlockEncoding, ProjectorPattern
from .odesolver import DesignGrid
from .qcore import Circuit, QubitLayout, StateVector

MINIMIZE = "minimize"
MAXIMIZE = "maximize"
IMAG_TOL = 1e-9
LEAK_TOL = 1e-6


@dataclass(frozen=True)
class ObjectiveSpec:
    kind: str
    pattern: ProjectorPattern
    reference: np.ndarray | None = None
    reference_norm: float = 0.0
    sense: str = MINIMIZE

    def __post_init__(self):
        if self.kind not in ("quad", "err"):
            raise ValueError("kind must be 'quad' or 'err'")
        if self.sense not in (MINIMIZE, MAXIMIZE):
            raise ValueError("sense must be 'minimize' or 'maximize'")
        if self.kind == "err":
            if self.reference is None:
                raise ValueError("err objective needs a reference state")
            ref = np.asarray(self.reference, dtype=complex).ravel()
            if abs(np.linalg.norm(ref) - 1) > 1e-10:
                raise ValueError("reference must be a unit vector")
            if ref.size != 2 ** len(self.pattern):
                raise ValueError("reference size does not match the pattern")
            if self.reference_norm < 0:
                raise ValueError("reference norm must be non-negative")
            object.__setattr__(self, "reference", ref)
        elif self.reference is not None:
            raise ValueError("quad objective takes no reference")

    @property
    def reference_preparer(self) -> Circuit:
        if self.reference is None:
            raise ValueError("no reference state")
        return qcore.prepare_state(self.reference, name="U_ref")

    @property
    def u_ref(self) -> np.ndarray | None:
        return None if self.reference is None else self.reference * self.reference_norm


@dataclass(frozen=True)
class EncodedObjective:
    encoding: BlockEncoding
    alpha_obj: float
    delta_obj: float
    sense: str
    alpha_for: float = 1.0

    def potential_from_block(self, block_diag: np.ndarray) -> np.ndarray:
        """alpha_obj * block + delta_obj: the operator QHD minimizes."""
        return self.alpha_obj * np.asarray(block_diag) + self.delta_obj

    def objective_from_block(self, block_diag: np.ndarray) -> np.ndarray:
        """F in the problem's own sense (undoes the -R_P of maximization)."""
        v = self.potential_from_block(block_diag)
        return v if self.sense == MINIMIZE else 2 * self.alpha_obj - v

    def to_potential(self, f: np.ndarray) -> np.ndarray:
        f = np.asarray(f, dtype=float)
        return f if self.sense == MINIMIZE else 2 * self.alpha_obj - f


def build_projector_reflection(pattern: ProjectorPattern, flag_qubits: int = 0) -> Circuit:
    """2 (P (x) |0><0|^flags) - I; flags sit above the pattern qubits."""
    full = pattern.extend(ProjectorPattern(("0",) * flag_qubits))
    return blockenc.reflection(full)


def _reflection_on(pattern: ProjectorPattern, qubits, flags, width: int, sense: str) -> Circuit:
    full = pattern.extend(ProjectorPattern(("0",) * len(flags)))
    r = blockenc.reflection(full).widen(width, list(qubits) + list(flags))
    if sense == MAXIMIZE:
        r = r.then(blockenc.global_phase(width, -1.0))
    return r


def _objective_encoding(u: BlockEncoding, reflect: Circuit, layout: QubitLayout, alpha: float) -> BlockEncoding:
    circ = u.circuit.then(reflect, qcore.adjoint(u.circuit))
    design = layout.qubits("design")
    anc = tuple(q for q in range(circ.num_qubits) if q not in design)
    return BlockEncoding(circ, alpha, design, anc, 0.0, layout)


def build_objective_quad(u_for: BlockEncoding, spec: ObjectiveSpec) -> EncodedObjective:
    """U_for^dag (I (x) (+/-)R_P) U_for with alpha_obj = delta_obj = alpha_for^2 / 2."""
    if spec.kind != "quad":
        raise ValueError("objective kind is not quad")
    layout = u_for.layout
    if layout is None or "state" not in layout:
        raise ValueError("forward oracle carries no register layout")
    state = layout.qubits("state")
    if len(spec.pattern) != len(state):
        raise ValueError("pattern does not match the state register")
    width = u_for.circuit.num_qubits
    reflect = _reflection_on(spec.pattern, state, u_for.ancilla_qubits, width, spec.sense)
    a = u_for.alpha**2 / 2
    enc = _objective_encoding(u_for, reflect, layout, a)
    return EncodedObjective(enc, a, a, spec.sense, u_for.alpha)


def build_objective_err(u_for: BlockEncoding, spec: ObjectiveSpec) -> EncodedObjective:
    """U_LCU^dag (I (x) R'_P) U_LCU with U_LCU preparing (u - u_ref)/alpha_LCU.

    A flag qubit (above the forward oracle's qubits) carries the two-term
    PREP; U_for fires on flag 0, U_ref on flag 1, and Z supplies the minus.
    """
    if spec.kind != "err":
        raise ValueError("objective kind is not err")
    layout = u_for.layout
    if layout is None or "state" not in layout:
        raise ValueError("forward oracle carries no register layout")
    state = layout.qubits("state")
    if len(spec.pattern) != len(state):
        raise ValueError("pattern does not match the state register")
    w0 = u_for.circuit.num_qubits
    width = w0 + 1
    flag = w0
    a_for, r = u_for.alpha, float(spec.reference_norm)
    a_lcu = a_for + r
    theta = 2 * np.arctan2(np.sqrt(r), np.sqrt(a_for))
    prep = Circuit(width, (qcore.gate(qcore.ry_matrix(theta), flag, "PREP_flag"),))
    sel_for = qcore.controlled(u_for.circuit.widen(width), {flag: 0}, width)
    sel_ref = qcore.controlled(spec.reference_preparer.widen(width, list(state)), {flag: 1}, width)
    z = Circuit(width, (qcore.gate(qcore.Z, flag, "Z"),))
    u_lcu = prep.then(sel_for, sel_ref, z, qcore.adjoint(prep))
    regs = list(layout.registers) + [("flag", flag, 1)]
    lay = QubitLayout(tuple(regs), width)
    flags = tuple(u_for.ancilla_qubits) + (flag,)
    reflect = _reflection_on(spec.pattern, state, flags, width, spec.sense)
    u_be = BlockEncoding(u_lcu, a_lcu, u_for.system_qubits, flags, 0.0, lay)
    a = a_lcu**2 / 2
    enc = _objective_encoding(u_be, reflect, lay, a)
    return EncodedObjective(enc, a, a, spec.sense, a_for)


def build_objective(u_for: BlockEncoding, spec: ObjectiveSpec) -> EncodedObjective:
    return build_objective_quad(u_for, spec) if spec.kind == "quad" else build_objective_err(u_for, spec)


def objective_block_columns(enc: EncodedObjective, indices=None) -> np.ndarray:
    """Design-register block columns, shape (2^Mm, len(indices))."""
    be = enc.encoding
    if indices is None:
        indices = np.arange(2**be.num_system)
    return be.apply_to_system_columns(indices)


def extract_objective_diagonal(enc: EncodedObjective, grid: DesignGrid, leak_tol: float = LEAK_TOL) -> np.ndarray:
    """F(xi) for every design index, in the problem's own sense."""
    if enc.encoding.num_system != grid.num_qubits:
        raise ValueError("objective and grid disagree on the design register size")
    cols = objective_block_columns(enc)
    diag = np.diag(cols).copy()
    off = cols - np.diag(diag)
    leak = float(np.max(np.abs(off))) if off.size else 0.0
    if leak > leak_tol:
        raise ValueError(f"objective block leaks off the diagonal ({leak:.3e})")
    if np.max(np.abs(diag.imag)) > IMAG_TOL:
        raise ValueError(f"objective has an imaginary residue {np.max(np.abs(diag.imag)):.3e}")
    return enc.objective_from_block(diag.real)


def mean_objective(enc: EncodedObjective, psi0: StateVector) -> float:
    """alpha_obj (<psi0|<0| U_obj |psi0>|0> + 1) for the operator QHD minimizes."""
    be = enc.encoding
    if psi0.num_qubits != be.num_system:
        raise ValueError("psi0 does not live on the design register")
    if abs(psi0.norm - 1) > 1e-10:
        raise ValueError("psi0 must be normalized")
    q = be.circuit.num_qubits
    full = np.zeros(2**q, dtype=complex)
    full[be.system_index(np.arange(2**be.num_system))] = psi0.amplitudes
    out = qcore.apply_to_columns(full[:, None], be.circuit)[:, 0]
    amp = np.vdot(full, out)
    return float(enc.alpha_obj * amp.real + enc.delta_obj)


def classical_objective(u: np.ndarray, spec: ObjectiveSpec) -> float:
    """F from a state-register vector, no circuits involved."""
    d = spec.pattern.diagonal()
    v = np.asarray(u, dtype=complex)
    if spec.kind == "err":
        v = v - spec.u_ref
    return float(np.sum(d * np.abs(v) ** 2))
