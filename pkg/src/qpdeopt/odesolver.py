"""Forward solvers for du/dt = -A(xi) u.

LCHS writes exp(-At) as a weighted sum of unitaries e^{-i(H + kL)t}; the
weights come from a uniform k-grid and the kernel 1/(pi(1+ik)). Anti-Hermitian
families go through plain product-formula Hamiltonian simulation instead.

Register layout for design-controlled circuits, low qubits first:
state (n), design (M*m), LCHS k-register.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.linalg import expm

from . import blockenc, qcore
from .blockenc import BlockEncoding
from .qcore import Circuit, Gate, QubitLayout

PSD_TOL = 1e-9


@dataclass(frozen=True)
class DesignGrid:
    """M design variables on 2^m points each, xi_mu = h * int_mu in [0, 1].

    Index = sum_mu int_mu * 2^(m*mu), so xi_1 holds the least significant bits.
    """

    M: int
    m: int
    lower: tuple[float, ...] | None = None
    upper: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.M < 1 or self.m < 1:
            raise ValueError("M and m must be positive")
        lo = tuple(self.lower) if self.lower is not None else (0.0,) * self.M
        hi = tuple(self.upper) if self.upper is not None else (1.0,) * self.M
        if len(lo) != self.M or len(hi) != self.M:
            raise ValueError("bounds need one value per variable")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def h_xi(self) -> float:
        return 1.0 / (2**self.m - 1)

    @property
    def num_qubits(self) -> int:
        return self.M * self.m

    @property
    def size(self) -> int:
        return 2 ** (self.M * self.m)

    def integers(self, index) -> np.ndarray:
        """Per-variable integers; shape (..., M)."""
        index = np.asarray(index, dtype=np.int64)
        if np.any(index < 0) or np.any(index >= self.size):
            raise ValueError("design index out of range")
        mask = 2**self.m - 1
        return np.stack([(index >> (self.m * mu)) & mask for mu in range(self.M)], axis=-1)

    def decode(self, index) -> np.ndarray:
        return self.integers(index) * self.h_xi

    def physical(self, index) -> np.ndarray:
        lo, hi = np.array(self.lower), np.array(self.upper)
        return lo + (hi - lo) * self.decode(index)

    def index(self, ints: Sequence[int]) -> int:
        if len(ints) != self.M or any(not 0 <= v < 2**self.m for v in ints):
            raise ValueError("need one in-range integer per variable")
        return int(sum(int(v) << (self.m * mu) for mu, v in enumerate(ints)))

    def all_decoded(self) -> np.ndarray:
        return self.decode(np.arange(self.size))

    def qubit(self, mu: int, b: int, offset: int = 0) -> int:
        """Qubit of bit b (0-based, weight 2^b) of variable mu."""
        return offset + mu * self.m + b

    def pattern(self, index: int, offset: int = 0) -> dict[int, int]:
        return {offset + q: (index >> q) & 1 for q in range(self.num_qubits)}


@dataclass(frozen=True)
class OdeFamily:
    """du/dt = -(A0 + sum_mu xi_mu A_mu) u, u(0) = u0 (unit vector)."""

    A0: np.ndarray
    A_terms: tuple[np.ndarray, ...]
    u0: np.ndarray
    T: float
    u0_norm: float = 1.0
    encodings: tuple[BlockEncoding, ...] | None = None
    psd_tol: float = PSD_TOL
    forward: str = "lchs"
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        A0 = np.asarray(self.A0, dtype=complex)
        terms = tuple(np.asarray(a, dtype=complex) for a in self.A_terms)
        u0 = np.asarray(self.u0, dtype=complex).ravel()
        N = A0.shape[0]
        if A0.shape != (N, N) or any(a.shape != (N, N) for a in terms):
            raise ValueError("A0 and every A_mu must be square and of equal size")
        n = int(round(np.log2(N)))
        if 2**n != N:
            raise ValueError("dimension must be a power of two")
        if u0.shape != (N,) or abs(np.linalg.norm(u0) - 1) > 1e-10:
            raise ValueError("u0 must be a unit vector of matching size")
        if self.T <= 0:
            raise ValueError("evolution time must be positive")
        if self.forward not in ("lchs", "hamiltonian"):
            raise ValueError("forward must be 'lchs' or 'hamiltonian'")
        if self.encodings is not None and len(self.encodings) != len(terms) + 1:
            raise ValueError("need one encoding for A0 and one per A_mu")
        object.__setattr__(self, "A0", A0)
        object.__setattr__(self, "A_terms", terms)
        object.__setattr__(self, "u0", u0)

    @property
    def M(self) -> int:
        return len(self.A_terms)

    @property
    def dimension(self) -> int:
        return self.A0.shape[0]

    @property
    def n(self) -> int:
        return int(round(np.log2(self.dimension)))

    def A(self, xi: Sequence[float]) -> np.ndarray:
        xi = np.atleast_1d(np.asarray(xi, dtype=float))
        if xi.shape != (self.M,):
            raise ValueError(f"expected {self.M} design values")
        out = self.A0.copy()
        for a, x in zip(self.A_terms, xi):
            out = out + x * a
        return out

    @property
    def u0_preparer(self) -> Circuit:
        return qcore.prepare_state(self.u0, name="U_u0")

    def min_real_eigenvalue(self, grid: "DesignGrid | None" = None) -> float:
        """Smallest eigenvalue of Re(A) over A0, the A_mu and (if given) the grid."""
        mats = [self.A0, *self.A_terms]
        if grid is not None:
            mats += [self.A(x) for x in grid.all_decoded()]
        return float(min(np.linalg.eigvalsh((a + a.conj().T) / 2)[0] for a in mats))


def cartesian_split(A: np.ndarray, psd_tol: float = PSD_TOL) -> tuple[np.ndarray, np.ndarray]:
    """L = (A + A^dag)/2, H = -i(A - A^dag)/2, so that A = L + iH."""
    A = np.asarray(A, dtype=complex)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("A must be square")
    L = (A + A.conj().T) / 2
    Hm = -1j * (A - A.conj().T) / 2
    lmin = np.linalg.eigvalsh(L)[0]
    if lmin < -psd_tol:
        raise ValueError(f"Re(A) is not positive semidefinite: smallest eigenvalue {lmin:.3e}")
    return L, Hm


@dataclass(frozen=True)
class LchsQuadrature:
    k_max: float
    delta_k: float
    nodes: np.ndarray
    weights: np.ndarray

    @property
    def alpha(self) -> float:
        return float(np.sum(np.abs(self.weights)))

    @property
    def num_qubits(self) -> int:
        return int(round(np.log2(self.nodes.size)))

    def prep_amplitudes(self) -> np.ndarray:
        return np.sqrt(np.abs(self.weights) / self.alpha)

    def phases(self) -> np.ndarray:
        return np.exp(1j * np.angle(self.weights))


def lchs_kernel(k) -> np.ndarray:
    return 1.0 / (np.pi * (1 + 1j * np.asarray(k)))


def lchs_weights(nodes, delta_k: float) -> np.ndarray:
    """w_j = dk f(k_j) / (1 - i k_j)."""
    k = np.asarray(nodes, dtype=float)
    return delta_k * lchs_kernel(k) / (1 - 1j * k)


def lchs_quadrature(k_max: float, delta_k: float) -> LchsQuadrature:
    """Left-endpoint rule on [-k_max, k_max) with weights dk f(k)/(1 - ik)."""
    if k_max <= 0 or delta_k <= 0:
        raise ValueError("k_max and delta_k must be positive")
    count = 2 * k_max / delta_k
    num = int(round(count))
    if abs(count - num) > 1e-9 * count or num < 1 or num & (num - 1):
        raise ValueError(f"2*k_max/delta_k = {count} is not a power of two")
    k = -k_max + delta_k * np.arange(num)
    return LchsQuadrature(float(k_max), float(delta_k), k, lchs_weights(k, delta_k))


def _n_steps(t: float, dt: float) -> int:
    steps = int(round(t / dt))
    if steps < 1 or abs(steps * dt - t) > 1e-9 * max(t, 1.0):
        raise ValueError(f"trotter step {dt} does not divide t = {t}")
    return steps


def _herm_expm(Hm: np.ndarray, tau: float) -> np.ndarray:
    """exp(-i Hm tau) for Hermitian Hm."""
    ev, V = np.linalg.eigh((Hm + Hm.conj().T) / 2)
    return (V * np.exp(-1j * ev * tau)) @ V.conj().T


def _lchs_gates(blocks, quad: LchsQuadrature, t: float, dt: float, state_q, k_q, width) -> list[Gate]:
    """PREP, Trotterized k-controlled evolution, PREP^dag.

    ``blocks`` is a list of (controls, L, H); each block's unitaries are
    applied under its control pattern. Per step: e^{-i k0 L dt} e^{-i H dt}
    as one gate, then e^{-i dk 2^b L dt} controlled on k-bit b.
    """
    steps = _n_steps(t, dt)
    nk = quad.num_qubits
    prep = qcore.state_preparation_matrix(quad.prep_amplitudes())
    phases = quad.phases()
    gates = []
    if nk:
        gates.append(qcore.block(prep, k_q, "PREP_k"))
        if np.max(np.abs(phases - 1)) > 1e-15:
            gates.append(qcore.block(np.diag(phases), k_q, "PHASE_k"))
    elif abs(phases[0] - 1) > 1e-15:
        gates.append(qcore.gate(phases[0] * np.eye(2), state_q[0], "GPH"))
    k0, dk = quad.nodes[0], quad.delta_k
    per_block = []
    for ctrl, L, Hm in blocks:
        ev, V = np.linalg.eigh(L)
        eL = lambda tau: (V * np.exp(-1j * ev * tau)) @ V.conj().T
        first = eL(k0 * dt) @ _herm_expm(Hm, dt)
        bits = [eL(dk * 2**b * dt) for b in range(nk)]
        per_block.append((ctrl, first, bits))
    step_gates = []
    for ctrl, first, bits in per_block:
        c = tuple(ctrl)
        p = tuple(ctrl[q] for q in c)
        step_gates.append(Gate(first, state_q, c, p, "E_HL"))
        for b in range(nk):
            step_gates.append(Gate(bits[b], state_q, c + (k_q[b],), p + (1,), f"E_L{b}"))
    for _ in range(steps):
        gates.extend(step_gates)
    if nk:
        gates.append(qcore.block(prep.conj().T, k_q, "PREP_k^dag"))
    return gates


def build_lchs(A: np.ndarray, quad: LchsQuadrature, t: float, trotter_dt: float, psd_tol: float = PSD_TOL) -> BlockEncoding:
    """(alpha_LCHS, n_k, eps) block-encoding of exp(-A t)."""
    L, Hm = cartesian_split(A, psd_tol)
    N = L.shape[0]
    n = int(round(np.log2(N)))
    if 2**n != N:
        raise ValueError("dimension must be a power of two")
    nk = quad.num_qubits
    width = n + nk
    state_q = tuple(range(n))
    k_q = tuple(range(n, width))
    gates = _lchs_gates([({}, L, Hm)], quad, t, trotter_dt, state_q, k_q, width)
    layout = QubitLayout.stack(state=n, k=nk)
    return BlockEncoding(Circuit(width, tuple(gates)), quad.alpha, state_q, k_q, 0.0, layout)


@dataclass(frozen=True)
class DesignControlledGenerator:
    """A~ = sum_xi |xi><xi| (x) A(xi) on state (low) and design (high) qubits."""

    ode: OdeFamily
    grid: DesignGrid

    def block(self, index: int) -> np.ndarray:
        return self.ode.A(self.grid.decode(index))

    def dense(self) -> np.ndarray:
        N = self.ode.dimension
        out = np.kron(np.eye(self.grid.size), self.ode.A0)
        h = self.grid.h_xi
        for mu, Amu in enumerate(self.ode.A_terms):
            for b in range(self.grid.m):
                q = self.grid.qubit(mu, b)
                proj = ((np.arange(self.grid.size) >> q) & 1).astype(float)
                out = out + h * 2**b * np.kron(np.diag(proj), Amu)
        assert out.shape == (N * self.grid.size,) * 2
        return out

    def lcu_weights(self) -> np.ndarray:
        """l1 coefficient weights: 1 for A0, then h 2^b per design bit."""
        h = self.grid.h_xi
        w = [1.0] + [h * 2**b for _ in range(self.ode.M) for b in range(self.grid.m)]
        return np.array(w)

    def encoding(self) -> BlockEncoding:
        """LCU block-encoding from the family's per-matrix encodings.

        Uses h 2^b |1><1|_b (x) A_mu = (h 2^b / 2)(I (x) A_mu - Z_b (x) A_mu).
        """
        if self.ode.encodings is None:
            raise ValueError("family carries no block-encodings for its matrices")
        n, nd = self.ode.n, self.grid.num_qubits
        base = [blockenc.tensor_identity(e, nd) for e in self.ode.encodings]
        encs, coeffs = [base[0]], [1.0]
        h = self.grid.h_xi
        for mu in range(self.ode.M):
            e = base[mu + 1]
            for b in range(self.grid.m):
                q = n + self.grid.qubit(mu, b)
                z = Circuit(e.circuit.num_qubits, (qcore.gate(qcore.Z, q, "Z"),))
                ez = BlockEncoding(e.circuit.then(z), e.alpha, e.system_qubits, e.ancilla_qubits)
                c = h * 2**b / 2
                encs += [e, ez]
                coeffs += [c, -c]
        return blockenc.lcu_combine(encs, coeffs)


def build_design_controlled_generator(ode: OdeFamily, grid: DesignGrid) -> DesignControlledGenerator:
    if grid.M != ode.M:
        raise ValueError(f"grid has {grid.M} variables, family has {ode.M}")
    return DesignControlledGenerator(ode, grid)


def _forward_layout(ode: OdeFamily, grid: DesignGrid, nk: int) -> QubitLayout:
    return QubitLayout.stack(state=ode.n, design=grid.num_qubits, k=nk)


def build_forward_oracle(ode: OdeFamily, grid: DesignGrid, quad: LchsQuadrature, trotter_dt: float) -> BlockEncoding:
    """U_for = U_LCHS(A~) (I (x) U_u0 (x) I), multiplexed over design states.

    For every design basis state the LCHS select acts with that state's
    frozen A(xi), so each design column reproduces build_lchs at A(xi).
    """
    gen = build_design_controlled_generator(ode, grid)
    layout = _forward_layout(ode, grid, quad.num_qubits)
    width = layout.num_qubits
    state_q, k_q = layout.qubits("state"), layout.qubits("k")
    n = ode.n
    blocks = []
    for idx in range(grid.size):
        L, Hm = cartesian_split(gen.block(idx), ode.psd_tol)
        blocks.append((grid.pattern(idx, offset=n), L, Hm))
    gates = [qcore.block(qcore.state_preparation_matrix(ode.u0), state_q, "U_u0")]
    gates += _lchs_gates(blocks, quad, ode.T, trotter_dt, state_q, k_q, width)
    system = state_q + layout.qubits("design")
    return BlockEncoding(Circuit(width, tuple(gates)), quad.alpha, system, k_q, 0.0, layout)


def hamiltonian_forward(ode: OdeFamily, grid: DesignGrid, trotter_dt: float) -> BlockEncoding:
    """Product-formula forward oracle for anti-Hermitian families (alpha = 1).

    Per step: e^{-i H0 dt}, then e^{-i H_mu h 2^b dt} controlled on design bit
    (mu, b), where H = -iA is Hermitian.
    """
    if grid.M != ode.M:
        raise ValueError(f"grid has {grid.M} variables, family has {ode.M}")
    for a in (ode.A0, *ode.A_terms):
        if np.max(np.abs(a + a.conj().T)) > 1e-10:
            raise ValueError("family is not anti-Hermitian")
    layout = QubitLayout.stack(state=ode.n, design=grid.num_qubits)
    width = layout.num_qubits
    state_q = layout.qubits("state")
    steps = _n_steps(ode.T, trotter_dt)
    h = grid.h_xi
    step = [qcore.block(_herm_expm(-1j * ode.A0, trotter_dt), state_q, "E_H0")]
    for mu, Amu in enumerate(ode.A_terms):
        Hmu = -1j * Amu
        for b in range(grid.m):
            q = grid.qubit(mu, b, offset=ode.n)
            step.append(Gate(_herm_expm(Hmu, h * 2**b * trotter_dt), state_q, (q,), (1,), f"E_H{mu + 1}"))
    gates = [qcore.block(qcore.state_preparation_matrix(ode.u0), state_q, "U_u0")]
    gates += step * steps
    system = state_q + layout.qubits("design")
    return BlockEncoding(Circuit(width, tuple(gates)), 1.0, system, (), 0.0, layout)


def forward_states(u_for: BlockEncoding, indices: Sequence[int] | None = None) -> np.ndarray:
    """alpha * (state-register output with ancillas at zero), per design index.

    Returns shape (len(indices), N).
    """
    layout = u_for.layout
    if layout is None or "design" not in layout:
        raise ValueError("encoding carries no design layout")
    n, nd = layout.size("state"), layout.size("design")
    if indices is None:
        indices = range(2**nd)
    indices = np.asarray(list(indices), dtype=np.int64)
    q = u_for.circuit.num_qubits
    psi = np.zeros((2**q, indices.size), dtype=complex)
    psi[indices << n, np.arange(indices.size)] = 1.0
    out = qcore.apply_to_columns(psi, u_for.circuit)
    rows = (indices[:, None] << n) + np.arange(2**n)[None, :]
    return u_for.alpha * out[rows, np.arange(indices.size)[:, None]]


def classical_evolve(A: np.ndarray, u0: np.ndarray, t: float) -> np.ndarray:
    """expm(-A t) u0 by Pade scaling-and-squaring."""
    A = np.asarray(A, dtype=complex)
    u0 = np.asarray(u0, dtype=complex)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or u0.shape[0] != A.shape[0]:
        raise ValueError("A must be square and match u0")
    return expm(-A * t) @ u0


def lchs_sum(A: np.ndarray, quad: LchsQuadrature, t: float, dt: float, u0: np.ndarray | None = None, psd_tol: float = PSD_TOL) -> np.ndarray:
    """The matrix (or vector) that build_lchs encodes, computed classically."""
    L, Hm = cartesian_split(A, psd_tol)
    steps = _n_steps(t, dt)
    ev, V = np.linalg.eigh(L)
    eH = _herm_expm(Hm, dt)
    target = np.eye(L.shape[0], dtype=complex) if u0 is None else np.asarray(u0, dtype=complex)
    out = np.zeros_like(target)
    for k, w in zip(quad.nodes, quad.weights):
        step = ((V * np.exp(-1j * k * ev * dt)) @ V.conj().T) @ eH
        out = out + w * np.linalg.matrix_power(step, steps) @ target
    return out
