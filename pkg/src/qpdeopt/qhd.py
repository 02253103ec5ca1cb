"""Quantum Hamiltonian descent on the design register.

H(s) = e^{-nu s} K + e^{nu s} F with K = -Lambda/2 (Lambda the Dirichlet
Laplacian summed over design axes). Each product-formula step applies the
potential phase first and then the kinetic factor, evaluated exactly in the
discrete sine basis.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.fft import dst

from .odesolver import DesignGrid
from .qcore import MAX_QUBITS, StateVector


@dataclass(frozen=True)
class DesignLaplacian:
    grid: DesignGrid
    eigenvalues: np.ndarray  # per-axis, length 2^m, ascending DST mode order

    def matrix(self) -> np.ndarray:
        n = 2**self.grid.m
        h = self.grid.h_xi
        lam = (np.eye(n, k=1) + np.eye(n, k=-1) - 2 * np.eye(n)) / h**2
        out = np.zeros((self.grid.size, self.grid.size))
        for mu in range(self.grid.M):
            left = np.eye(n ** (self.grid.M - 1 - mu))
            right = np.eye(n**mu)
            out += np.kron(left, np.kron(lam, right))
        return out

    def apply_exp(self, psi: np.ndarray, tau: float) -> np.ndarray:
        """exp(-i Lambda tau) psi via one DST-I pass per axis."""
        M, n = self.grid.M, 2**self.grid.m
        shape = psi.shape
        t = np.asarray(psi, dtype=complex).reshape((n,) * M + shape[1:])
        phase = np.exp(-1j * self.eigenvalues * tau)
        for mu in range(M):
            ax = M - 1 - mu
            t = dst(t, type=1, norm="ortho", axis=ax)
            bshape = [1] * t.ndim
            bshape[ax] = n
            t = t * phase.reshape(bshape)
            t = dst(t, type=1, norm="ortho", axis=ax)
        return t.reshape(shape)


def build_design_laplacian(grid: DesignGrid) -> DesignLaplacian:
    if grid.num_qubits > MAX_QUBITS:
        raise ValueError(f"{grid.num_qubits} design qubits exceeds the cap of {MAX_QUBITS}")
    n = 2**grid.m
    k = np.arange(1, n + 1)
    lam = -(4 / grid.h_xi**2) * np.sin(k * np.pi / (2 * (n + 1))) ** 2
    return DesignLaplacian(grid, lam)


@dataclass(frozen=True)
class QhdConfig:
    nu: float
    delta_s: float
    n_steps: int
    rng_seed: int = 0

    def __post_init__(self):
        if not (self.nu > 0 and self.delta_s > 0 and self.n_steps > 0):
            raise ValueError("nu, delta_s and n_steps must be positive")

    @property
    def S(self) -> float:
        return self.n_steps * self.delta_s


@dataclass(frozen=True)
class QhdHistory:
    step: np.ndarray
    s: np.ndarray
    expectation: np.ndarray
    stddev: np.ndarray
    probabilities: np.ndarray
    snapshots: dict = field(default_factory=dict)


def qhd_evolve(
    f_diag: np.ndarray,
    grid: DesignGrid,
    cfg: QhdConfig,
    psi0: StateVector,
    kinetic_scale: float = 1.0,
    observable: np.ndarray | None = None,
    snapshot_steps=(),
) -> tuple[StateVector, QhdHistory]:
    """Product-formula QHD; records <obs> and its spread after every step.

    ``observable`` defaults to ``f_diag``. ``snapshot_steps`` lists step
    numbers (0 = initial) whose probability vectors are kept.
    """
    f = np.asarray(f_diag, dtype=float)
    if f.shape != (grid.size,):
        raise ValueError(f"f_diag must have length {grid.size}")
    if not np.all(np.isfinite(f)):
        raise ValueError("f_diag has non-finite entries")
    if psi0.num_qubits != grid.num_qubits or abs(psi0.norm - 1) > 1e-10:
        raise ValueError("psi0 must be a normalized design-register state")
    obs = f if observable is None else np.asarray(observable, dtype=float)
    lap = build_design_laplacian(grid)
    psi = np.array(psi0.amplitudes)
    nu, ds = cfg.nu, cfg.delta_s
    n = cfg.n_steps
    exp_v, std_v = np.empty(n), np.empty(n)
    snaps = {}
    want = set(int(k) for k in snapshot_steps)
    if 0 in want:
        snaps[0] = np.abs(psi) ** 2
    for j in range(n):
        s = j * ds
        psi = psi * np.exp(-1j * np.exp(nu * s) * f * ds)
        # kinetic -Lambda/2: exp(+i Lambda e^{-nu s} ds / 2)
        psi = lap.apply_exp(psi, -kinetic_scale * np.exp(-nu * s) * ds / 2)
        p = np.abs(psi) ** 2
        mean = float(p @ obs)
        exp_v[j] = mean
        std_v[j] = float(np.sqrt(max(p @ obs**2 - mean**2, 0.0)))
        if j + 1 in want:
            snaps[j + 1] = p
    final = StateVector(psi, grid.num_qubits)
    hist = QhdHistory(np.arange(1, n + 1), ds * np.arange(1, n + 1), exp_v, std_v, np.abs(psi) ** 2, snaps)
    return final, hist


def friction_from_mean(f_bar: float) -> float:
    if not f_bar > 0:
        raise ValueError("mean objective must be positive for nu = sqrt(F_bar); shift the objective by a positive offset")
    return float(np.sqrt(f_bar))


@dataclass(frozen=True)
class DesignDistribution:
    probabilities: np.ndarray
    xi: np.ndarray  # (2^Mm, M) decoded design values

    @property
    def modal_index(self) -> int:
        return int(np.argmax(self.probabilities))


def distribution(state: StateVector, grid: DesignGrid) -> DesignDistribution:
    if state.num_qubits != grid.num_qubits:
        raise ValueError("state is not on the design register")
    p = state.probabilities()
    if abs(p.sum() - 1) > 1e-10:
        raise ValueError("state is not normalized")
    return DesignDistribution(p, grid.all_decoded())


def sample(dist: DesignDistribution | np.ndarray, seed: int, size: int | None = None):
    """Inverse-CDF draw(s) from the design distribution."""
    p = dist.probabilities if isinstance(dist, DesignDistribution) else np.asarray(dist, dtype=float)
    if np.any(p < 0) or abs(p.sum() - 1) > 1e-8:
        raise ValueError("not a probability vector")
    cdf = np.cumsum(p)
    rng = np.random.default_rng(seed)
    u = rng.random(size) * cdf[-1]
    idx = np.minimum(np.searchsorted(cdf, u, side="right"), p.size - 1)
    return int(idx) if size is None else idx
