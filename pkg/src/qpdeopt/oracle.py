"""Classical ground truth: matrix exponentials and landscape comparison."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .objective import MAXIMIZE, ObjectiveSpec, classical_objective
from .odesolver import DesignGrid, OdeFamily, classical_evolve

DENSE_CAP = 2**10


def oracle_objective(ode: OdeFamily, spec: ObjectiveSpec, grid: DesignGrid) -> np.ndarray:
    """F(xi) from expm(-A(xi) T) u0 for every design index."""
    if ode.dimension > DENSE_CAP:
        raise ValueError(f"dimension {ode.dimension} exceeds the dense cap {DENSE_CAP}")
    out = np.empty(grid.size)
    for i, xi in enumerate(grid.all_decoded()):
        u = classical_evolve(ode.A(xi), ode.u0, ode.T)
        out[i] = classical_objective(u, spec)
    return out


@dataclass(frozen=True)
class LandscapeTable:
    index: np.ndarray
    xi: np.ndarray
    f_encoded: np.ndarray
    f_oracle: np.ndarray
    sense: str = "minimize"

    @property
    def abs_diff(self) -> np.ndarray:
        return np.abs(self.f_encoded - self.f_oracle)

    @property
    def max_diff(self) -> float:
        return float(self.abs_diff.max())

    @property
    def mean_diff(self) -> float:
        return float(self.abs_diff.mean())

    def _arg(self, f: np.ndarray) -> int:
        return int(np.argmax(f) if self.sense == MAXIMIZE else np.argmin(f))

    @property
    def argextremum_index(self) -> int:
        return self._arg(self.f_encoded)

    @property
    def oracle_argextremum_index(self) -> int:
        return self._arg(self.f_oracle)

    @property
    def argextremum_agrees(self) -> bool:
        return self.argextremum_index == self.oracle_argextremum_index


def compare_landscapes(encoded, oracle, grid: DesignGrid, sense: str = "minimize") -> LandscapeTable:
    encoded = np.asarray(encoded, dtype=float)
    oracle = np.asarray(oracle, dtype=float)
    if encoded.shape != oracle.shape or encoded.shape != (grid.size,):
        raise ValueError("landscapes must both have one value per design index")
    return LandscapeTable(np.arange(grid.size), grid.all_decoded(), encoded, oracle, sense)
