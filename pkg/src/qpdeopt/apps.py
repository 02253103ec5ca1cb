"""Problem builders: Black-Scholes volatility calibration and wave material design."""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.special import ndtr

from . import blockenc
from .blockenc import NEUMANN_RIGHT, BandOperatorSpec, ProjectorPattern
from .objective import MAXIMIZE, MINIMIZE, ObjectiveSpec
from .odesolver import DesignGrid, OdeFamily


class Problem(NamedTuple):
    ode: OdeFamily
    objective: ObjectiveSpec
    grid: DesignGrid


@dataclass(frozen=True)
class BlackScholesParams:
    T: float = 1.0
    r: float = 0.02
    K: float = 30.0
    sigma_min: float = 0.01
    sigma_max: float = 0.5
    x_min: float = float(np.log(1e-4))
    x_max: float = float(np.log(300.0))
    n: int = 6
    m: int = 4
    sigma_data: float = 0.3
    k_max: float = 64.0
    delta_k: float = 0.5
    trotter_dt: float = 0.02
    psd_tol: float = 0.05

    def __post_init__(self):
        if not self.x_min < np.log(self.K) < self.x_max:
            raise ValueError("need x_min < ln(K) < x_max")
        if not 0 < self.sigma_min <= self.sigma_max:
            raise ValueError("need 0 < sigma_min <= sigma_max")
        if self.T <= 0 or self.n < 2 or self.m < 1:
            raise ValueError("need T > 0, n >= 2, m >= 1")


@dataclass(frozen=True)
class WaveParams:
    W: float = 31.0
    T: float = 48.0
    c1: float = 1.0
    c2: float = 0.25
    n_grid: int = 5
    m: int = 3
    trotter_dt: float = 0.5

    def __post_init__(self):
        if not self.c1 > self.c2 > 0:
            raise ValueError("need c1 > c2 > 0")
        if self.n_grid < 2 or self.m < 1 or self.W <= 0 or self.T <= 0:
            raise ValueError("need n_grid >= 2, m >= 1, W > 0, T > 0")


def bs_call_price(X, tau, p: BlackScholesParams, sigma: float):
    """European call value at spot X and time tau (maturity at p.T)."""
    X = np.asarray(X, dtype=float)
    rem = p.T - tau
    if rem <= 0:
        raise ValueError("tau must be earlier than maturity")
    disc = p.K * np.exp(-p.r * rem)
    with np.errstate(divide="ignore", invalid="ignore"):
        vol = sigma * np.sqrt(rem)
        y1 = (np.log(X / p.K) + (p.r + sigma**2 / 2) * rem) / vol
        y2 = y1 - vol
        if sigma == 0:
            # deterministic forward: in the money iff X > K e^{-r rem}
            itm = X > disc
            y1 = np.where(itm, np.inf, -np.inf)
            y2 = y1
        price = X * ndtr(y1) - disc * ndtr(y2)
    return price


def bs_grid(p: BlackScholesParams) -> tuple[np.ndarray, float]:
    x = np.linspace(p.x_min, p.x_max, 2**p.n)
    return x, float(x[1] - x[0])


def bs_operators(p: BlackScholesParams) -> tuple[np.ndarray, np.ndarray, list[BandOperatorSpec]]:
    """Laplacian and central difference with Dirichlet left / Neumann right.

    Returns (L, D, [spec_L, spec_D]); D = -i * B(1/2h, 0, pi/2).
    """
    _, h = bs_grid(p)
    spec_l = BandOperatorSpec(1 / h**2, -2 / h**2, 0.0, p.n, NEUMANN_RIGHT)
    spec_d = BandOperatorSpec(1 / (2 * h), 0.0, np.pi / 2, p.n, NEUMANN_RIGHT)
    L = blockenc.band_matrix(spec_l).real
    D = (-1j * blockenc.band_matrix(spec_d)).real
    return L, D, [spec_l, spec_d]


def build_black_scholes(p: BlackScholesParams = BlackScholesParams()) -> Problem:
    """du/dt = -A(xi) u in log-price with sigma^2 = (smax^2 - smin^2) xi + smin^2.

    u = V - e^x so the left boundary is homogeneous Dirichlet and the right is
    homogeneous Neumann.
    """
    x, h = bs_grid(p)
    N = x.size
    L, D, (spec_l, spec_d) = bs_operators(p)
    I = np.eye(N)
    s0 = p.sigma_min**2
    ds = p.sigma_max**2 - s0
    A0 = -((p.r - s0 / 2) * D + (s0 / 2) * L - p.r * I)
    A1 = -(ds / 2) * (L - D)

    be_l = blockenc.build_band_operator(spec_l)
    be_d = blockenc.build_band_operator(spec_d)
    be_i = blockenc.build_band_operator(BandOperatorSpec(0.0, 1.0, 0.0, p.n))
    # D = -i B_d, so -c D = i c B_d
    enc0 = blockenc.lcu_combine([be_d, be_l, be_i], [1j * (p.r - s0 / 2), -s0 / 2, p.r])
    if ds > 0:
        enc1 = blockenc.lcu_combine([be_l, be_d], [-ds / 2, -1j * ds / 2])
    else:
        # zero matrix as (I - I)/2
        enc1 = blockenc.lcu_combine([be_i, be_i], [0.5, -0.5])

    u0 = np.maximum(np.exp(x) - p.K, 0.0) - np.exp(x)
    u0_norm = float(np.linalg.norm(u0))
    j_ref = int(np.argmin(np.abs(x - np.log(p.K * np.exp(-p.r)))))
    x_ref = x[j_ref]
    u_ref = (float(bs_call_price(np.exp(x_ref), 0.0, p, p.sigma_data)) - np.exp(x_ref)) / u0_norm
    ref = np.zeros(N, dtype=complex)
    ref[j_ref] = np.sign(u_ref) if u_ref != 0 else 1.0

    grid = DesignGrid(1, p.m, (s0,), (p.sigma_max**2,))
    meta = {"x": x, "h": h, "j_ref": j_ref, "x_ref": float(x_ref), "u_ref": u_ref, "params": p}
    ode = OdeFamily(A0, (A1,), u0 / u0_norm, p.T, u0_norm, (enc0, enc1), p.psd_tol, "lchs", meta)
    lmin = ode.min_real_eigenvalue(grid)
    meta["min_real_eigenvalue"] = lmin
    if lmin < -1e-9:
        if lmin < -p.psd_tol:
            raise ValueError(f"Re(A) has eigenvalue {lmin:.4e} below the tolerance {-p.psd_tol}")
        warnings.warn(f"Re(A) is not positive semidefinite (smallest eigenvalue {lmin:.4e}); proceeding", RuntimeWarning, stacklevel=2)
    spec = ObjectiveSpec("err", ProjectorPattern.from_index(p.n, j_ref), ref, abs(u_ref), MINIMIZE)
    return Problem(ode, spec, grid)


def wave_grid(p: WaveParams) -> tuple[np.ndarray, float]:
    N = 2**p.n_grid
    h = p.W / (N - 1)
    return h * np.arange(N), h


def wave_speed(p: WaveParams, xi: tuple[float, float]) -> np.ndarray:
    x, _ = wave_grid(p)
    W = p.W
    c = np.full(x.size, p.c2)
    c[x <= W / 4] = p.c1
    c[(x > W / 4) & (x <= W / 2)] = p.c2 + (p.c1 - p.c2) * xi[0]
    c[(x > W / 2) & (x <= 3 * W / 4)] = p.c2 + (p.c1 - p.c2) * xi[1]
    return c


def wave_generator(C: np.ndarray, h: float) -> np.ndarray:
    """-[[0, C D-], [D+ C, 0]] for diagonal C.

    D+ is the forward difference with u_N = 0, D- the backward difference with
    u_{-1} = 0; D-^T = -D+, so the result is real antisymmetric.
    """
    N = C.shape[0]
    Dp = (np.eye(N, k=1) - np.eye(N)) / h
    Dm = (np.eye(N) - np.eye(N, k=-1)) / h
    Z = np.zeros((N, N))
    return -np.block([[Z, C @ Dm], [Dp @ C, Z]])


def build_wave(p: WaveParams = WaveParams()) -> Problem:
    if not region_pattern_matches(p):
        raise ValueError("region boundaries do not align with grid quarters")
    x, h = wave_grid(p)
    N = x.size
    W = p.W
    dc = p.c1 - p.c2
    regions = [x <= W / 4, (x > W / 4) & (x <= W / 2), (x > W / 2) & (x <= 3 * W / 4)]
    C0, C1, C2 = (np.diag(dc * r.astype(float)) for r in regions)
    A0 = wave_generator(p.c2 * np.eye(N) + C0, h)
    A1 = wave_generator(C1, h)
    A2 = wave_generator(C2, h)
    for a in (A0, A1, A2):
        if np.max(np.abs(a + a.T)) > 1e-10:
            raise ValueError("wave generator is not anti-Hermitian")
    v0 = np.where(x < 4, np.exp(-x**2 / 8), 0.0)
    c_init = wave_speed(p, (0.0, 0.0))
    u0 = np.concatenate([v0 / c_init, np.zeros(N)])
    u0_norm = float(np.linalg.norm(u0))
    # objective region: x > 3W/4 on both components
    sel = ProjectorPattern(tuple("I" * (p.n_grid - 2) + "11" + "I"))
    grid = DesignGrid(2, p.m)
    meta = {"x": x, "h": h, "regions": regions, "params": p}
    ode = OdeFamily(A0, (A1, A2), u0 / u0_norm, p.T, u0_norm, None, 1e-9, "hamiltonian", meta)
    return Problem(ode, ObjectiveSpec("quad", sel, None, 0.0, MAXIMIZE), grid)


def region_pattern_matches(p: WaveParams) -> bool:
    """True when x > 3W/4 is exactly the top spatial quarter."""
    x, _ = wave_grid(p)
    quarter = (np.arange(x.size) >> (p.n_grid - 2)) == 3
    return bool(np.array_equal(quarter, x > 3 * p.W / 4))
