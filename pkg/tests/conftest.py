import warnings

import numpy as np
import pytest

from qpdeopt import apps, objective, odesolver, oracle


def random_circuit(rng, q, n_gates):
    from qpdeopt import qcore
    from scipy.stats import unitary_group

    gates = []
    for _ in range(n_gates):
        k = int(rng.integers(1, min(q, 2) + 1))
        qubits = rng.permutation(q)
        targets = tuple(int(t) for t in qubits[:k])
        rest = qubits[k:]
        nc = int(rng.integers(0, len(rest) + 1))
        controls = tuple(int(c) for c in rest[:nc])
        pol = tuple(int(p) for p in rng.integers(0, 2, nc))
        u = unitary_group.rvs(2**k, random_state=rng)
        gates.append(qcore.Gate(u, targets, controls, pol))
    return qcore.Circuit(q, tuple(gates))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def bs_problem():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return apps.build_black_scholes(apps.BlackScholesParams())


@pytest.fixture(scope="session")
def bs_run(bs_problem):
    """Full-circuit Black-Scholes landscape at the default parameters."""
    ode, spec, grid = bs_problem
    p = ode.meta["params"]
    quad = odesolver.lchs_quadrature(p.k_max, p.delta_k)
    u_for = odesolver.build_forward_oracle(ode, grid, quad, p.trotter_dt)
    enc = objective.build_objective_err(u_for, spec)
    f_enc = objective.extract_objective_diagonal(enc, grid)
    f_orc = oracle.oracle_objective(ode, spec, grid)
    return {"u_for": u_for, "enc": enc, "f_enc": f_enc, "f_orc": f_orc}


@pytest.fixture(scope="session")
def wave_problem():
    return apps.build_wave(apps.WaveParams())


@pytest.fixture(scope="session")
def wave_run(wave_problem):
    ode, spec, grid = wave_problem
    u_for = odesolver.hamiltonian_forward(ode, grid, 0.5)
    enc = objective.build_objective_quad(u_for, spec)
    f_enc = objective.extract_objective_diagonal(enc, grid)
    f_orc = oracle.oracle_objective(ode, spec, grid)
    return {"u_for": u_for, "enc": enc, "f_enc": f_enc, "f_orc": f_orc}


def run_cmd_optimize(problem, out, **extra):
    from qpdeopt import cli

    raw = {"problem": problem, **extra}
    cfg = cli.parse_config(raw)
    out.mkdir(parents=True, exist_ok=True)
    return cli.cmd_optimize(cfg, out)


@pytest.fixture(scope="session")
def bs_optimize(tmp_path_factory):
    out = tmp_path_factory.mktemp("bs_opt")
    result = run_cmd_optimize("black_scholes", out, qhd={"delta_s_factor": 0.01, "n_steps": 1000})
    return out, result


@pytest.fixture(scope="session")
def wave_optimize(tmp_path_factory):
    out = tmp_path_factory.mktemp("wave_opt")
    result = run_cmd_optimize("wave", out, qhd={"delta_s_factor": 0.1, "n_steps": 100, "seed": 11})
    return out, result
