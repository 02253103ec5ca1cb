import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qpdeopt import apps, blockenc, qcore
from qpdeopt.blockenc import (
    DIRICHLET,
    NEUMANN_RIGHT,
    BandOperatorSpec,
    BlockEncoding,
    PiecewiseDiagonalSpec,
    ProjectorPattern,
    extract_block,
)
from qpdeopt.qcore import Circuit


def cyclic_plus(n):
    N = 2**n
    P = np.zeros((N, N))
    for j in range(N):
        P[(j + 1) % N, j] = 1
    return P


def band_oracle(a1, a2, phi, n, boundary):
    """Direct entrywise assembly of the band operator."""
    N = 2**n
    B = np.zeros((N, N), dtype=complex)
    for j in range(N):
        B[j, j] = a2
        if j + 1 < N:
            B[j, j + 1] = a1 * np.exp(1j * phi)
            B[j + 1, j] = a1 * np.exp(-1j * phi)
    if boundary == NEUMANN_RIGHT:
        B[N - 1, N - 1] += a1 * np.exp(1j * phi)
    return B


def unitary_ok(circ):
    m = qcore.circuit_to_matrix(circ)
    return np.max(np.abs(m.conj().T @ m - np.eye(m.shape[0]))) <= 1e-9


def test_shift_n2_wrap():
    m = qcore.circuit_to_matrix(blockenc.build_shift(2, "plus"))
    assert m[2, 1] == 1 and m[0, 3] == 1


def test_shift_n1_is_x():
    assert np.array_equal(qcore.circuit_to_matrix(blockenc.build_shift(1, "plus")), qcore.X)


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_shift_cyclic(n):
    P = cyclic_plus(n)
    assert np.array_equal(qcore.circuit_to_matrix(blockenc.build_shift(n, "plus")).real, P)
    assert np.array_equal(qcore.circuit_to_matrix(blockenc.build_shift(n, "minus")).real, P.T)


def test_ghz_examples():
    g1 = qcore.circuit_to_matrix(blockenc.build_ghz_preparer(1, 0.0))
    assert np.allclose(g1, qcore.H, atol=1e-15)
    g2 = qcore.circuit_to_matrix(blockenc.build_ghz_preparer(2, 0.0))
    assert np.allclose(g2[:, 0], [2**-0.5, 0, 0, 2**-0.5], atol=1e-15)


def test_ghz_n3_columns():
    g = qcore.circuit_to_matrix(blockenc.build_ghz_preparer(3, np.pi / 2))
    t0 = np.zeros(8, dtype=complex)
    t1 = np.zeros(8, dtype=complex)
    # columns |0...0> and |10..0> (top qubit set) map to (|0..0> +- e^{i phi}|1..1>)/sqrt2
    t0[0], t0[7] = 2**-0.5, 1j * 2**-0.5
    t1[0], t1[7] = 2**-0.5, -1j * 2**-0.5
    assert np.max(np.abs(g[:, 0] - t0)) <= 1e-12
    assert np.max(np.abs(g[:, 4] - t1)) <= 1e-12


def test_laplacian_example():
    h = 0.25
    be = blockenc.build_band_operator(BandOperatorSpec(1 / h**2, -2 / h**2, 0.0, 2))
    lap = (np.eye(4, k=1) + np.eye(4, k=-1) - 2 * np.eye(4)) / h**2
    assert np.max(np.abs(be.matrix() - lap)) <= 1e-10
    assert be.alpha == 3 / h**2 + 2 / h**2


def test_central_difference_example():
    h = 0.2
    be = blockenc.build_band_operator(BandOperatorSpec(1 / (2 * h), 0.0, np.pi / 2, 3))
    cd = (np.eye(8, k=1) - np.eye(8, k=-1)) / (2 * h)
    assert np.max(np.abs(be.matrix() * np.exp(-1j * np.pi / 2) - cd)) <= 1e-10


def test_identity_only_band():
    be = blockenc.build_band_operator(BandOperatorSpec(0.0, 2.5, 0.0, 2))
    assert np.max(np.abs(be.matrix() - 2.5 * np.eye(4))) <= 1e-12
    assert be.alpha == 2.5


@pytest.mark.parametrize("boundary", [DIRICHLET, NEUMANN_RIGHT])
@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_band_exactness_random(boundary, n):
    rng = np.random.default_rng(100 + n)
    for _ in range(50):
        a1, a2 = rng.normal(size=2) * 3
        phi = rng.uniform(-np.pi, np.pi)
        spec = BandOperatorSpec(a1, a2, phi, n, boundary)
        be = blockenc.build_band_operator(spec)
        target = band_oracle(a1, a2, phi, n, boundary)
        blk = extract_block(be)
        assert np.max(np.abs(be.alpha * blk - target)) <= 1e-10
        if boundary == DIRICHLET:
            assert np.max(np.abs(blk - blk.conj().T)) <= 1e-10
        assert np.linalg.norm(blk, 2) <= 1 + 1e-9
        factor = 3 if boundary == DIRICHLET else 4
        assert be.alpha == pytest.approx(factor * abs(a1) + abs(a2), rel=1e-15)


def test_neumann_hermitian_for_real_phase():
    for phi in (0.0, np.pi):
        blk = extract_block(blockenc.build_band_operator(BandOperatorSpec(0.8, -0.3, phi, 3, NEUMANN_RIGHT)))
        assert np.max(np.abs(blk - blk.conj().T)) <= 1e-10


def test_band_circuits_unitary():
    for boundary in (DIRICHLET, NEUMANN_RIGHT):
        for n in (1, 2, 3):
            be = blockenc.build_band_operator(BandOperatorSpec(0.7, -1.3, 0.4, n, boundary))
            assert unitary_ok(be.circuit)


def test_band_matrix_helper_matches_oracle():
    spec = BandOperatorSpec(1.5, -0.5, 0.3, 3, NEUMANN_RIGHT)
    assert np.allclose(blockenc.band_matrix(spec), band_oracle(1.5, -0.5, 0.3, 3, NEUMANN_RIGHT))


def test_multidim_single_axis():
    spec = BandOperatorSpec(1.0, -2.0, 0.0, 2)
    a = blockenc.build_multidim_band([spec])
    b = blockenc.build_band_operator(spec)
    assert a.alpha == b.alpha
    assert np.max(np.abs(a.matrix() - b.matrix())) <= 1e-12


def test_multidim_kronecker_sum():
    specs = [BandOperatorSpec(1.0, -2.0, 0.0, 2), BandOperatorSpec(2.0, -4.0, 0.0, 2)]
    be = blockenc.build_multidim_band(specs)
    L1 = band_oracle(1.0, -2.0, 0.0, 2, DIRICHLET)
    L2 = band_oracle(2.0, -4.0, 0.0, 2, DIRICHLET)
    # axis 0 on the low qubits: kron(I, L1) + kron(L2, I)
    target = np.kron(np.eye(4), L1) + np.kron(L2, np.eye(4))
    assert np.max(np.abs(be.matrix() - target)) <= 1e-10
    assert be.alpha == 15
    assert unitary_ok(be.circuit)


def test_piecewise_identity():
    be = blockenc.build_piecewise_diagonal(PiecewiseDiagonalSpec(((1.7, ProjectorPattern.identity(2)),)), 2)
    assert np.max(np.abs(be.matrix() - 1.7 * np.eye(4))) <= 1e-12


def test_piecewise_projector():
    spec = PiecewiseDiagonalSpec(((1.0, ProjectorPattern(("I", "1"))),))
    be = blockenc.build_piecewise_diagonal(spec, 2)
    assert np.max(np.abs(be.matrix() - np.diag([0, 0, 1, 1]))) <= 1e-12


def test_piecewise_wave_speed_region():
    p = apps.WaveParams()
    x, _ = apps.wave_grid(p)
    n = p.n_grid
    # C1 region W/4 < x <= W/2 is the second quarter: top bits (1, 0)
    pat = ProjectorPattern(tuple("I" * (n - 2) + "10"))
    spec = PiecewiseDiagonalSpec(((p.c1 - p.c2, pat),))
    be = blockenc.build_piecewise_diagonal(spec, n)
    expect = np.array([(p.c1 - p.c2) if (p.W / 4 < xi <= p.W / 2) else 0.0 for xi in x])
    assert np.max(np.abs(np.diag(be.matrix()) - expect)) <= 1e-10
    assert np.max(np.abs(be.matrix() - np.diag(expect))) <= 1e-10


def test_piecewise_alpha_and_several_terms():
    rng = np.random.default_rng(5)
    for n in (1, 2, 3, 4):
        terms = []
        for _ in range(3):
            pat = ProjectorPattern(tuple(rng.choice(["0", "1", "I"], n)))
            terms.append((float(rng.normal()), pat))
        spec = PiecewiseDiagonalSpec(tuple(terms))
        be = blockenc.build_piecewise_diagonal(spec, n)
        assert np.max(np.abs(be.matrix() - np.diag(blockenc.piecewise_diagonal(spec, n)))) <= 1e-10
        assert be.alpha == pytest.approx(sum(abs(a) for a, _ in terms), rel=1e-14)
        assert unitary_ok(be.circuit)


def test_lcu_single_term():
    be = blockenc.build_band_operator(BandOperatorSpec(1.0, 0.5, 0.2, 2))
    c = blockenc.lcu_combine([be], [1.0])
    assert c.alpha == pytest.approx(be.alpha)
    assert np.max(np.abs(c.matrix() - be.matrix())) <= 1e-12


def test_lcu_duplicate_terms():
    x = BlockEncoding(Circuit(1, (qcore.gate(qcore.X, 0, "X"),)), 1.0, (0,), ())
    c = blockenc.lcu_combine([x, x], [0.5, 0.5])
    assert np.max(np.abs(c.matrix() - qcore.X)) <= 1e-12
    c2 = blockenc.lcu_combine([x, x], [1.5, 1.5])
    assert np.max(np.abs(c2.matrix() - 3.0 * qcore.X)) <= 1e-12


def test_lcu_black_scholes_A0(bs_problem):
    ode = bs_problem.ode
    assert np.max(np.abs(ode.encodings[0].matrix() - ode.A0)) <= 1e-9
    assert np.max(np.abs(ode.encodings[1].matrix() - ode.A_terms[0])) <= 1e-9


def test_extract_identity():
    be = BlockEncoding(Circuit(2), 1.0, (0, 1), ())
    assert np.array_equal(extract_block(be), np.eye(4))


def test_extract_laplacian_tridiagonal():
    be = blockenc.build_band_operator(BandOperatorSpec(1.0, -2.0, 0.0, 2))
    lap = np.eye(4, k=1) + np.eye(4, k=-1) - 2 * np.eye(4)
    assert np.max(np.abs(extract_block(be) - lap / be.alpha)) <= 1e-12


def test_partition_enforced():
    with pytest.raises(ValueError):
        BlockEncoding(Circuit(2), 1.0, (0,), ())


def test_projector_pattern():
    p = ProjectorPattern.from_index(3, 5)
    assert p.entries == ("1", "0", "1")
    d = p.diagonal()
    assert set(np.unique(d)) <= {0.0, 1.0} and d[5] == 1 and d.sum() == 1
    with pytest.raises(ValueError):
        ProjectorPattern(("2",))


@settings(max_examples=30, deadline=None)
@given(
    a1=st.floats(-5, 5), a2=st.floats(-5, 5), phi=st.floats(-np.pi, np.pi),
    n=st.integers(1, 3), neumann=st.booleans(),
)
def test_band_property(a1, a2, phi, n, neumann):
    if a1 == 0 and a2 == 0:
        a2 = 1.0
    boundary = NEUMANN_RIGHT if neumann else DIRICHLET
    be = blockenc.build_band_operator(BandOperatorSpec(a1, a2, phi, n, boundary))
    assert np.max(np.abs(be.matrix() - band_oracle(a1, a2, phi, n, boundary))) <= 1e-10 * max(1, be.alpha)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_lcu_linearity(seed):
    rng = np.random.default_rng(seed)
    b1 = blockenc.build_band_operator(BandOperatorSpec(*rng.normal(size=2), rng.uniform(0, 6), 2))
    b2 = blockenc.build_band_operator(BandOperatorSpec(*rng.normal(size=2), rng.uniform(0, 6), 2, NEUMANN_RIGHT))
    c1, c2 = rng.normal(size=2) + 1j * rng.normal(size=2)
    c = blockenc.lcu_combine([b1, b2], [c1, c2])
    assert np.max(np.abs(c.matrix() - (c1 * b1.matrix() + c2 * b2.matrix()))) <= 1e-9
    assert np.linalg.norm(extract_block(c), 2) <= 1 + 1e-9
