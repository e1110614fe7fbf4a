import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from config import OperatorSpec
from models import (
    FLAG_CONSTANT_TO_CONSTANT,
    FLAG_LIPSCHITZ_TO_LIPSCHITZ,
    DomainError,
    PreconditionError,
    ResolutionSet,
    SerializationError,
)
from operator_model import (
    KIND_IDENTITY,
    build_operator,
    build_operator_pair,
    check_self_adjoint,
    discretize,
    load_matrix_csv,
    make_constant_op,
    make_copies_graphing,
    make_finite_matrix_op,
    make_graphon_op,
    make_hypercube_op,
    make_identity_op,
    make_kernel,
    make_shift_graphing,
    make_whp_shift_graphing,
    op_add,
    op_after_rho,
    op_compose,
    op_power,
    op_scale,
)
from signal_model import (
    ANALYTIC,
    PIECEWISE_CONSTANT,
    FiniteSignal,
    Signal,
    _evaluate_raw,
    constant_signal,
    evaluate,
    extend_pc,
    indicator_signal,
    inner_product,
    lipschitz_estimate,
    restrict,
    sample_lipschitz_tuple,
)


def _pc(values) -> Signal:
    values = np.asarray(values, dtype=float)
    return Signal(PIECEWISE_CONSTANT, n=values.size, values=values, range_bound=float(np.max(np.abs(values))))


def _as_analytic(f: Signal) -> Signal:
    return Signal(ANALYTIC, evaluator=lambda x: _evaluate_raw(f, x), range_bound=f.range_bound)


def _probes(n: int, per_cell: int = 8) -> np.ndarray:
    offsets = (np.arange(per_cell) + 0.3) / per_cell
    return ((np.arange(n)[:, None] + offsets[None, :]) / n).reshape(-1)


# ---------- Graphony ----------

def test_constant_kernel_graphon():
    A = make_graphon_op(make_kernel("constant", w=0.5))
    out = A(constant_signal(0.8))
    assert np.allclose(evaluate(out, np.linspace(0, 1, 9)), 0.4), "W=w maps c to w*c"


def test_product_kernel_graphon():
    A = make_graphon_op(make_kernel("product"))
    out = A(constant_signal(1.0))
    assert evaluate(out, 0.5) == pytest.approx(0.25), "∫ x*y dy = x/2"
    assert evaluate(out, 1.0) == pytest.approx(0.5)
    assert A.constants.C_A == 1.0
    assert A.constants.has(FLAG_LIPSCHITZ_TO_LIPSCHITZ)
    assert A.constants.resolution_set.is_all


def test_graphon_output_lipschitz_for_unit_l1_input():
    A = make_graphon_op(make_kernel("min-kernel"))
    for f in sample_lipschitz_tuple(4, 2.0, 5):
        assert lipschitz_estimate(A(f)) <= 1.01, "min-kernel is 1-Lipschitz and |f| <= 1"


def test_steep_kernel_loses_lipschitz_flag():
    steep = make_kernel("gaussian-bump", sigma=0.2)
    assert not make_graphon_op(steep).constants.has(FLAG_LIPSCHITZ_TO_LIPSCHITZ), "3.03 > C_v=1"
    assert make_graphon_op(steep, C_v=4.0).constants.has(FLAG_LIPSCHITZ_TO_LIPSCHITZ)


def test_graphon_rejects_asymmetric_kernel():
    with pytest.raises(PreconditionError):
        make_graphon_op(lambda x, y: x + 0.0 * y)


def test_unknown_kernel():
    with pytest.raises(PreconditionError):
        make_kernel("laplace")


# ---------- Grafingi ----------

def test_shift_graphing():
    A = make_shift_graphing(0.25)
    assert np.allclose(evaluate(A(constant_signal(0.3)), np.linspace(0, 1, 5)), 0.6)
    f = _pc([0.0, 0.0, 1.0, 0.0])
    assert evaluate(A(f), 0.6) == 0.0, "f(0.85) + f(0.35) with f = 1 on (0.5, 0.75]"
    B = make_shift_graphing(0.25, normalize=True)
    assert B(f).range_bound <= 1.0
    assert B.constants.C_A == 1.0 and not B.constants.assumption_flags


def test_whp_shift_variants():
    lip = make_whp_shift_graphing(4, "lipschitz")
    const = make_whp_shift_graphing(4, "constant")
    assert lip.constants.C_A == 1.0, "lipschitz variant is normalised"
    assert const.constants.C_A == 2.0
    with pytest.raises(PreconditionError):
        make_whp_shift_graphing(4, "exact")


def test_copies_graphing_doubles_coarse_pieces():
    A = make_copies_graphing(4)
    out = A(_pc([0.3, -0.7]))
    vals = evaluate(out, _probes(2, 16)).reshape(2, 16)
    assert np.allclose(vals, [[0.6] * 16, [-1.4] * 16]), "each cell value doubles"
    assert A.constants.resolution_set == ResolutionSet.of([1, 2, 4])


def test_copies_graphing_analytic_path_stays_in_cell():
    A = make_copies_graphing(4)
    f = _as_analytic(_pc([0.3, -0.7]))
    vals = evaluate(A(f), _probes(2, 16)).reshape(2, 16)
    assert np.allclose(vals, [[0.6] * 16, [-1.4] * 16])


# ---------- Hiperkostka ----------

def test_hypercube_two_digits():
    A = make_hypercube_op(2)
    out = A(_pc([1.0, 2.0, 3.0, 4.0]))
    assert out.representation == PIECEWISE_CONSTANT
    assert out.values[0] == pytest.approx((2.0 + 3.0) / 2.0), "cell 00 averages cells 01 and 10"
    assert np.allclose(A(constant_signal(0.7)).values, 0.7)


@given(seed=st.integers(0, 10_000), r=st.integers(1, 6))
@settings(max_examples=20, deadline=None)
def test_hypercube_exact_path_matches_digit_flips(seed, r):
    A = make_hypercube_op(8)
    n = 2 ** r
    f = _pc(np.random.default_rng(seed).uniform(-1, 1, n))
    exact = _evaluate_raw(A(f), _probes(n))
    flipped = _evaluate_raw(A(_as_analytic(f)), _probes(n))
    assert np.allclose(exact, flipped, atol=1e-12)


def test_hypercube_colour_multiset_formula():
    N, r = 5, 3
    A = make_hypercube_op(N)
    values = np.random.default_rng(1).uniform(-1, 1, 2 ** r)
    out = A(_pc(values)).values
    for u in range(2 ** r):
        neighbours = sum(values[u ^ (1 << (r - i))] for i in range(1, r + 1))
        assert out[u] == pytest.approx((neighbours + (N - r) * values[u]) / N)


@pytest.mark.parametrize("N", [0, 41])
def test_hypercube_dimension_range(N):
    with pytest.raises(PreconditionError):
        make_hypercube_op(N)


# ---------- Macierze ----------

def test_finite_matrix_op():
    n = 4
    assert np.allclose(make_finite_matrix_op(n * np.eye(n))(FiniteSignal.of([1, 2, 3, 4])).values, [1, 2, 3, 4])
    assert np.allclose(make_finite_matrix_op(np.zeros((n, n)))(FiniteSignal.of([1, 2, 3, 4])).values, 0.0)
    cycle = n * np.array([[0, 1, 0, 1], [1, 0, 1, 0], [0, 1, 0, 1], [1, 0, 1, 0]], dtype=float)
    A = make_finite_matrix_op(cycle)
    assert np.allclose(A(indicator_signal(4, [1])).values, [0, 1, 0, 1])
    assert A.constants.C_A == pytest.approx(2.0)


def test_finite_matrix_asymmetry():
    M = np.zeros((3, 3))
    M[0, 1] = 0.5
    with pytest.raises(PreconditionError):
        make_finite_matrix_op(M)
    A = make_finite_matrix_op(M, check_symmetry=False)
    assert not A.is_self_adjoint
    report = check_self_adjoint(A, trials=10, tol=1e-12)
    assert not report.passed
    assert report.measured >= 0.5 / 9, "indicator pair (1,2) exposes the gap weighted by 1/n"
    assert report.witness is not None


def test_symmetric_matrix_self_adjoint():
    M = np.random.default_rng(3).normal(size=(6, 6))
    report = check_self_adjoint(make_finite_matrix_op(M + M.T), trials=50, tol=1e-12)
    assert report.passed, f"symmetric matrix failed self-adjointness: {report.measured}"


def test_load_matrix_csv(tmp_path):
    path = tmp_path / "m.csv"
    path.write_text("2\n0,1\n1,0\n")
    assert np.array_equal(load_matrix_csv(path), [[0.0, 1.0], [1.0, 0.0]])
    bad = tmp_path / "bad.csv"
    bad.write_text("3\n0,1\n1,0\n")
    with pytest.raises(SerializationError):
        load_matrix_csv(bad)


# ---------- Dyskretyzacja ----------

def test_discretize_constant_graphon():
    A_m = discretize(make_graphon_op(make_kernel("constant", w=0.5)), 6)
    assert np.allclose(A_m(FiniteSignal.of([0.8] * 6)).values, 0.4)


def test_discretize_hypercube_is_exact():
    A = make_hypercube_op(3)
    X = FiniteSignal(8, np.random.default_rng(4).uniform(-1, 1, 8))
    out = discretize(A, 8)(X).values
    for u in range(8):
        expected = sum(X.values[u ^ (1 << (3 - i))] for i in range(1, 4)) / 3
        assert out[u] == pytest.approx(expected, abs=1e-15)


def test_discretize_keeps_lineage_and_constants():
    A = make_hypercube_op(4)
    A_8 = discretize(A, 8)
    assert A_8.root_key == A.root_key
    assert A_8.constants is A.constants
    assert A_8.domain == 8 and A_8.is_self_adjoint
    with pytest.raises(DomainError):
        discretize(A_8, 4)
    with pytest.raises(DomainError):
        A_8(FiniteSignal.of([1.0] * 4))
    with pytest.raises(DomainError):
        A(FiniteSignal.of([1.0] * 4))


def test_discretize_is_linear():
    A_m = discretize(make_hypercube_op(5), 16)
    rng = np.random.default_rng(5)
    X, Y = FiniteSignal(16, rng.uniform(-1, 1, 16)), FiniteSignal(16, rng.uniform(-1, 1, 16))
    lhs = A_m(FiniteSignal(16, 0.3 * X.values - 2.0 * Y.values)).values
    rhs = 0.3 * A_m(X).values - 2.0 * A_m(Y).values
    assert np.allclose(lhs, rhs, atol=1e-9)


@pytest.mark.parametrize("n", [8, 32])
def test_discretized_hypercube_self_adjoint(n):
    report = check_self_adjoint(discretize(make_hypercube_op(6), n), trials=100, tol=1e-9)
    assert report.passed, f"n={n}: asymmetry {report.measured}"


def test_discretized_graphon_self_adjoint():
    A = make_graphon_op(make_kernel("gaussian-bump", sigma=0.3))
    report = check_self_adjoint(discretize(A, 16), trials=10, tol=1e-9)
    assert report.passed, f"asymmetry {report.measured}"


def test_matrix_realisation_of_discretization():
    A_8 = discretize(make_hypercube_op(3), 8)
    T = A_8.matrix()
    assert T.shape == (8, 8)
    assert np.allclose(T, T.T)
    assert np.allclose(T.sum(axis=1), 1.0), "normalised adjacency averages"
    with pytest.raises(DomainError):
        make_hypercube_op(3).matrix()


# ---------- Algebra ----------

def test_algebra_constant_propagation():
    A = op_scale(2.0, make_identity_op())
    B = op_scale(3.0, make_identity_op())
    assert op_add(A, B).constants.C_A == pytest.approx(5.0)
    assert op_compose(B, A).constants.C_A == pytest.approx(6.0)
    assert op_power(A, 3).constants.C_A == pytest.approx(8.0)
    assert op_after_rho(np.tanh, A).constants.C_A == pytest.approx(2.0)


def test_scale_by_zero():
    Z = op_scale(0.0, make_hypercube_op(3))
    assert Z.constants.C_A == 0.0
    assert np.allclose(Z(constant_signal(0.5)).values, 0.0)


def test_power_zero_and_one():
    A = make_hypercube_op(3)
    assert op_power(A, 0).kind == KIND_IDENTITY
    assert op_power(A, 1) is A
    for seed in range(10):
        f = sample_lipschitz_tuple(1, 1.0, seed)[0]
        xs = np.linspace(0, 1, 33)
        assert np.allclose(evaluate(op_power(A, 1)(f), xs), evaluate(A(f), xs))


def test_power_two_of_hypercube():
    A = make_hypercube_op(2)
    f = _pc([1.0, 0.0, 0.0, 0.0])
    assert np.allclose(op_power(A, 2)(f).values, A(A(f)).values)


def test_resolution_sets_intersect():
    A = make_hypercube_op(3)
    B = make_copies_graphing(4)
    C = op_add(A, B)
    assert C.constants.resolution_set == ResolutionSet.of([2, 4])
    assert C.constants.has(FLAG_CONSTANT_TO_CONSTANT)


def test_empty_intersection_drops_flags():
    C = op_add(make_hypercube_op(2), make_copies_graphing(3))
    assert C.constants.resolution_set.is_empty()
    assert not C.constants.assumption_flags


def test_algebra_space_mismatch():
    with pytest.raises(DomainError):
        op_add(make_identity_op(), make_identity_op(4))


def test_constant_operator():
    A = make_constant_op(1.0)
    assert not A.is_linear
    assert A.constants.C_A == 0.0
    assert evaluate(A(constant_signal(-0.2)), 0.4) == 1.0
    assert np.allclose(make_constant_op(1.0, domain=3)(FiniteSignal.of([0, 0, 0])).values, 1.0)


# ---------- Konfiguracja ----------

def test_build_operator_from_spec():
    A = build_operator(OperatorSpec(kind="hypercube", N=6))
    assert A.name == "hypercube[N=6]"
    G = build_operator(OperatorSpec(kind="graphon", kernel="gaussian-bump", kernel_params={"sigma": 0.5}))
    assert G.constants.C_A == 1.0


def test_build_operator_pair_shares_lineage():
    spec = OperatorSpec(kind="hypercube", N=6)
    A, B = build_operator_pair(spec, OperatorSpec(kind="hypercube", N=6, discretize=64))
    assert A.domain is None and B.domain == 64
    assert A.root_key == B.root_key
    same_a, same_b = build_operator_pair(spec, spec)
    assert same_a is same_b
    C, D = build_operator_pair(spec, OperatorSpec(kind="hypercube", N=5))
    assert C.root_key != D.root_key


def test_restrict_of_discretized_constant_matches():
    A = make_hypercube_op(4)
    c = constant_signal(0.25)
    assert np.allclose(discretize(A, 8)(restrict(c, 8)).values, restrict(A(c), 8).values)


def test_inner_product_of_hypercube_symmetric_on_continuum():
    A = make_hypercube_op(5)
    f, g = sample_lipschitz_tuple(2, 2.0, 9)
    assert inner_product(A(f), g) == pytest.approx(inner_product(f, A(g)), abs=1e-12)


def test_extend_pc_through_discretization():
    A = make_copies_graphing(6)
    X = FiniteSignal.of([0.1, -0.2, 0.3])
    assert np.allclose(discretize(A, 3)(X).values, 2.0 * X.values)
    assert np.allclose(A(extend_pc(X)).values, 2.0 * X.values)
