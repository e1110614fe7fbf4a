import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bounds_model import check_lipschitz_map
from gnn_model import (
    GnnParams,
    composite_lipschitz_constant,
    finite_gnn_forward,
    gnn_as_operator,
    gnn_forward,
    gnn_params_to_json,
    gnn_signal_gap,
    graphop_conv,
    load_gnn_params,
    random_gnn_params,
)
from models import DomainError, ParameterNormalizationError, PreconditionError, SerializationError
from operator_model import discretize, make_hypercube_op
from signal_model import PIECEWISE_CONSTANT, FiniteSignal, Signal, constant_signal


def _params(*layers, K=None, activation="clip") -> GnnParams:
    h = [np.asarray(layer, dtype=float) for layer in layers]
    widths = [h[0].shape[1]] + [layer.shape[0] for layer in h]
    return GnnParams(len(h), tuple(widths), K or h[0].shape[2], tuple(h), activation)


def _indicator_cell_one() -> Signal:
    return Signal(PIECEWISE_CONSTANT, n=4, values=[1.0, 0.0, 0.0, 0.0], range_bound=1.0)


# ---------- Konwolucja ----------

def test_conv_identity_tap():
    A = make_hypercube_op(2)
    f = _indicator_cell_one()
    assert np.array_equal(graphop_conv([1.0], A)(f).values, f.values)
    assert np.array_equal(graphop_conv([1.0, 0.0, 0.0], A)(f).values, f.values), "trailing zero taps"


def test_conv_single_shift_equals_operator():
    A = make_hypercube_op(2)
    f = _indicator_cell_one()
    assert np.allclose(graphop_conv([0.0, 1.0], A)(f).values, A(f).values)


def test_conv_mixed_taps():
    out = graphop_conv([0.5, 0.5], make_hypercube_op(2))(_indicator_cell_one())
    assert np.allclose(out.values, [0.5, 0.25, 0.25, 0.0])


def test_conv_rejects_large_taps():
    with pytest.raises(ParameterNormalizationError):
        graphop_conv([1.5], make_hypercube_op(2))


def test_conv_on_discretization():
    A = make_hypercube_op(3)
    A_8 = discretize(A, 8)
    X = FiniteSignal(8, np.random.default_rng(0).uniform(-1, 1, 8))
    T = A_8.matrix()
    expected = 0.2 * X.values + 0.3 * T @ X.values - 0.1 * T @ T @ X.values
    assert np.allclose(graphop_conv([0.2, 0.3, -0.1], A_8)(X).values, expected)


# ---------- Sieć ----------

def test_identity_network():
    params = _params([[[1.0]]])
    f = _indicator_cell_one()
    (out,) = gnn_forward(params, make_hypercube_op(2), f)
    assert np.array_equal(out.values, f.values)


def test_zero_network():
    params = _params(np.zeros((2, 1, 3)), np.zeros((1, 2, 3)))
    (out,) = gnn_forward(params, make_hypercube_op(3), constant_signal(0.7))
    assert np.allclose(out.values, 0.0)


def test_constant_input_scalar_recursion():
    # hiperkostka przenosi stałe na te same stałe, więc sieć sprowadza się do rekurencji na liczbach
    params = _params([[[0.4, 0.9]]], [[[-0.6, 0.2]]], activation="tanh")
    (out,) = gnn_forward(params, make_hypercube_op(3), constant_signal(0.5))
    first = np.tanh(0.4 * 0.5 + 0.9 * 0.5)
    second = np.tanh(-0.6 * first + 0.2 * first)
    assert out.values[0] == pytest.approx(second)


def test_finite_forward_matches_operator_path():
    A = make_hypercube_op(5)
    params = random_gnn_params(2, (1, 3, 2), 3, seed=4)
    for n in (4, 8, 16):
        A_n = discretize(A, n)
        X = FiniteSignal(n, np.random.default_rng(n).uniform(-1, 1, n))
        via_operator = gnn_forward(params, A_n, X)
        via_matrix = finite_gnn_forward(params, A_n.matrix(), X.values)
        assert len(via_operator) == len(via_matrix) == 2
        for y, z in zip(via_operator, via_matrix):
            assert np.allclose(y.values, z, atol=1e-10), f"n={n}"


def test_finite_forward_permutation_equivariance():
    rng = np.random.default_rng(11)
    M = rng.uniform(0, 1, (6, 6))
    S = (M + M.T) / 6
    x = rng.uniform(-1, 1, 6)
    perm = rng.permutation(6)
    P = np.eye(6)[perm]
    params = random_gnn_params(2, (1, 2, 1), 3, activation="leaky-abs", seed=2)
    (base,) = finite_gnn_forward(params, S, x)
    (moved,) = finite_gnn_forward(params, P @ S @ P.T, P @ x)
    assert np.allclose(moved, P @ base)


@given(seed=st.integers(0, 100_000), hidden=st.integers(2, 4))
@settings(max_examples=20, deadline=None)
def test_hidden_feature_relabelling(seed, hidden):
    rng = np.random.default_rng(seed)
    params = random_gnn_params(2, (1, hidden, 1), 3, activation="tanh", seed=seed)
    perm = rng.permutation(hidden)
    relabelled = _params(params.h[0][perm], params.h[1][:, perm], activation="tanh")
    A_8 = discretize(make_hypercube_op(4), 8)
    X = FiniteSignal(8, rng.uniform(-1, 1, 8))
    (base,) = gnn_forward(params, A_8, X)
    (moved,) = gnn_forward(relabelled, A_8, X)
    assert np.allclose(base.values, moved.values, atol=1e-12), f"permutation {perm}"


def test_finite_forward_shape_mismatch():
    with pytest.raises(DomainError):
        finite_gnn_forward(_params([[[1.0]]]), np.eye(3), np.zeros(4))


def test_forward_rejects_foreign_signal():
    with pytest.raises(DomainError):
        gnn_forward(_params([[[1.0]]]), make_hypercube_op(2), FiniteSignal.of([0.0, 1.0]))


# ---------- Parametry ----------

def test_normalisation_violation():
    params = _params([[[1.5, 0.0]]])
    with pytest.raises(ParameterNormalizationError):
        params.validate()
    with pytest.raises(ParameterNormalizationError):
        gnn_forward(params, make_hypercube_op(2), constant_signal(0.1))


def test_shape_violation():
    params = GnnParams(1, (1, 2), 2, (np.zeros((1, 1, 2)),))
    with pytest.raises(PreconditionError):
        params.validate()
    with pytest.raises(PreconditionError):
        _params([[[0.1]]], activation="relu6").validate()


def test_random_params():
    params = random_gnn_params(3, (1, 4, 4, 1), 2, seed=9)
    assert params.n_max == 4
    assert all(np.max(np.abs(h)) <= 1.0 for h in params.h)
    again = random_gnn_params(3, (1, 4, 4, 1), 2, seed=9)
    assert params.fingerprint() == again.fingerprint()
    assert params.fingerprint() != random_gnn_params(3, (1, 4, 4, 1), 2, seed=10).fingerprint()


def test_params_json(tmp_path):
    params = random_gnn_params(2, (1, 2, 1), 3, activation="tanh", seed=1)
    path = tmp_path / "params.json"
    path.write_text(gnn_params_to_json(params))
    loaded = load_gnn_params(path)
    assert loaded.fingerprint() == params.fingerprint()
    assert loaded.activation == "tanh"


def test_params_json_errors(tmp_path):
    broken = tmp_path / "broken.json"
    broken.write_text("{not json")
    with pytest.raises(SerializationError):
        load_gnn_params(broken)
    wrong = tmp_path / "wrong.json"
    wrong.write_text(json.dumps({"L": 1, "widths": [1, 1], "K": 2, "h": [[[0.5]]]}))
    with pytest.raises(SerializationError):
        load_gnn_params(wrong)
    loose = tmp_path / "loose.json"
    loose.write_text(json.dumps({"L": 1, "widths": [1, 1], "K": 1, "h": [[[1.5]]]}))
    with pytest.raises(ParameterNormalizationError):
        load_gnn_params(loose).validate()


# ---------- Widok operatorowy ----------

def test_composite_lipschitz_constant():
    params = _params([[[0.5, 0.25]]], [[[1.0, 0.0]]])
    assert composite_lipschitz_constant(params, 2.0) == pytest.approx(1.0 * 1.0)
    assert composite_lipschitz_constant(params, 4.0) == pytest.approx(1.5)
    two = _params([[[0.5]], [[-1.0]]], [[[0.25], [0.5]]])
    assert composite_lipschitz_constant(two, 1.0) == pytest.approx(1.0 * 0.75)


def test_gnn_as_operator():
    A = make_hypercube_op(4)
    params = random_gnn_params(2, (1, 2, 1), 2, seed=3)
    G = gnn_as_operator(params, A)
    assert not G.is_linear
    assert G.constants.assumption_flags == A.constants.assumption_flags
    assert G.constants.C_c == 0.0
    f = constant_signal(0.3)
    assert np.array_equal(G(f).values, gnn_forward(params, A, f)[0].values)
    with pytest.raises(PreconditionError):
        gnn_as_operator(random_gnn_params(1, (1, 2), 2), A)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_gnn_operator_respects_composite_constant(seed):
    params = random_gnn_params(2, (1, 3, 1), 3, seed=seed)
    G = gnn_as_operator(params, discretize(make_hypercube_op(5), 16))
    report = check_lipschitz_map(G, G.constants.C_A, trials=50, seed=seed)
    assert report.passed, f"ratio {report.measured} above {report.threshold}"


def test_signal_gap_of_identity_network():
    params = _params([[[1.0]]])
    X = FiniteSignal(8, np.linspace(-0.9, 0.9, 8))
    gap, report = gnn_signal_gap(params, make_hypercube_op(3), 8, X)
    assert gap == 0.0
    assert report.passed
    assert report.measured == 0.0 and report.n == 8


def test_signal_gap_vanishes_for_dyadic_hypercube():
    A = make_hypercube_op(4)
    params = random_gnn_params(2, (1, 3, 1), 3, seed=6)
    X = FiniteSignal(8, np.random.default_rng(1).uniform(-1, 1, 8))
    gap, report = gnn_signal_gap(params, A, 8, X)
    assert gap == pytest.approx(0.0, abs=1e-12), "piecewise constant inputs stay exact on dyadic cells"
    assert report.variant == "constant-to-lipschitz"
    assert report.bound_value > 0.0


def test_signal_gap_domain_checks():
    A = make_hypercube_op(3)
    params = _params([[[1.0]]])
    with pytest.raises(DomainError):
        gnn_signal_gap(params, A, 8, FiniteSignal.of([0.0] * 4))
    with pytest.raises(DomainError):
        gnn_signal_gap(params, discretize(A, 8), 8, FiniteSignal.of([0.0] * 8))
