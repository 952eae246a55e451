import numpy as np
import pytest

from relusynth.core import (
    ActivationPattern,
    AffineMap,
    DimensionMismatch,
    DiscretePWL,
    Hyperplane,
    Layer,
    Network,
    RankDeficientError,
    activation_pattern,
    affine_fit,
    forward,
    forward_traced,
    numeric_rank,
    solve_constrained,
)
from conftest import det_cofactor


def single_relu():
    return Network(1, (Layer([[1.0]], [0.0], "relu"),))


def test_forward_relu_negative():
    assert forward(single_relu(), np.array([-3.0])) == pytest.approx([0.0])


def test_forward_identity_on_positive_ray():
    assert forward(single_relu(), np.array([2.0])) == pytest.approx([2.0])


def test_absolute_value_decomposition_is_identity():
    net = Network(1, (
        Layer([[1.0], [-1.0]], [0.0, 0.0], "relu"),
        Layer([[1.0, -1.0]], [0.0], "linear"),
    ))
    for x in (-5.0, 0.0, 5.0):
        assert forward(net, np.array([x])) == pytest.approx([x])


def test_forward_dimension_mismatch_names_layer():
    net = single_relu()
    with pytest.raises(DimensionMismatch):
        forward(net, np.array([1.0, 2.0]))
    bad = Layer([[1.0, 1.0]], [0.0], "relu")
    with pytest.raises(DimensionMismatch) as err:
        Network(1, (bad,))
    assert err.value.layer_index == 0


def test_forward_clamps_tolerance_band():
    # output > 0 iff preactivation > tolerance
    net = Network(1, (Layer([[1.0]], [0.0], "relu"),))
    assert forward(net, np.array([5e-10]))[0] == 0.0
    assert forward(net, np.array([2e-9]))[0] > 0.0


def test_traced_patterns():
    net = Network(1, (
        Layer([[1.0], [-1.0]], [0.0, 0.0], "relu"),
        Layer([[1.0, -1.0]], [0.0], "linear"),
    ))
    _, patterns = forward_traced(net, np.array([3.0]))
    assert str(patterns[0]) == "+0"


def test_activation_pattern_simultaneous_and_partial():
    layer = Layer([[1.0, 0.0]], [0.0], "relu")
    per_point, agg = activation_pattern(layer, [[1.0, 0.0], [2.0, 3.0]])
    assert all(p.signs == ("+",) for p in per_point)
    assert agg[0] == "simultaneous"
    per_point, agg = activation_pattern(layer, [[1.0, 0.0], [-1.0, 0.0]])
    assert [p.signs for p in per_point] == [("+",), ("0",)]
    assert agg[0] == "partial"


def test_activation_pattern_empty_points_rejected():
    layer = Layer([[1.0, 0.0]], [0.0], "relu")
    with pytest.raises(ValueError):
        activation_pattern(layer, np.zeros((0, 2)))


def test_activation_pattern_two_group_fixture():
    # three lines with one set lighting units 0 and 2 only, the other all
    lines = Layer(
        [[1.0, 0.0], [1.0, 0.0], [0.0, 1.0]], [5.0, -2.0, 5.0], "relu")
    D1 = [[0.0, 0.0], [0.5, 0.5], [0.0, 1.0]]
    D2 = [[3.0, 0.0], [3.5, 1.0], [4.0, 0.5]]
    _, agg1 = activation_pattern(lines, D1)
    _, agg2 = activation_pattern(lines, D2)
    assert agg1 == {0: "simultaneous", 1: "never", 2: "simultaneous"}
    assert agg2 == {0: "simultaneous", 1: "simultaneous", 2: "simultaneous"}


def test_numeric_rank_basics():
    assert numeric_rank(np.eye(3)) == 3
    assert numeric_rank(np.ones((3, 3))) == 1
    with pytest.raises(ValueError):
        numeric_rank(np.zeros((0, 2)))
    with pytest.raises(ValueError):
        numeric_rank(np.eye(2), tol=0.0)


def test_numeric_rank_perturbation_family_matrix():
    # 3x3 family matrix: base column plus two epsilon-power columns
    w, b = (1.0, 0.5), 0.2
    e1, e2 = 0.3, 0.7
    M = np.array([
        [w[0], w[0], w[0]],
        [w[1], w[1] + e1, w[1] + e1 ** 2],
        [b, b + e2, b + e2 ** 2],
    ])
    assert numeric_rank(M) == 3
    assert abs(det_cofactor(M)) > 1e-12
    assert np.isclose(det_cofactor(M), np.linalg.det(M))


def test_solve_constrained_modes():
    assert solve_constrained(np.eye(2), [3.0, 4.0], "exact_square") == pytest.approx([3, 4])
    x = solve_constrained(np.array([[1.0, 1.0]]), [2.0], "least_norm_underdetermined")
    assert x == pytest.approx([1.0, 1.0])
    with pytest.raises(RankDeficientError) as err:
        solve_constrained(np.ones((2, 2)), [1.0, 2.0], "exact_square")
    assert err.value.rank == 1
    with pytest.raises(ValueError):
        solve_constrained(np.eye(2), [1.0, 2.0], "nonsense")


def test_solve_constrained_wide_family_matrix(rng):
    # 3x4 stack of a base hyperplane and three perturbed copies
    w, b = np.array([1.0, 0.5]), 0.2
    cols = [np.array([w[0], w[1], b])]
    for p in (1, 2, 3):
        cols.append(np.array([w[0], w[1] + 0.3 ** p, b + 0.7 ** p]))
    A = np.column_stack(cols)
    assert numeric_rank(A) == 3
    for _ in range(10):
        y = rng.normal(size=3)
        x = solve_constrained(A, y, "least_norm_underdetermined")
        assert np.max(np.abs(A @ x - y)) < 1e-10


def test_exact_square_roundtrip(rng):
    for _ in range(20):
        A = rng.normal(size=(4, 4)) + 4 * np.eye(4)
        y = rng.normal(size=4)
        x = solve_constrained(A, y, "exact_square")
        assert np.max(np.abs(A @ x - y)) <= 1e-10 * (1 + np.max(np.abs(y)))


def test_forward_is_affine_per_activation_pattern(rng):
    net = Network(2, (
        Layer(rng.normal(size=(5, 2)), rng.normal(size=5), "relu"),
        Layer(rng.normal(size=(4, 5)), rng.normal(size=4), "relu"),
        Layer(rng.normal(size=(1, 4)), [0.0], "linear"),
    ))
    pts = rng.normal(size=(300, 2)) * 2
    groups = {}
    for x in pts:
        out, patterns = forward_traced(net, x)
        key = tuple(str(p) for p in patterns)
        groups.setdefault(key, []).append((x, out))
    checked = 0
    for key, members in groups.items():
        if len(members) < 4:
            continue
        X = np.array([m[0] for m in members])
        Y = np.array([m[1] for m in members])
        _, resid = affine_fit(X, Y)
        assert resid <= 1e-8
        checked += 1
    assert checked >= 1


def test_network_json_roundtrip_bit_exact(rng):
    net = Network(3, (
        Layer(rng.normal(size=(4, 3)), rng.normal(size=4), "relu"),
        Layer(rng.normal(size=(1, 4)), [0.0], "linear"),
    ))
    back = Network.from_json(net.to_json())
    for a, b in zip(net.layers, back.layers):
        assert a.weights.tobytes() == b.weights.tobytes()
        assert a.biases.tobytes() == b.biases.tobytes()
        assert a.activation == b.activation


def test_pwl_json_roundtrip_bit_exact(rng):
    pwl = DiscretePWL(2, 2, (
        (rng.normal(size=(3, 2)), AffineMap(rng.normal(size=(2, 2)), rng.normal(size=2))),
        (rng.normal(size=(2, 2)) + 10, AffineMap.constant([1.0, -1.0], 2)),
    ))
    back = DiscretePWL.from_json(pwl.to_json())
    for (p1, m1), (p2, m2) in zip(pwl.subdomains, back.subdomains):
        assert p1.tobytes() == p2.tobytes()
        assert m1.W.tobytes() == m2.W.tobytes()
        assert m1.b.tobytes() == m2.b.tobytes()


def test_pwl_validation():
    with pytest.raises(ValueError):
        DiscretePWL(2, 1, (
            (np.zeros((1, 2)), AffineMap.constant([0.0], 2)),
            (np.zeros((1, 2)), AffineMap.constant([1.0], 2)),  # duplicate point
        ))
    with pytest.raises(ValueError):
        DiscretePWL(2, 1, ((np.zeros((0, 2)), AffineMap.constant([0.0], 2)),))


def test_hyperplane_rejects_zero_weights():
    with pytest.raises(ValueError):
        Hyperplane([0.0, 0.0], 1.0)


def test_architecture_string_collapses_equal_layers():
    net = Network(2, (
        Layer(np.ones((12, 2)), np.zeros(12), "relu"),
        Layer(np.ones((12, 12)), np.zeros(12), "relu"),
        Layer(np.ones((1, 12)), [0.0], "linear"),
    ))
    assert net.architecture() == "2(1)12(2)1'(1)"


def test_activation_pattern_from_preactivation():
    p = ActivationPattern.from_preactivation([1.0, 0.0, 5e-10, 2e-9])
    assert str(p) == "+00+"
    assert p.active_units() == (0, 3)
