import numpy as np
import pytest

from relusynth.arrangement import (
    AmbiguousGeometryError,
    Arrangement,
    count_regions_2d,
    count_regions_bound,
    distinguishable_regions,
    enumerate_regions,
    general_position,
)
from relusynth.core import Hyperplane, Layer, activation_pattern
from relusynth.ordering import check_distinguishable

H = Hyperplane


def three_generic_lines():
    return Arrangement(2, [H([1, 0], 0), H([0, 1], 0), H([1, 1], -1)])


def test_three_generic_lines_make_seven_regions():
    assert count_regions_2d(three_generic_lines()) == 7


def test_parallel_class():
    arr = Arrangement(2, [H([1.0, 0.0], -float(k)) for k in range(4)])
    assert count_regions_2d(arr) == 5
    assert len(enumerate_regions(arr)) == 5


def test_concurrent_lines():
    arr = Arrangement(2, [H([1, 0], 0), H([0, 1], 0), H([1, 1], 0)])
    assert count_regions_2d(arr) == 6
    assert len(enumerate_regions(arr)) == 6


def test_four_concurrent_lines():
    arr = Arrangement(2, [H([1, 0], 0), H([0, 1], 0), H([1, 1], 0), H([1, -1], 0)])
    assert count_regions_2d(arr) == 8
    assert len(enumerate_regions(arr)) == 8


def test_mixed_parallel_and_crossing():
    arr = Arrangement(2, [H([0, 1], 0), H([0, 1], -1), H([1, 0], 0)])
    assert count_regions_2d(arr) == 6
    assert len(enumerate_regions(arr)) == 6


def test_duplicate_lines_rejected():
    with pytest.raises(ValueError):
        count_regions_2d(Arrangement(2, [H([1, 0], 0), H([2, 0], 0)]))


def test_ambiguous_parallelism_rejected():
    arr = Arrangement(2, [H([1.0, 0.0], 0.0), H([1.0, 5e-9], -3.0)])
    with pytest.raises(AmbiguousGeometryError):
        count_regions_2d(arr)


def test_count_regions_bound_values():
    assert count_regions_bound(2, 3) == 7
    assert count_regions_bound(3, 0) == 1
    assert count_regions_bound(3, 5) == 1 + 5 + 10 + 10
    with pytest.raises(OverflowError):
        count_regions_bound(1, 2 ** 63)
    with pytest.raises(ValueError):
        count_regions_bound(0, 3)


def test_enumerate_single_hyperplane():
    regions = enumerate_regions(Arrangement(2, [H([1, 1], 0)]))
    assert len(regions) == 2


def test_enumerate_seven_regions_distinct_active_sets():
    regions = enumerate_regions(three_generic_lines())
    assert len(regions) == 7
    assert len({r.sign_vector for r in regions}) == 7


def test_enumerate_cap():
    arr = Arrangement(1, [H([1.0], -float(k)) for k in range(5)])
    with pytest.raises(ValueError):
        enumerate_regions(arr, cap=4)


def test_general_position_basics():
    assert general_position(three_generic_lines())
    assert not general_position(Arrangement(2, [H([1, 0], 0), H([1, 0], -1)]))
    planes = [H([1, 0, 0], 0), H([0, 1, 0], 0), H([0, 0, 1], 0), H([1, 1, 1], 0)]
    assert not general_position(Arrangement(3, planes))


def test_general_position_bound_match(rng):
    # random 5-plane arrangement in R^3: exactly 26 regions once in
    # general position
    while True:
        hps = [H(rng.normal(size=3), rng.normal()) for _ in range(5)]
        arr = Arrangement(3, hps)
        if general_position(arr):
            break
    assert len(enumerate_regions(arr)) == count_regions_bound(3, 5) == 26


def test_enumeration_matches_formula_random_2d(rng):
    for _ in range(30):
        m = int(rng.integers(2, 7))
        arr = Arrangement(2, [H(rng.normal(size=2), rng.normal()) for _ in range(m)])
        assert len(enumerate_regions(arr)) == count_regions_2d(arr)


def test_region_witnesses_reproduce_sign_vectors(rng):
    arr = Arrangement(2, [H(rng.normal(size=2), rng.normal()) for _ in range(4)])
    layer = Layer(np.array([h.w for h in arr.hyperplanes]),
                  np.array([h.b for h in arr.hyperplanes]), "relu")
    for region in enumerate_regions(arr):
        per_point, _ = activation_pattern(layer, region.witness[None, :])
        assert per_point[0].signs == region.sign_vector


def test_staircase_regions_single():
    arr, regions = distinguishable_regions(2, 1)
    assert len(regions) == 1
    assert regions[0].sign_vector == ("+",)


def test_staircase_regions_pattern_three_lines():
    _, regions = distinguishable_regions(2, 3)
    assert [("".join(r.sign_vector)) for r in regions] == ["+00", "++0", "+0+"]


def test_staircase_regions_r3_six():
    arr, regions = distinguishable_regions(3, 6)
    ok, failures = check_distinguishable(
        [r.witness[None, :] for r in regions], arr.hyperplanes)
    assert ok, failures


def test_staircase_regions_1d():
    arr, regions = distinguishable_regions(1, 4)
    ok, _ = check_distinguishable(
        [r.witness[None, :] for r in regions], arr.hyperplanes)
    assert ok
