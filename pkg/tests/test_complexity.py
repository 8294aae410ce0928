import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import arrangement_cell_count, binomial_cut_count
from relugeom import ArchitectureError, cut_count, network_bound
from relugeom.complexity import ComplexityBound


@pytest.mark.parametrize("d,n,expected", [(2, 1, 2), (1, 1, 2), (1, 5, 6), (2, 2, 4), (2, 3, 7),
                                          (2, 8, 37), (3, 3, 8), (8, 1, 2), (5, 0, 1)])
def test_cut_count_values(d, n, expected):
    assert cut_count(d, n) == expected


@given(st.integers(0, 40), st.integers(0, 40))
def test_cut_count_matches_binomial_sum(d, n):
    assert cut_count(d, n) == binomial_cut_count(d, n)


@given(st.integers(0, 30), st.integers(0, 30))
def test_cut_count_saturates_at_two_power(d, n):
    if n <= d:
        assert cut_count(d, n) == 2 ** n
    assert cut_count(d, n) <= 2 ** n


def test_cut_count_rejects_negative():
    with pytest.raises(ValueError):
        cut_count(-1, 3)


def test_arrangement_oracle_agrees_on_a_few_instances():
    rng = np.random.default_rng(0)
    for d, n in [(1, 3), (2, 3), (2, 4), (3, 4)]:
        A, b = rng.normal(size=(n, d)), rng.normal(size=n)
        assert arrangement_cell_count(A, b) == cut_count(d, n)


@pytest.mark.parametrize("arch,expected", [("2,2,1", 8), ("2,1,1", 4), ("2,8,1", 74),
                                           ("2,4,4,1", 352)])
def test_network_bound_values(arch, expected):
    assert network_bound(arch).value == expected


def test_network_bound_large_is_exact_integer():
    bound = network_bound("3,768,384,192,96,48,2")
    assert isinstance(bound.value, int)
    assert bound.log10 == pytest.approx(math.log10(bound.value))
    assert bound.to_dict()["value"] == str(bound.value)
    assert int(ComplexityBound.of(10)) == 10


def test_network_bound_rejects_bad_arch():
    with pytest.raises(ArchitectureError):
        network_bound("2,1")
