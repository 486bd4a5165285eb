from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, strategies as st

from cfmrp.clearing import (ClearingFunction, make_cf, make_ideal, make_three_segment,
                            max_output)

MC = 1440.0
loads = st.floats(0, 5 * MC, allow_nan=False)
fractions = st.sampled_from([0.8, 0.6, 0.4])


def test_ideal_examples():
    cf = make_ideal(MC)
    assert cf(720) == 720 and cf(5000) == 1440 and cf(1440) == 1440
    assert cf.segments == ((1.0, 0.0), (0.0, 1440.0))


def test_three_segment_examples():
    low, high = make_three_segment(MC, 0.4), make_three_segment(MC, 0.8)
    assert low(1152) == 864
    # 1152 is the high variant's kink, so it still passes the full load
    assert high(1152) == 1152
    assert high(1296) == 0.5 * 1296 + 576
    assert low(1152) < high(1152)
    assert make_three_segment(MC, 0.6)(864) == 864
    assert all(make_three_segment(MC, f)(0) == 0 for f in (0.4, 0.6, 0.8))
    assert low(1e6) == MC
    assert low.breakpoints() == pytest.approx([0.4 * MC, 1.6 * MC])


def test_named_variants():
    assert make_cf("ideal", MC) == make_ideal(MC)
    assert make_cf("medium", MC)(864) == 864
    assert make_cf("three:0.5", MC).segments[1] == (0.5, 360.0)
    assert make_cf([(1, 0), (0, 100)], 100)(50) == 50
    with pytest.raises(ValueError):
        make_cf("quadratic", MC)


def test_invalid_segments():
    with pytest.raises(ValueError):
        ClearingFunction(((0.9, 0.0), (0.0, MC)), MC)
    with pytest.raises(ValueError):
        ClearingFunction(((1.0, 0.0), (0.0, 10.0)), MC)
    with pytest.raises(ValueError):
        ClearingFunction(((1.0, 0.0), (1.0, 5.0), (0.0, MC)), MC)
    with pytest.raises(ValueError):
        make_three_segment(MC, 1.0)
    with pytest.raises(ValueError):
        make_ideal(MC)(-1.0)


def test_vector_evaluation():
    out = make_ideal(MC)(np.array([0.0, 100.0, 2000.0]))
    assert out.tolist() == [0.0, 100.0, 1440.0]


@given(fractions, loads, loads, st.floats(0, 1))
def test_concave(f, a, b, lam):
    cf = make_three_segment(MC, f)
    assert cf(lam * a + (1 - lam) * b) >= lam * cf(a) + (1 - lam) * cf(b) - 1e-9


@given(fractions, loads, loads)
def test_monotone_in_load(f, a, b):
    cf = make_three_segment(MC, f)
    lo, hi = sorted((a, b))
    assert cf(lo) <= cf(hi) + 1e-12


@given(loads)
def test_monotone_in_fraction(load):
    outs = [make_three_segment(MC, f)(load) for f in (0.4, 0.6, 0.8)]
    assert outs == sorted(outs)
    assert make_ideal(MC)(load) >= outs[-1]


@given(fractions, loads)
def test_bounded_by_load_and_capacity(f, load):
    assert max_output(make_three_segment(MC, f), load) <= min(load, MC) + 1e-12
