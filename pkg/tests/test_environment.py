import numpy as np
import pytest

from safeforce.environment import (
    ForceRangeError, ForceTable, SaturatingSpring, Spring, insertion_for_force, reaction_force,
)


def test_spring_values():
    s = Spring(100.0)
    assert s(0.2) == 0.0
    assert s(0.0) == 0.0
    assert s(-0.03) == pytest.approx(-3.0, abs=1e-15)
    assert insertion_for_force(-3.0, s) == pytest.approx(-0.03, abs=1e-12)


def test_saturating_spring_is_monotone_and_capped():
    m = SaturatingSpring(300.0, -10.0)
    Z = np.linspace(-0.2, 0.1, 10_000)
    F = np.array([m(z) for z in Z])
    assert np.all(np.diff(F) >= 0)
    assert F.min() == -10.0 and F.max() == 0.0


def test_saturating_spring_insertion_by_bisection():
    m = SaturatingSpring(300.0, -10.0)
    Z_d = insertion_for_force(-5.0, m)
    assert abs(m(Z_d) - (-5.0)) <= 1e-9
    assert Z_d == pytest.approx(-5.0 / 300.0, abs=1e-11)


def test_force_outside_range_raises():
    with pytest.raises(ForceRangeError):
        insertion_for_force(-12.0, SaturatingSpring(300.0, -10.0))
    with pytest.raises(ForceRangeError):
        insertion_for_force(-10.0, SaturatingSpring(300.0, -10.0))
    with pytest.raises(ForceRangeError):
        insertion_for_force(-5.0, ForceTable((-0.1, 0.0), (-2.0, 0.0)))


def test_zero_or_positive_target_rejected():
    for F_d in (0.0, 1.0):
        with pytest.raises(ValueError):
            insertion_for_force(F_d, Spring(300.0))


def test_force_table_interpolates_and_validates():
    t = ForceTable((-0.1, -0.05, 0.0), (-8.0, -2.0, 0.0))
    assert t(0.3) == 0.0
    assert t(-0.075) == pytest.approx(-5.0)
    assert t(-1.0) == -8.0
    assert abs(t(insertion_for_force(-5.0, t)) + 5.0) <= 1e-9
    with pytest.raises(ValueError):
        ForceTable((0.0, -0.1), (0.0, -1.0))
    with pytest.raises(ValueError):
        ForceTable((-0.1, 0.0), (-1.0, -0.5))


def test_invalid_parameters_rejected():
    with pytest.raises(ValueError):
        Spring(0.0)
    with pytest.raises(ValueError):
        SaturatingSpring(300.0, 1.0)


def test_reaction_force_is_float():
    assert isinstance(reaction_force(-0.01, Spring(300.0)), float)
