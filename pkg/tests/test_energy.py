import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from uavrelay import channel as ch
from uavrelay.energy import (DegenerateWindowError, EnergyLedger, PropulsionParams, backhaul_energy,
                             energy_efficiency, flight_distance, mobility_energy, propulsion_power,
                             step_ratio)


def test_propulsion_oracle():
    p = PropulsionParams(velocity=100.0)
    assert propulsion_power(p) == pytest.approx(9.26e-4 * 100 ** 3 + 2250 / 100, rel=1e-12)
    assert propulsion_power(p) == pytest.approx(948.5, rel=1e-6)


def test_acceleration_term():
    p = PropulsionParams(velocity=10.0, acceleration=9.8)
    assert propulsion_power(p) == pytest.approx(9.26e-4 * 1000 + 225 * 2)


def test_mobility_oracle():
    assert mobility_energy(300.0, PropulsionParams(velocity=100.0)) == pytest.approx(284550.0, rel=1e-6)
    assert mobility_energy(0.0, PropulsionParams()) == 0.0
    with pytest.raises(ValueError):
        mobility_energy(-1.0, PropulsionParams())


def test_zero_velocity_rejected():
    with pytest.raises(ValueError):
        PropulsionParams(velocity=0.0)


def test_flight_distance_uses_altitude():
    assert flight_distance(300.0, 400.0) == pytest.approx(500.0)


def test_backhaul_energy_oracle():
    assert backhaul_energy(1e6, ch.ChannelParams()) == pytest.approx(1e5)
    assert backhaul_energy(1e6, ch.ChannelParams(), slot_duration=1.0) == pytest.approx(0.1)
    assert backhaul_energy(0.0, ch.ChannelParams(), slot_duration=1.0) == 0.0


def test_step_ratio():
    assert step_ratio(10.0, 30.0, 1.0, 3.0) == pytest.approx(10.0)
    with pytest.raises(ValueError):
        step_ratio(1.0, 1.0, 0.0, 0.0)


def test_ledger_and_efficiency():
    led = EnergyLedger(2)
    led.record([1, 2], np.array([10.0, 0.0]), np.array([0.0, 5.0]), np.array([0.0, 0.5]), np.array([2.0, 2.0]))
    led.record([2, 0], np.array([4.0, 0.0]), np.array([0.0, 0.0]), np.array([0.0, 0.0]), np.array([1.0, 1.0]))
    assert led.n_slots == 2
    np.testing.assert_allclose(energy_efficiency(led), [10 / 2 + 4 / 1, 5 / 2.5])
    np.testing.assert_allclose(energy_efficiency(led, waypoints=[1]), [5.0, 2.0])
    np.testing.assert_allclose(energy_efficiency(led, horizon=1), [5.0, 2.0])
    np.testing.assert_allclose(led.uplink_bits_total, [14.0, 0.0])


def test_ledger_rejects_negative_and_empty_window():
    led = EnergyLedger(1)
    with pytest.raises(ValueError):
        led.record([0], np.array([-1.0]), np.zeros(1), np.zeros(1), np.ones(1))
    with pytest.raises(DegenerateWindowError):
        energy_efficiency(led)
    led.record([0], np.zeros(1), np.zeros(1), np.zeros(1), np.zeros(1))
    with pytest.raises(DegenerateWindowError):
        energy_efficiency(led)


@given(st.floats(0.5, 200))
def test_propulsion_positive(v):
    assert propulsion_power(PropulsionParams(velocity=v)) > 0


@given(st.floats(0, 1e4), st.floats(0, 1e4))
def test_mobility_additive(a, b):
    p = PropulsionParams()
    assert mobility_energy(a + b, p) == pytest.approx(mobility_energy(a, p) + mobility_energy(b, p))
