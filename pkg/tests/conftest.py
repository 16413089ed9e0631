import numpy as np
import pytest

from hevrl.cycles import DrivingCycle, cycle_from_speeds
from hevrl.powertrain import (
    BatteryParams,
    Driveline,
    EfficiencyMap,
    VehicleParams,
    default_engine_map,
)


@pytest.fixture
def vehicle():
    return VehicleParams()


@pytest.fixture
def battery():
    return BatteryParams()


@pytest.fixture
def driveline():
    return Driveline()


@pytest.fixture
def engine_map():
    return default_engine_map()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def write_cycle_csv(tmp_path):
    """Write rows to a cycle CSV and return its path."""

    def _write(rows, header="time,speed", name="cycle.csv"):
        path = tmp_path / name
        lines = [header] + [f"{t},{v}" for t, v in rows]
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        return path

    return _write


@pytest.fixture
def ramp_cycle() -> DrivingCycle:
    """0..9 m/s linear ramp then back to 0; exact piecewise-linear profile."""
    v = list(range(10)) + list(range(8, -1, -1))
    return cycle_from_speeds("ramp", [float(x) for x in v], 1.0)


def finite_diff_grads(net, x, grad_out, eps=1e-5):
    """Independent gradient oracle: central differences on sum(out * grad_out).

    Deliberately NOT using the library's backward pass anywhere.
    """
    from hevrl.net import forward

    def objective(theta):
        saved = net.theta.copy()
        net.theta[:] = theta
        val = float(np.sum(forward(net, x) * grad_out))
        net.theta[:] = saved
        return val

    base = net.theta.copy()
    grads = np.zeros_like(base)
    for k in range(base.size):
        up = base.copy()
        up[k] += eps
        down = base.copy()
        down[k] -= eps
        grads[k] = (objective(up) - objective(down)) / (2 * eps)
    return grads
