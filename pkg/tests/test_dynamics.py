import numpy as np
import pytest

from eedi.domain import IntegrationDiverged
from eedi.dynamics import (DynamicsModel, default_model, flow, integrate, linearize, rk4_step,
                           rk4_step_jacobians)

KINDS = ("Integrator", "UnicycleKin", "UnicycleDyn")


def test_dimensions():
    dims = {k: (default_model(k).state_dim, default_model(k).control_dim) for k in KINDS}
    assert dims == {"Integrator": (2, 2), "UnicycleKin": (3, 2), "UnicycleDyn": (5, 2)}
    with pytest.raises(ValueError):
        DynamicsModel("Hovercraft", ((0, 1),))
    with pytest.raises(ValueError):
        flow(default_model("UnicycleKin"), [0.0, 0.0], [0.1, 0.0])


def test_flow_examples():
    assert np.allclose(flow(default_model("Integrator"), [0.3, 0.4], [0.1, -0.2]), [0.1, -0.2])
    assert np.allclose(flow(default_model("UnicycleKin"), [0, 0, 0], [1.0, 0.0]), [1, 0, 0])
    f = flow(default_model("UnicycleDyn"), [0, 0, 0, 0, 0], [2.0, 0.0])
    assert f[3] == 1.0


def test_integrate_examples():
    m = default_model("Integrator")
    tr = integrate(m, [0.2, 0.3], np.zeros((10, 2)), 0.1)
    assert np.all(tr.states == [0.2, 0.3]) and len(tr) == 11
    k = default_model("UnicycleKin")
    tr = integrate(k, [0.0, 0.0, 0.0], np.tile([0.1, 0.0], (10, 1)), 0.1)
    assert abs(tr.states[-1, 0] - 0.1) < 1e-12 and abs(tr.states[-1, 1]) < 1e-12


def _arc_error(dt, T=2.0, v=0.1, w=0.8):
    k = default_model("UnicycleKin")
    n = int(round(T / dt))
    tr = integrate(k, [0.0, 0.0, 0.0], np.tile([v, w], (n, 1)), dt)
    exact = np.array([v / w * np.sin(w * T), v / w * (1 - np.cos(w * T))])
    return tr.states, np.linalg.norm(tr.states[-1, :2] - exact)


def test_unicycle_circle_and_rk4_order():
    states, err = _arc_error(0.01)
    center = np.array([0.0, 0.1 / 0.8])
    assert np.allclose(np.linalg.norm(states[:, :2] - center, axis=1), 0.1 / 0.8, atol=1e-8)
    _, e1 = _arc_error(0.2)
    _, e2 = _arc_error(0.1)
    assert 12.0 <= e1 / e2 <= 20.0


def test_heading_periodicity():
    k = default_model("UnicycleKin")
    U = np.random.default_rng(0).uniform(-0.1, 0.1, size=(30, 2))
    a = integrate(k, [0.1, 0.1, 0.3], U, 0.1)
    b = integrate(k, [0.1, 0.1, 0.3 + 2 * np.pi], U, 0.1)
    assert np.allclose(a.workspace_projection, b.workspace_projection, atol=1e-12)


def test_linearize_examples():
    A, B = linearize(default_model("Integrator"), [0.1, 0.2], [0.0, 0.0])
    assert np.all(A == 0) and np.all(B == np.eye(2))
    A, _ = linearize(default_model("UnicycleKin"), [0, 0, 0], [0.3, 0.0])
    assert A[0, 2] == 0.0


@pytest.mark.parametrize("kind", KINDS)
def test_jacobians_match_finite_differences(kind):
    m = default_model(kind)
    rng = np.random.default_rng(7)
    x = rng.uniform(-0.5, 0.5, m.state_dim)
    u = rng.uniform(-0.1, 0.1, m.control_dim)
    A, B = linearize(m, x, u)
    h = 1e-6
    for i in range(m.state_dim):
        e = np.zeros(m.state_dim); e[i] = h
        assert np.allclose((flow(m, x + e, u) - flow(m, x - e, u)) / (2 * h), A[:, i], atol=1e-6)
    for i in range(m.control_dim):
        e = np.zeros(m.control_dim); e[i] = h
        assert np.allclose((flow(m, x, u + e) - flow(m, x, u - e)) / (2 * h), B[:, i], atol=1e-6)
    Fx, Fu = rk4_step_jacobians(m, x, u, 0.1)
    for i in range(m.state_dim):
        e = np.zeros(m.state_dim); e[i] = h
        fd = (rk4_step(m, x + e, u, 0.1) - rk4_step(m, x - e, u, 0.1)) / (2 * h)
        assert np.allclose(fd, Fx[:, i], atol=1e-7)
    for i in range(m.control_dim):
        e = np.zeros(m.control_dim); e[i] = h
        fd = (rk4_step(m, x, u + e, 0.1) - rk4_step(m, x, u - e, 0.1)) / (2 * h)
        assert np.allclose(fd, Fu[:, i], atol=1e-7)


def test_divergence_raises():
    m = DynamicsModel("Integrator", ((-1e308, 1e308),), 1)
    with pytest.raises(IntegrationDiverged):
        integrate(m, [0.0], [[1e308], [1e308]], 10.0)
