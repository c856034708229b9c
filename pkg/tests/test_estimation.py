import mpmath
import numpy as np
import pytest

from eedi.domain import Axis, BeliefGrid, DegenerateBelief, SearchDomain, TargetParams, cell_volume, normalize
from eedi.estimation import (ElectrosenseSurrogate, FunctionModel, GaussianBump, _det, bayes_update,
                             calibrated_amplitude, eid_map, entropy, expected_information, fisher_matrix,
                             forward_model, information_density, multi_target_eid, multi_target_update,
                             simulate_measurements)

from conftest import line_grid, square_grid

SIGMA = 1e-4


def surrogate(**kw):
    return ElectrosenseSurrogate(noise_sigma=SIGMA, standoff=0.1, radius=0.0125, **kw)


def test_forward_model_symmetries():
    m = surrogate()
    t = TargetParams((0.5, 0.5), None, 0.1)
    assert forward_model(m, t, [0.5, 0.8]) == 0.0
    # reflect the target across the sensor's first coordinate
    x = np.array([0.55, 0.4])
    mirror = TargetParams((0.6, 0.5), None, 0.1)
    assert np.isclose(forward_model(m, t, x), -forward_model(m, mirror, x))
    # homogeneity: doubling every length scales the response by 2 / 2^5
    a = forward_model(m, TargetParams((0.0, 0.0), None, 0.1), [0.03, 0.02])
    b = forward_model(m, TargetParams((0.0, 0.0), None, 0.2), [0.06, 0.04])
    assert np.isclose(b / a, 1 / 16)


def test_calibration_anchor_brute_force():
    m = ElectrosenseSurrogate(noise_sigma=SIGMA, standoff=0.1)
    t = TargetParams((0.5, 0.5), 0.009, 0.1)
    g = np.linspace(0.2, 0.8, 1201)
    X, Y = np.meshgrid(g, g, indexing="ij")
    peak = np.max(np.abs(m.target_signal(t, np.stack([X.ravel(), Y.ravel()], 1))))
    assert abs(peak - SIGMA) <= 0.01 * SIGMA
    assert np.isclose(m.amplitude, calibrated_amplitude(SIGMA, 0.1, 0.009))


def test_surrogate_gradient_matches_finite_differences():
    m = surrogate()
    rng = np.random.default_rng(2)
    theta = np.column_stack([rng.uniform(0, 1, (20, 2)), rng.uniform(0.005, 0.015, 20)])
    x = rng.uniform(0, 1, (15, 2))
    G = m.theta_gradient(theta, x)
    fd = np.empty_like(G)
    for i in range(3):
        h = np.zeros(3); h[i] = 1e-7 if i < 2 else 1e-8
        fd[..., i] = (m.predict(theta + h, x) - m.predict(theta - h, x)) / (2 * h[i])
    scale = np.max(np.abs(fd), axis=(0, 1))
    assert np.all(np.max(np.abs(G - fd), axis=(0, 1)) <= 1e-5 * scale)


def test_simulate_measurements_examples():
    m = surrogate()
    x = np.column_stack([np.linspace(0, 1, 50), np.full(50, 0.4)])
    z = simulate_measurements([], x, m, np.random.default_rng(0), noise_sigma=0.0)
    assert np.all(z == 0.0)
    t = TargetParams((0.3, 0.5), 0.0125, 0.1)
    z = simulate_measurements([t], x, m, np.random.default_rng(0), noise_sigma=0.0)
    assert np.array_equal(z, m.target_signal(t, x))
    a = simulate_measurements([t], x, m, np.random.default_rng(5))
    b = simulate_measurements([t], x, m, np.random.default_rng(5))
    assert np.array_equal(a, b)


def test_bayes_update_examples():
    g = line_grid(51)
    m = surrogate()
    x = np.array([[0.2], [0.4]])
    assert bayes_update(g, np.zeros((0, 1)), [], m) is g
    two = BeliefGrid.uniform([Axis("x", 0.0, 1.0, 2)])
    bump = GaussianBump(length_scale=0.5, noise_sigma=1.0)
    post = bayes_update(two, np.array([[0.3]]), [0.7], bump)
    L = np.exp(-0.5 * (0.7 - bump.predict(np.array([[0.0], [1.0]]), np.array([[0.3]]))[:, 0]) ** 2)
    assert np.allclose(post.probabilities(), L / L.sum())
    wide = ElectrosenseSurrogate(noise_sigma=SIGMA * 1e6, standoff=0.1, amplitude=m.amplitude)
    post = bayes_update(g, x, [3e-4, -2e-4], wide)
    assert np.allclose(post.mass, g.mass, rtol=1e-6)


def test_posterior_normalized_and_log_space(rng):
    m = surrogate()
    g = square_grid(31)
    t = TargetParams((0.4, 0.6), 0.0125, 0.1)
    x = np.column_stack([np.linspace(0, 1, 3000), np.linspace(0.2, 0.9, 3000)])
    z = simulate_measurements([t], x, m, rng)
    post = bayes_update(g, x, z, m)
    assert abs(post.total() - 1.0) < 1e-9
    i = np.argmax(post.mass)
    assert np.linalg.norm(post.points()[i] - [0.4, 0.6]) < 0.05
    # data incompatible with every hypothesis still normalizes in log space
    post = bayes_update(g, x, z + 1.0, m)
    assert abs(post.total() - 1.0) < 1e-9
    with pytest.raises(DegenerateBelief):
        bayes_update(g, x, np.full(len(x), np.inf), m)


def test_multi_target_update_examples():
    m = surrogate()
    x = np.column_stack([np.linspace(0, 1, 200), np.full(200, 0.5)])
    z = simulate_measurements([TargetParams((0.3, 0.5), 0.0125, 0.1)], x, m, np.random.default_rng(1))
    g = square_grid(21)
    assert np.allclose(multi_target_update([g], x, z, m)[0].mass, bayes_update(g, x, z, m).mass)
    delta = np.zeros(g.shape); delta[14, 10] = 1.0
    other = normalize(g.with_mass(delta))
    theta_star = other.points()[14 * 21 + 10]
    expected = bayes_update(g, x, z - m.predict(theta_star[None], x)[0], m)
    got = multi_target_update([g, other], x, z, m, update=[0])
    assert np.allclose(got[0].mass, expected.mass)
    assert got[1] is other


def test_multi_target_symmetric_posteriors():
    m = GaussianBump(length_scale=0.15, noise_sigma=0.2)
    ax = [Axis("x", 0.0, 1.0, 21)]
    pa = np.exp(-((ax[0].nodes() - 0.3) ** 2) / 0.01)
    a = normalize(BeliefGrid(ax, pa))
    b = normalize(BeliefGrid(ax, pa[::-1]))
    x = np.linspace(0, 1, 41)[:, None]
    z = m.predict(np.array([[0.3], [0.7]]), x).sum(axis=0)
    ga, gb = multi_target_update([a, b], x, z, m)
    assert np.allclose(ga.mass, gb.mass[::-1], atol=1e-12)


def test_fisher_examples_and_psd():
    lin = FunctionModel(lambda th, x: th[:, :1] * x[None, :, 0], noise_sigma=1.0)
    assert np.isclose(fisher_matrix(lin, [0.7], [2.0])[0, 0], 4.0, rtol=1e-6)
    const = FunctionModel(lambda th, x: np.ones((len(th), len(x))), noise_sigma=1.0)
    assert np.all(fisher_matrix(const, [0.2, 0.4], [0.5, 0.5]) == 0)
    m = surrogate()
    rng = np.random.default_rng(11)
    worst = min_fisher_eigenvalue(m, rng, 1000)
    assert worst >= -1e-12


def min_fisher_eigenvalue(model, rng, n):
    """Smallest eigenvalue over ``n`` random (theta, x), computed in 40-digit arithmetic."""
    mpmath.mp.dps = 40
    worst = np.inf
    for _ in range(n):
        theta = np.r_[rng.uniform(0, 1, 2), rng.uniform(0.005, 0.015)]
        I = fisher_matrix(model, theta, rng.uniform(0, 1, 2))
        assert np.array_equal(I, I.T)
        ev = mpmath.eigsy(mpmath.matrix(I.tolist()), eigvals_only=True)
        worst = min(worst, float(min(ev)))
    return worst


def test_delta_belief_eid_is_pointwise_fisher_det():
    m = surrogate()
    d = SearchDomain([1.0, 1.0], 21)
    g = square_grid(21)
    mass = np.zeros(g.shape)
    mass[6, 13] = 1.0
    g = normalize(g.with_mass(mass))
    theta = g.points()[6 * 21 + 13]
    fisher = np.array([fisher_matrix(m, theta, x) for x in d.points()])
    assert np.array_equal(expected_information(g, m, d.points()), fisher)
    assert np.array_equal(information_density(g, m, d), np.clip(_det(fisher), 0.0, None))
    line = SearchDomain([1.0], 101)
    gl = line_grid(101)
    ml = np.zeros(101); ml[37] = 1.0
    gl = normalize(gl.with_mass(ml))
    mm = ElectrosenseSurrogate(noise_sigma=SIGMA, standoff=0.1)
    eid = eid_map(gl, mm, line)
    direct = np.array([fisher_matrix(mm, [0.37], x)[0, 0] for x in line.points()])
    assert np.array_equal(eid.raw.ravel(), direct)


def test_eid_1d_matches_quadrature_and_is_density():
    m = ElectrosenseSurrogate(noise_sigma=SIGMA, standoff=0.1)
    line = SearchDomain([1.0], 101)
    ax = Axis("x", 0.0, 1.0, 201)
    p = np.exp(-((ax.nodes() - 0.4) ** 2) / 0.02)
    g = normalize(BeliefGrid([ax], p))
    eid = eid_map(g, m, line)
    w = g.probabilities()
    oracle = []
    for x in line.points():
        G = m.theta_gradient(g.points(), x[None])[:, 0, 0]
        oracle.append(np.sum(w * G * G) / SIGMA ** 2)
    assert np.allclose(eid.raw.ravel(), oracle, rtol=1e-9)
    assert np.all(eid.density >= 0)
    assert np.isclose(eid.density.ravel() @ line.weights(), 1.0)


def test_eid_symmetry_and_multi_target():
    m = surrogate()
    d = SearchDomain([1.0, 1.0], 21)
    ax = [Axis("x", 0, 1, 21), Axis("y", 0, 1, 21)]
    X, Y = np.meshgrid(ax[0].nodes(), ax[1].nodes(), indexing="ij")
    sym = normalize(BeliefGrid(ax, np.exp(-((X - 0.5) ** 2 + (Y - 0.5) ** 2) / 0.05)))
    e = eid_map(sym, m, d).density
    assert np.allclose(e, e[::-1, :], atol=1e-9 * e.max())
    assert np.allclose(e, e[:, ::-1], atol=1e-9 * e.max())
    assert np.allclose(multi_target_eid([sym], m, d).density, e)
    assert np.allclose(multi_target_eid([sym, sym], m, d).density, e)
    a = normalize(BeliefGrid(ax, np.exp(-((X - 0.25) ** 2 + (Y - 0.3) ** 2) / 0.002)))
    b = normalize(BeliefGrid(ax, np.exp(-((X - 0.75) ** 2 + (Y - 0.7) ** 2) / 0.002)))
    both = multi_target_eid([a, b], m, d)
    by_hand = eid_map(a, m, d).raw + eid_map(b, m, d).raw
    assert np.allclose(both.density, by_hand / (by_hand.ravel() @ d.weights()))
    pts = d.points()
    dens = both.density.ravel()
    near_a = np.linalg.norm(pts - [0.25, 0.3], axis=1) < 0.25
    near_b = np.linalg.norm(pts - [0.75, 0.7], axis=1) < 0.25
    assert dens[near_a].max() > 10 * np.median(dens) and dens[near_b].max() > 10 * np.median(dens)


def test_entropy_examples():
    assert abs(entropy(line_grid(101))) < 1e-12
    g = line_grid(101)
    mass = np.zeros(101); mass[50] = 1.0
    d = normalize(g.with_mass(mass))
    assert np.isclose(entropy(d), np.log(cell_volume(d)))
    ax = [Axis("x", 0, 1, 31), Axis("y", 0, 2, 41)]
    px = normalize(BeliefGrid(ax[:1], np.exp(-((ax[0].nodes() - 0.3) ** 2) / 0.02)))
    py = normalize(BeliefGrid(ax[1:], np.exp(-((ax[1].nodes() - 1.0) ** 2) / 0.3)))
    joint = BeliefGrid(ax, np.outer(px.mass, py.mass))
    assert np.isclose(entropy(joint), entropy(px) + entropy(py))


def test_posterior_variance_shrinks_with_clean_data():
    m = ElectrosenseSurrogate(noise_sigma=SIGMA, standoff=0.1)
    t = TargetParams((0.42,), 0.0125, 0.1)
    rng = np.random.default_rng(0)
    shrink = 0
    runs = 20
    from eedi.domain import moments
    for r in range(runs):
        g = line_grid(201)
        prev = np.inf
        ok = True
        for _ in range(5):
            x = rng.uniform(0, 1, (30, 1))
            z = simulate_measurements([t], x, m, rng, noise_sigma=1e-9)
            g = bayes_update(g, x, z, ElectrosenseSurrogate(noise_sigma=1e-5, standoff=0.1, amplitude=m.amplitude))
            var = moments(g)[1][0, 0]
            ok &= var <= prev + 1e-15
            prev = var
        shrink += ok
    assert shrink >= 0.95 * runs
