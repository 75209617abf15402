import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import special_ortho_group

from spherebif.equilibrium import ModelParams, find_eta
from spherebif.particle_sim import (
    ParticleEnsemble,
    Scheme,
    SimConfig,
    SimulationError,
    initial_ensemble,
    make_rng,
    run,
    run_product,
    sample_vmf,
    step,
    tangent_project,
)
from spherebif.product_spheres import parse_product_spec
from spherebif.special_math import scaled_moments

SCHEMES = [Scheme.PROJECT_RENORMALIZE, Scheme.GEODESIC_STEP]


def unit(v):
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v)


def test_tangent_project_examples():
    x = unit([1.0, 2.0, 2.0])
    assert np.allclose(tangent_project(x, x), 0.0, atol=1e-15)
    w = unit([2.0, -1.0, 0.0])
    assert abs(w @ x) < 1e-15
    np.testing.assert_allclose(tangent_project(w, x), w, atol=1e-15)
    np.testing.assert_allclose(tangent_project(x + 3 * w, x), 3 * w, atol=1e-14)


@settings(max_examples=50)
@given(seed=st.integers(0, 2**32 - 1), d=st.integers(1, 6))
def test_tangent_project_orthogonal(seed, d):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((5, d + 1))
    x /= np.linalg.norm(x, axis=1, keepdims=True)
    v = 10 * rng.standard_normal((5, d + 1))
    p = tangent_project(v, x)
    assert np.all(np.abs(np.sum(p * x, axis=1)) <= 1e-12 * (1 + np.linalg.norm(v, axis=1)))


def test_config_validation():
    with pytest.raises(ValueError):
        SimConfig(particle_count=0)
    with pytest.raises(ValueError):
        SimConfig(dt=1.0, t_end=1.0)
    with pytest.raises(ValueError):
        SimConfig(burn_in=30.0, t_end=30.0)
    with pytest.raises(ValueError):
        SimConfig(dt=0.05).check_stability(2.0)
    SimConfig(dt=0.01).check_stability(9.99)


@pytest.mark.parametrize("scheme", SCHEMES)
def test_antipodal_pair_is_fixed(scheme):
    x = np.array([[0.0, 0.6, 0.8], [0.0, -0.6, -0.8]])
    ens = ParticleEnsemble(x.copy())
    cfg = SimConfig(particle_count=2, dt=1e-2, scheme=scheme)
    for _ in range(50):
        ens = step(ens, ModelParams(2, 5.0), cfg, noise=np.zeros_like(x))
    np.testing.assert_allclose(ens.positions, x, atol=1e-15)
    assert ens.time == pytest.approx(0.5)
    assert ens.steps == 50


@pytest.mark.parametrize("scheme", SCHEMES)
def test_consensus_is_fixed(scheme):
    x = np.tile(unit([1.0, -1.0, 0.5, 2.0]), (7, 1))
    ens = ParticleEnsemble(x.copy())
    cfg = SimConfig(particle_count=7, dt=1e-2, scheme=scheme)
    for _ in range(20):
        ens = step(ens, ModelParams(3, 8.0), cfg, noise=np.zeros_like(x))
    np.testing.assert_allclose(ens.positions, x, atol=1e-15)
    assert ens.order_parameter == pytest.approx(1.0)


@pytest.mark.parametrize("scheme,tol", [(Scheme.PROJECT_RENORMALIZE, 1e-9), (Scheme.GEODESIC_STEP, 1e-12)])
def test_unit_norm_preserved(scheme, tol):
    cfg = SimConfig(particle_count=300, dt=5e-3, t_end=5.0, burn_in=0.0, seed=11, scheme=scheme)
    ens = initial_ensemble(3, cfg)
    worst = 0.0
    for _ in range(400):
        ens = step(ens, ModelParams(3, 10.0), cfg)
        worst = max(worst, float(np.max(np.abs(np.linalg.norm(ens.positions, axis=1) - 1.0))))
    assert worst <= tol


def test_step_rejects_non_finite():
    ens = ParticleEnsemble(np.array([[1.0, 0.0], [0.0, 1.0]]))
    with pytest.raises(SimulationError, match="step 1"):
        step(ens, ModelParams(1, 1.0), SimConfig(particle_count=2), noise=np.array([[np.nan, 0.0], [0.0, 0.0]]))


@pytest.mark.parametrize("scheme", SCHEMES)
def test_rotation_equivariance(scheme):
    d = 3
    cfg = SimConfig(particle_count=50, dt=1e-2, t_end=1.0, burn_in=0.0, scheme=scheme)
    params = ModelParams(d, 6.0)
    rot = special_ortho_group.rvs(d + 1, random_state=5)
    base = initial_ensemble(d, cfg, seed=2)
    turned = ParticleEnsemble(base.positions @ rot.T)
    noise_rng = make_rng(9)
    for _ in range(100):
        xi = noise_rng.standard_normal((50, d + 1))
        base = step(base, params, cfg, noise=xi)
        turned = step(turned, params, cfg, noise=xi @ rot.T)
    np.testing.assert_allclose(turned.positions, base.positions @ rot.T, atol=1e-10)


def test_free_diffusion_equilibrates_to_uniform():
    # at kappa = 0 particles are independent Brownian motions on S^2
    d, n = 2, 20_000
    cfg = SimConfig(particle_count=n, dt=5e-3, t_end=10.0, burn_in=0.0)
    e = unit([0.0, 1.0, 0.0])
    ens = ParticleEnsemble(np.tile(e, (n, 1)), rng=make_rng(4))
    for _ in range(800):
        ens = step(ens, ModelParams(d, 0.0), cfg)
    c = ens.positions @ e
    se = 1 / math.sqrt(n)
    assert abs(c.mean()) <= 4 * se * math.sqrt(1 / 3)
    assert abs(np.mean(c * c) - 1 / (d + 1)) <= 4 * se * math.sqrt(4 / 45)
    assert np.linalg.norm(ens.positions.mean(axis=0)) <= 4 * se


def test_run_is_deterministic():
    cfg = SimConfig(particle_count=100, dt=1e-2, t_end=2.0, burn_in=1.0, seed=42)
    a = run(ModelParams(2, 5.0), cfg)
    b = run(ModelParams(2, 5.0), cfg)
    np.testing.assert_array_equal(a.com_norm_series, b.com_norm_series)
    assert a.mean_com_norm == b.mean_com_norm
    c = run(ModelParams(2, 5.0), cfg, seed=43)
    assert not np.array_equal(a.com_norm_series, c.com_norm_series)
    assert len(a.times) == 201 and a.times[-1] == pytest.approx(2.0)
    assert np.all((a.com_norm_series >= 0) & (a.com_norm_series <= 1))
    assert a.stderr >= 0


def test_run_checks_drift_guard():
    with pytest.raises(ValueError):
        run(ModelParams(2, 200.0), SimConfig(particle_count=10, dt=1e-3, t_end=1.0, burn_in=0.5))


@pytest.mark.slow
def test_circle_run_matches_prediction():
    params = ModelParams(1, 4.0)
    stats = run(params, SimConfig(particle_count=2000, seed=3))
    assert abs(stats.mean_com_norm - find_eta(params) / 4.0) <= 0.05


@pytest.mark.slow
def test_schemes_agree():
    params = ModelParams(2, 5.0)
    base = dict(particle_count=500, dt=1e-3, t_end=20.0, burn_in=5.0, seed=8)
    a = run(params, SimConfig(scheme=Scheme.PROJECT_RENORMALIZE, **base))
    b = run(params, SimConfig(scheme=Scheme.GEODESIC_STEP, **base))
    assert abs(a.mean_com_norm - b.mean_com_norm) <= 2 * math.hypot(a.stderr, b.stderr)


def coupled_means(params, n, t_end, burn_in, base_dt, levels, seed):
    """Order-parameter means at dt = base_dt * 2**k driven by one Brownian path."""
    d = params.d
    steps = int(round(t_end / base_dt))
    start = initial_ensemble(d, SimConfig(particle_count=n, dt=base_dt, t_end=t_end), seed=seed)
    noise_rng = make_rng(seed + 1)
    ens = [ParticleEnsemble(start.positions.copy()) for _ in levels]
    cfgs = [SimConfig(particle_count=n, dt=base_dt * 2**k, t_end=t_end) for k in levels]
    pending = [np.zeros((n, d + 1)) for _ in levels]
    sums = [0.0 for _ in levels]
    counts = [0 for _ in levels]
    for i in range(1, steps + 1):
        xi = noise_rng.standard_normal((n, d + 1))
        for j, k in enumerate(levels):
            pending[j] += xi
            if i % 2**k == 0:
                # summed increments of 2**k fine steps, rescaled to unit variance
                ens[j] = step(ens[j], params, cfgs[j], noise=pending[j] / math.sqrt(2**k))
                pending[j][:] = 0.0
                if ens[j].time >= burn_in - 1e-9:
                    sums[j] += ens[j].order_parameter
                    counts[j] += 1
    return [s / c for s, c in zip(sums, counts)]


@pytest.mark.slow
def test_dt_convergence_trend():
    m4, m8, m16 = coupled_means(ModelParams(2, 5.0), 1000, 12.0, 4.0, 4e-3, (0, 1, 2), seed=21)
    assert abs(m8 - m4) < abs(m8 - m16)


@pytest.mark.parametrize("d", [1, 2, 3])
@pytest.mark.parametrize("eta", [0.5, 5.0, 50.0])
def test_vmf_moments(d, eta):
    n = 100_000
    x = sample_vmf(eta, d, n, seed=17)
    assert x.shape == (n, d + 1)
    assert np.allclose(np.linalg.norm(x, axis=1), 1.0, atol=1e-12)
    c = x[:, 0]
    i0, i1, i2 = scaled_moments(eta, d, (0, 1, 2))
    se1 = c.std(ddof=1) / math.sqrt(n)
    se2 = (c * c).std(ddof=1) / math.sqrt(n)
    assert abs(c.mean() - i1 / i0) <= 4 * se1
    assert abs(np.mean(c * c) - i2 / i0) <= 4 * se2


def test_vmf_examples():
    x = sample_vmf(0.0, 2, 50_000, seed=1)
    assert np.all(np.abs(x.mean(axis=0)) <= 4 / math.sqrt(3 * 50_000))
    params = ModelParams(2, 5.0)
    eta = find_eta(params)
    y = sample_vmf(eta, 2, 50_000, seed=2)
    se = y[:, 0].std(ddof=1) / math.sqrt(50_000)
    assert abs(y[:, 0].mean() - eta / 5.0) <= 3 * se
    assert sample_vmf(50.0, 2, 10_000, seed=3)[:, 0].mean() > 0.95
    with pytest.raises(ValueError):
        sample_vmf(-1.0, 2, 10, seed=0)


def test_vmf_axis_rotation():
    axis = unit([1.0, -2.0, 0.5, 0.0])
    x = sample_vmf(8.0, 3, 40_000, seed=6, axis=axis)
    i0, i1 = scaled_moments(8.0, 3, (0, 1))
    m = x.mean(axis=0)
    assert m @ axis == pytest.approx(i1 / i0, abs=4e-3)
    assert np.linalg.norm(m - (m @ axis) * axis) <= 4e-3
    same = sample_vmf(8.0, 3, 100, seed=6, axis=[1.0, 0.0, 0.0, 0.0])
    np.testing.assert_array_equal(same, sample_vmf(8.0, 3, 100, seed=6))


def test_run_product_block_structure_and_threads():
    spec = parse_product_spec("S1^2xS2", 3.0)
    cfg = SimConfig(particle_count=64, dt=1e-2, t_end=1.0, burn_in=0.5, seed=5)
    one = run_product(spec, cfg, threads=1)
    many = run_product(spec, cfg, threads=3)
    assert [k for k, _ in one] == [(1, 0), (1, 1), (2, 0)]
    for (_, a), (_, b) in zip(one, many):
        np.testing.assert_array_equal(a.com_norm_series, b.com_norm_series)
    assert not np.array_equal(one[0][1].com_norm_series, one[1][1].com_norm_series)


@pytest.mark.slow
def test_run_product_case_split():
    # near threshold the growth rate is small, so equilibration needs a long burn-in
    spec = parse_product_spec("S1xS2", 2.5)
    cfg = SimConfig(particle_count=1000, dt=2e-3, t_end=40.0, burn_in=20.0, seed=12)
    (_, s1), (_, s2) = run_product(spec, cfg)
    assert abs(s1.mean_com_norm - find_eta(ModelParams(1, 2.5)) / 2.5) <= 0.05
    assert s2.mean_com_norm <= 0.1


def test_run_product_low_kappa_stays_uniform():
    spec = parse_product_spec("S1xS3", 0.1)
    cfg = SimConfig(particle_count=1000, dt=1e-2, t_end=4.0, burn_in=2.0, seed=1)
    for _, stats in run_product(spec, cfg):
        assert stats.mean_com_norm <= 0.1
