import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from filacwe.acwe import (
    AcweConfig, AcweResult, _k_energy, _k_step, curvature, dirac, energy, evolve,
    filament_mask, heaviside, init_level_set, normalize, region_means,
)
from filacwe.errors import DimensionMismatchError, InvalidImageError
from filacwe.synth import two_region_case

from oracles import brute_energy


def reference_step(img, phi, cfg, outside):
    c1, c2 = region_means(img, phi)
    force = (cfg.mu * curvature(phi) - cfg.nu
             - cfg.lambda1 * (img - c1) ** 2 + cfg.lambda2 * (img - c2) ** 2)
    new = np.clip(phi + cfg.dt * dirac(phi, cfg.epsilon) * force, -1e6, 1e6)
    new[outside & (new > -1)] = -1.0
    return new


# ---- primitives

def test_heaviside_dirac_values():
    assert heaviside(np.array(0.0), 1.0) == 0.5
    assert dirac(np.array(0.0), 1.0) == pytest.approx(1 / np.pi)
    assert heaviside(np.array(1e9), 1.0) == pytest.approx(1.0)
    # dirac is the derivative of heaviside
    x, h = 0.7, 1e-6
    num = (heaviside(np.array(x + h), 2.0) - heaviside(np.array(x - h), 2.0)) / (2 * h)
    assert num == pytest.approx(dirac(np.array(x), 2.0), rel=1e-6)


def test_curvature_of_circle():
    yy, xx = np.indices((81, 81), dtype=float)
    phi = 20.0 - np.hypot(xx - 40, yy - 40)
    # inward-positive distance: kappa = -1/r on the zero level
    assert curvature(phi)[40, 60] == pytest.approx(-1 / 20, abs=0.01)


def test_normalize():
    assert np.array_equal(normalize(np.full((3, 3), 9.0)), np.zeros((3, 3)))
    out = normalize(np.array([[2.0, 4.0], [6.0, 10.0]]))
    assert out.min() == 0 and out.max() == 1 and out[0, 1] == 0.25


# ---- init

def test_checkerboard_values():
    phi = init_level_set(10, 10)
    assert phi[0, 0] == 0.0
    assert phi[2, 2] == pytest.approx(np.sin(2 * np.pi / 5) ** 2)


def test_circle_values():
    phi = init_level_set(100, 100, "circle")
    assert phi[50, 50] > 0 and phi[0, 0] < 0
    assert phi.max() == pytest.approx(100 / 3 - np.hypot(0.5, 0.5))


def test_init_roi_and_small():
    roi = np.zeros((8, 8), bool)
    roi[2:6, 2:6] = True
    phi = init_level_set(8, 8, roi=roi)
    assert np.all(phi[~roi] == -1.0)
    with pytest.raises(InvalidImageError):
        init_level_set(2, 8)


# ---- region means and energy

def test_region_means_examples():
    img = np.array([[0.0, 1.0], [2.0, 3.0]])
    assert region_means(img, np.array([[1.0, 1.0], [-1.0, -1.0]])) == (0.5, 2.5)
    assert region_means(img, -np.ones((2, 2))) == (1.5, 1.5)
    assert region_means(img, np.ones((2, 2))) == (1.5, 1.5)
    with pytest.raises(DimensionMismatchError):
        region_means(img, np.ones((3, 2)))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_region_means_against_loops(seed):
    rng = np.random.default_rng(seed)
    img = rng.uniform(0, 1, (7, 5))
    phi = rng.normal(size=(7, 5))
    ins = [img[p] for p in np.ndindex(img.shape) if phi[p] > 0]
    outs = [img[p] for p in np.ndindex(img.shape) if phi[p] <= 0]
    c1, c2 = region_means(img, phi)
    if ins and outs:
        assert c1 == pytest.approx(sum(ins) / len(ins))
        assert c2 == pytest.approx(sum(outs) / len(outs))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0, 1), st.floats(0, 1))
def test_energy_against_brute_force(seed, mu, nu):
    rng = np.random.default_rng(seed)
    img = rng.uniform(0, 1, (6, 8))
    phi = rng.normal(size=(6, 8)) * 3
    cfg = AcweConfig(mu=mu, nu=nu, lambda1=1.3, lambda2=0.4, epsilon=0.8)
    ref = brute_energy(img, phi, mu, nu, 1.3, 0.4, 0.8)
    assert energy(img, phi, cfg) == pytest.approx(ref, rel=1e-10, abs=1e-12)
    c1, c2 = region_means(img, phi)
    assert _k_energy(img, phi, c1, c2, 0.8, mu, nu, 1.3, 0.4) == pytest.approx(ref, rel=1e-10,
                                                                              abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_compiled_step_matches_reference(seed):
    rng = np.random.default_rng(seed)
    img = rng.uniform(0, 1, (9, 11))
    phi = rng.normal(size=img.shape) * 2
    outside = rng.random(img.shape) > 0.8
    cfg = AcweConfig(mu=0.2, nu=0.05)
    c1, c2 = region_means(img, phi)
    out = np.empty_like(phi)
    total, finite = _k_step(img, phi, c1, c2, cfg.epsilon, cfg.mu, cfg.nu, cfg.lambda1,
                            cfg.lambda2, cfg.dt, outside, out)
    ref = reference_step(img, phi, cfg, outside)
    assert finite
    assert np.allclose(out, ref, rtol=0, atol=1e-12)
    assert total == pytest.approx(np.abs(ref - phi).sum())


# ---- evolution

def test_two_region_recovery():
    img, disk = two_region_case(size=96, seed=3)
    res = evolve(img)
    fil = filament_mask(res, img)
    assert np.mean(fil == disk) > 0.99
    assert res.c1 < res.c2 or not res.mask.all()
    assert len(res.energy_trace) == res.iterations_run + 1
    assert len(res.delta_trace) == res.iterations_run


def test_callback_sees_region_means():
    img, _ = two_region_case(size=48, seed=1)
    norm = normalize(img)
    seen = []

    def cb(it, phi, c1, c2):
        seen.append(it)
        assert (c1, c2) == pytest.approx(region_means(norm, phi))

    res = evolve(img, AcweConfig(max_iters=15, tol=0), callback=cb)
    assert seen == list(range(1, 16)) and res.iterations_run == 15
    assert not res.converged


def test_huge_tol_stops_after_one():
    img, _ = two_region_case(size=32, seed=2)
    res = evolve(img, AcweConfig(tol=1e9))
    assert res.iterations_run == 1 and res.converged


def test_deterministic():
    img, _ = two_region_case(size=64, seed=5)
    a, b = evolve(img), evolve(img)
    assert np.array_equal(a.phi, b.phi) and a.energy_trace == b.energy_trace


def test_affine_invariance():
    img, _ = two_region_case(size=64, seed=7)
    a = evolve(img, AcweConfig(max_iters=60))
    b = evolve(0.5 * img + 20.0, AcweConfig(max_iters=60))
    assert np.array_equal(a.mask, b.mask)


def test_swap_symmetry_of_filament_mask():
    img, disk = two_region_case(size=64, seed=9)
    flipped, _ = two_region_case(size=64, seed=9, inside_level=204, outside_level=51)
    f1 = filament_mask(evolve(img), img)
    f2 = filament_mask(evolve(flipped), flipped)
    assert np.mean(f1 == disk) > 0.99
    assert np.mean(f2 == ~disk) > 0.99


def test_roi_outside_stays_negative():
    img, _ = two_region_case(size=48, seed=4)
    roi = np.zeros(img.shape, bool)
    roi[8:40, 8:40] = True
    res = evolve(img, AcweConfig(max_iters=30), roi=roi)
    assert np.all(res.phi[~roi] <= -1.0)


def test_filament_mask_rules():
    m = np.array([[True, False], [False, False]])
    keep = AcweResult(m, 0.1, 0.9, 1, [0.0, 0.0], True)
    flip = AcweResult(m, 0.9, 0.1, 1, [0.0, 0.0], True)
    tie = AcweResult(m, 0.5, 0.5, 1, [0.0, 0.0], True)
    assert np.array_equal(filament_mask(keep), m)
    assert np.array_equal(filament_mask(flip), ~m)
    assert np.array_equal(filament_mask(tie), m)
    with pytest.raises(DimensionMismatchError):
        filament_mask(keep, np.zeros((3, 3)))


def test_config_validation():
    for bad in (dict(mu=-1), dict(lambda1=0), dict(dt=0), dict(max_iters=0), dict(init="x")):
        with pytest.raises(ValueError):
            AcweConfig(**bad)


def test_energy_zero_cases():
    cfg = AcweConfig(mu=0.0, nu=0.0)
    rng = np.random.default_rng(0)
    assert energy(np.full((8, 8), 0.3), rng.normal(size=(8, 8)), cfg) == 0.0
    img = np.zeros((8, 8))
    img[:, 4:] = 1.0
    phi = np.where(img > 0, 1.0, -1.0)
    assert energy(img, phi, cfg) == 0.0
    assert region_means(img, phi) == (1.0, 0.0)
