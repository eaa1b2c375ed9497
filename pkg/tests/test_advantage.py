import numpy as np
import pytest

from analysis.advantage import (
    advantages_for, loo_advantage, loo_advantages, loo_per_task, return_to_go, scale_to_unit_rms,
    standardize_per_task,
)
from ml.errors import ConfigurationError, DimensionError, DomainError


def test_return_to_go():
    np.testing.assert_allclose(return_to_go([1.0, 2.0, 3.0]), [6.0, 5.0, 3.0])
    with pytest.raises(DomainError):
        return_to_go([])


def test_loo_example():
    np.testing.assert_allclose(loo_advantages([1.0, 2.0, 3.0]), [-1.5, 0.0, 1.5])
    assert loo_advantage([1.0, 2.0, 3.0], 0) == -1.5


def test_loo_matches_explicit_baseline():
    r = np.random.default_rng(0).standard_normal(7)
    explicit = [r[k] - np.delete(r, k).mean() for k in range(7)]
    np.testing.assert_allclose(loo_advantages(r), explicit, rtol=1e-12)
    assert loo_advantages(r).sum() == pytest.approx(0.0, abs=1e-12)


def test_loo_needs_two_samples():
    with pytest.raises(DomainError):
        loo_advantages([4.0])
    with pytest.raises(DomainError):
        loo_advantage([1.0, 2.0], 5)


def test_loo_per_task_groups_independently():
    returns = [1.0, 2.0, 3.0, 10.0, 20.0, 7.0]
    tasks = [0, 0, 0, 1, 1, 2]
    out = loo_per_task(returns, tasks)
    np.testing.assert_allclose(out, [-1.5, 0.0, 1.5, -10.0, 10.0, 0.0])


def test_standardize_example():
    batch = standardize_per_task([1.0, 2.0, 3.0], [0, 0, 0])
    np.testing.assert_allclose(batch.advantages, [-1.2247449, 0.0, 1.2247449], rtol=1e-6)


def test_standardize_zero_mean_unit_std_per_task():
    rng = np.random.default_rng(1)
    returns = np.concatenate([rng.normal(5.0, 2.0, 40), rng.normal(-3.0, 0.1, 25)])
    tasks = np.array([0] * 40 + [1] * 25)
    adv = standardize_per_task(returns, tasks).advantages
    for task in (0, 1):
        group = adv[tasks == task]
        assert group.mean() == pytest.approx(0.0, abs=1e-12)
        assert group.std() == pytest.approx(1.0, rel=1e-12)


def test_constant_and_singleton_groups_get_zero():
    adv = standardize_per_task([2.0, 2.0, 2.0, 9.0], [0, 0, 0, 1]).advantages
    assert np.all(adv == 0.0)


def test_advantage_source_switch():
    returns, tasks = [1.0, 2.0, 3.0], [0, 0, 0]
    np.testing.assert_allclose(advantages_for(returns, tasks, "loo"), [-1.2247449, 0.0, 1.2247449], rtol=1e-6)
    np.testing.assert_allclose(advantages_for(returns, tasks), standardize_per_task(returns, tasks).advantages)
    with pytest.raises(ConfigurationError):
        advantages_for(returns, tasks, "critic")
    with pytest.raises(DimensionError):
        advantages_for(returns, [0, 0], "loo")


def test_loo_source_has_unit_rms_and_keeps_task_spread():
    returns = [1.0, 2.0, 3.0, 10.0, 20.0]
    tasks = [0, 0, 0, 1, 1]
    adv = advantages_for(returns, tasks, "loo")
    assert np.sqrt(np.mean(adv ** 2)) == pytest.approx(1.0, rel=1e-12)
    # task 1 spreads 10 / 1.5 times wider than task 0 before and after scaling
    assert adv[4] / adv[2] == pytest.approx(10.0 / 1.5, rel=1e-12)


def test_unit_rms_leaves_zero_vectors_alone():
    np.testing.assert_array_equal(scale_to_unit_rms([0.0, 0.0]), [0.0, 0.0])
    np.testing.assert_array_equal(advantages_for([4.0, 4.0, 1.0], [0, 0, 1], "loo"), [0.0, 0.0, 0.0])


@pytest.mark.parametrize("shift", [-50.0, 0.3, 1e4])
def test_loo_ignores_a_constant_shift(shift):
    r = np.random.default_rng(2).normal(3.0, 2.0, 9)
    np.testing.assert_allclose(loo_advantages(r + shift), loo_advantages(r), atol=1e-9)


@pytest.mark.parametrize("scale, shift", [(2.0, 0.0), (0.01, 5.0), (37.0, -120.0)])
def test_standardize_ignores_positive_affine_maps(scale, shift):
    rng = np.random.default_rng(3)
    returns = rng.normal(0.0, 1.5, 30)
    tasks = rng.integers(0, 3, 30)
    base = standardize_per_task(returns, tasks).advantages
    moved = standardize_per_task(scale * returns + shift, tasks).advantages
    np.testing.assert_allclose(moved, base, atol=1e-9)
