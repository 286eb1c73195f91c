"""Objective-suite tests: declared optima, domain guards, noise model,
and the regret bookkeeping built on top of them."""

import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from eicbo.errors import ConsistencyError
from eicbo.testbed import (
    FUNCTION_IDS,
    TestFunction,
    evaluate,
    evaluate_batch,
    get_function,
    instantaneous_regret,
    observe,
    standardized,
    to_native,
)


class TestDeclaredOptima:
    def test_every_function_hits_its_optimum(self):
        for fid in FUNCTION_IDS:
            fn = get_function(fid)
            value = evaluate(fn, fn.unit_optimum)
            assert value == pytest.approx(fn.optimum_value, abs=1e-2), fid

    def test_rugged_surface_vanishes_at_center(self):
        fn = get_function("ackley2")
        assert evaluate(fn, [0.5, 0.5]) == pytest.approx(0.0, abs=1e-12)

    def test_product_surface_value_at_origin(self):
        fn = get_function("griewank6")
        # at the native origin the raw surface is 1 - 1 - 2.25 scaled by -1/0.47
        assert evaluate(fn, np.full(6, 0.5)) == pytest.approx(2.25 / 0.47, rel=1e-12)

    def test_four_peak_surface_optimum(self):
        fn = get_function("hartmann6")
        assert evaluate(fn, fn.unit_optimum) == pytest.approx(8.059, abs=1e-2)

    def test_no_random_point_beats_the_optimum(self):
        rng = np.random.default_rng(1234)
        for fid in FUNCTION_IDS:
            fn = get_function(fid)
            vals = evaluate_batch(fn, rng.uniform(size=(200_000, fn.dim)))
            assert vals.max() <= fn.optimum_value + 1e-2, fid

    def test_unit_optimum_lies_inside_the_cube(self):
        for fid in FUNCTION_IDS:
            u = get_function(fid).unit_optimum
            assert np.all(u >= 0.0) and np.all(u <= 1.0)


class TestEvaluation:
    def test_affine_map_round_trip(self):
        rng = np.random.default_rng(3)
        for fid in FUNCTION_IDS:
            fn = get_function(fid)
            U = rng.uniform(size=(50, fn.dim))
            X = to_native(fn, U)
            assert np.all(X >= fn.lower - 1e-12) and np.all(X <= fn.upper + 1e-12)
            back = (X - fn.lower) / (fn.upper - fn.lower)
            assert_allclose(back, U, atol=1e-12)

    def test_batch_agrees_with_scalar(self):
        rng = np.random.default_rng(4)
        for fid in FUNCTION_IDS:
            fn = get_function(fid)
            U = rng.uniform(size=(20, fn.dim))
            batch = evaluate_batch(fn, U)
            singles = np.array([evaluate(fn, u) for u in U])
            assert_allclose(batch, singles, rtol=1e-14)

    def test_dimension_checked(self):
        fn = get_function("ackley2")
        with pytest.raises(ValueError):
            evaluate(fn, [0.1, 0.2, 0.3])

    def test_unknown_id_rejected(self):
        with pytest.raises(ValueError):
            get_function("nope")


class TestObserve:
    def test_zero_noise_is_exact(self):
        fn = get_function("levy4")
        rng = np.random.default_rng(0)
        u = rng.uniform(size=4)
        assert observe(fn, u, 0.0, rng) == evaluate(fn, u)

    def test_fixed_seed_reproducible(self):
        fn = get_function("schwefel2")
        u = [0.3, 0.8]
        a = observe(fn, u, 0.5, np.random.default_rng(42))
        b = observe(fn, u, 0.5, np.random.default_rng(42))
        assert a == b

    def test_noise_moments(self):
        fn = get_function("schwefel2")
        u = [0.25, 0.75]
        truth = evaluate(fn, u)
        rng = np.random.default_rng(8)
        draws = np.array([observe(fn, u, 0.3, rng) for _ in range(100_000)])
        # sample mean within 4 sigma/sqrt(n), sample sd within 2%
        assert abs(draws.mean() - truth) <= 4 * 0.3 / math.sqrt(draws.size)
        assert draws.std() == pytest.approx(0.3, rel=0.02)

    def test_negative_noise_rejected(self):
        fn = get_function("schwefel2")
        with pytest.raises(ValueError):
            observe(fn, [0.5, 0.5], -1.0, np.random.default_rng(0))


class TestRegret:
    def test_matches_direct_difference(self):
        rng = np.random.default_rng(10)
        for fid in FUNCTION_IDS:
            fn = get_function(fid)
            for _ in range(5):
                u = rng.uniform(size=fn.dim)
                assert instantaneous_regret(fn, u) == pytest.approx(
                    fn.optimum_value - evaluate(fn, u), abs=1e-12
                )

    def test_regret_never_negative(self):
        fn = get_function("schwefel2")
        # the true surface tops out a hair above the published 4-digit value
        assert instantaneous_regret(fn, fn.unit_optimum) == 0.0

    def test_large_exceedance_is_a_consistency_error(self):
        bad = TestFunction(
            "bad", 1, 0.0, 1.0, np.array([0.0]), -1.0, lambda X: np.zeros(X.shape[0])
        )
        with pytest.raises(ConsistencyError):
            instantaneous_regret(bad, [0.5])


class TestCustomObjective:
    def test_harness_interface_accepts_user_surface(self):
        quad = TestFunction(
            "quad", 2, -1.0, 1.0, np.array([0.2, -0.4]), 0.0,
            lambda X: -np.sum((X - np.array([0.2, -0.4])) ** 2, axis=1),
        )
        assert evaluate(quad, quad.unit_optimum) == pytest.approx(0.0, abs=1e-14)
        assert instantaneous_regret(quad, [0.0, 0.0]) > 0


class TestStandardized:
    def test_already_standardized_surfaces_pass_through(self):
        for function_id in FUNCTION_IDS:
            if function_id == "ackley2":
                continue
            fn = get_function(function_id)
            assert standardized(fn) is fn

    def test_ackley_moments_become_standard(self):
        std = standardized(get_function("ackley2"))
        rng = np.random.default_rng(5)
        vals = std.surface(std.lower + (std.upper - std.lower) * rng.uniform(size=(400_000, 2)))
        assert abs(vals.mean()) <= 0.01
        assert abs(vals.std() - 1.0) <= 0.01

    def test_ackley_scaling_is_affine_and_consistent(self):
        raw = get_function("ackley2")
        std = standardized(raw)
        assert std.optimum_value == (raw.optimum_value + 20.185) / 2.379
        assert np.array_equal(std.optimum_point, raw.optimum_point)
        rng = np.random.default_rng(6)
        U = rng.uniform(size=(64, 2))
        assert_allclose(
            evaluate_batch(std, U), (evaluate_batch(raw, U) + 20.185) / 2.379, rtol=0, atol=1e-12
        )
        # the declared optimum still tops a random search on the new scale
        samples = std.surface(std.lower + (std.upper - std.lower) * rng.uniform(size=(200_000, 2)))
        assert samples.max() <= std.optimum_value + 1e-2
        assert evaluate(std, std.unit_optimum) == pytest.approx(std.optimum_value, abs=1e-12)
