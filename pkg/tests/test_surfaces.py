"""Synthetic capacity surfaces and the brute-force grid oracle."""

from __future__ import annotations

import numpy as np
import pytest

from knobtuner.space import InvalidSettingError, Parameter, ParameterSpace
from knobtuner.surfaces import (
    SyntheticSurface,
    brute_force,
    get_surface,
    grid_axes,
    surface_backend,
    surface_bumpy,
    surface_catalog,
    surface_composed,
    surface_frontend,
    surface_quad1d,
    surface_spiky,
    surface_steplike,
)


class TestSteplike:
    def test_default_baseline_value(self):
        surface = surface_steplike()
        assert surface.value(surface.default_setting()) == 9815.0

    def test_peak_value_reached_at_known_corner(self):
        surface = surface_steplike()
        best = ("ON", 16384.0, 20000.0, 16, 9)
        assert surface.value(best) == 118184.0

    def test_grid_oracle_attains_peak(self):
        surface = surface_steplike()
        oracle = brute_force(surface, resolution=25)
        assert oracle.best_value == 118184.0
        assert oracle.best_setting[0] == "ON"

    def test_values_positive_everywhere(self):
        surface = surface_steplike()
        rng = np.random.default_rng(0)
        space = surface.space
        for _ in range(2000):
            point = rng.random(space.dimension)
            from knobtuner.space import from_unit

            assert surface.value(from_unit(point, space)) > 0.0

    def test_monotone_in_each_capacity_knob(self):
        surface = surface_steplike()
        lo = surface.value(("ON", 128.0, 100.0, 0, 1))
        mid = surface.value(("ON", 8000.0, 100.0, 0, 1))
        hi = surface.value(("ON", 16384.0, 100.0, 0, 1))
        assert lo < mid < hi

    def test_invalid_setting_rejected(self):
        surface = surface_steplike()
        with pytest.raises(InvalidSettingError):
            surface.value(("SOMETIMES", 128.0, 100.0, 0, 1))


class TestBumpy:
    def grid_local_maxima(self, surface: SyntheticSurface, flag: bool, n: int = 100) -> int:
        # Count strict 8-neighbor maxima over an n x n grid of one flag slice.
        space = surface.space
        xs = np.linspace(space["max_threads"].lo, space["max_threads"].hi, n)
        ys = np.linspace(space["accept_count"].lo, space["accept_count"].hi, n)
        grid = np.asarray(
            [[surface.value((x, y, flag)) for y in ys] for x in xs]
        )
        count = 0
        for i in range(1, n - 1):
            for j in range(1, n - 1):
                patch = grid[i - 1 : i + 2, j - 1 : j + 2]
                if grid[i, j] == patch.max() and np.sum(patch == grid[i, j]) == 1:
                    count += 1
        return count

    def test_many_local_maxima_per_flag_slice(self):
        surface = surface_bumpy()
        assert self.grid_local_maxima(surface, False) >= 10
        assert self.grid_local_maxima(surface, True) >= 10

    def test_flag_moves_the_peak(self):
        surface = surface_bumpy()
        space = surface.space

        def best_on_slice(flag):
            xs = np.linspace(space["max_threads"].lo, space["max_threads"].hi, 200)
            ys = np.linspace(space["accept_count"].lo, space["accept_count"].hi, 200)
            best, arg = -np.inf, None
            for x in xs:
                for y in ys:
                    v = surface.value((x, y, flag))
                    if v > best:
                        best, arg = v, (x, y)
            return best, arg

        best_false, arg_false = best_on_slice(False)
        best_true, arg_true = best_on_slice(True)
        assert arg_false != arg_true
        # Both flag values lead to comparable peaks, so neither slice is a
        # shortcut: the search has to localize the narrow peak either way.
        assert abs(best_false - best_true) / max(best_false, best_true) < 0.05

    def test_deterministic_without_noise(self):
        surface = surface_bumpy()
        setting = (100.0, 700.0, True)
        assert surface.value(setting) == surface.value(setting)

    def test_values_in_plausible_band(self):
        surface = surface_bumpy()
        rng = np.random.default_rng(1)
        from knobtuner.space import from_unit

        for _ in range(500):
            setting = from_unit(rng.random(3), surface.space)
            v = surface.value(setting)
            assert 100.0 < v < 500.0


class TestSpiky:
    def test_spike_dominates_smooth_neighborhood(self):
        surface = surface_spiky()
        at_spike = surface.value((4, 8192.0, 512))
        beside_spike = surface.value((5, 8192.0, 512))
        assert at_spike / beside_spike > 1.5

    def test_ablated_surface_peaks_at_smooth_corner(self):
        ablated = surface_spiky(spike_height=0.0)
        oracle = brute_force(ablated, resolution=16)
        assert oracle.best_setting == (16, 8192.0, 512)
        assert oracle.best_value == ablated.value((16, 8192.0, 512))

    def test_spiked_oracle_prefers_spike(self):
        surface = surface_spiky()
        oracle = brute_force(surface, resolution=16)
        assert oracle.best_setting[0] == 4


class TestQuad1d:
    def test_peak_at_three(self):
        surface = surface_quad1d()
        oracle = brute_force(surface, resolution=10001)
        assert oracle.best_setting == (3.0,)
        assert oracle.best_value == 0.0

    def test_symmetry(self):
        surface = surface_quad1d()
        assert surface.value((2.0,)) == surface.value((4.0,))


class TestComposition:
    def test_frontend_is_constant(self):
        surface = surface_frontend()
        rng = np.random.default_rng(2)
        from knobtuner.space import from_unit

        values = {
            surface.value(from_unit(rng.random(surface.space.dimension), surface.space))
            for _ in range(50)
        }
        assert values == {100.0}

    def test_backend_range(self):
        surface = surface_backend()
        assert surface.value(surface.default_setting()) == 100.0
        assert surface.value((128, 32)) == 163.0
        oracle = brute_force(surface, resolution=25)
        assert oracle.best_value == 163.0

    def test_composed_is_min_of_parts(self):
        composed = get_surface("frontend+backend")
        rng = np.random.default_rng(3)
        from knobtuner.space import from_unit

        frontend, backend = surface_frontend(), surface_backend()
        for _ in range(200):
            setting = from_unit(rng.random(composed.space.dimension), composed.space)
            fe = setting[: frontend.space.dimension]
            be = setting[frontend.space.dimension :]
            expected = min(frontend.value(fe), backend.value(be))
            assert composed.value(setting) == expected

    def test_composed_capacity_capped_by_weakest_stage(self):
        composed = get_surface("frontend+backend")
        oracle = brute_force(composed, resolution=6)
        assert oracle.best_value == 100.0

    def test_name_collision_rejected(self):
        surface = surface_backend()
        with pytest.raises(ValueError):
            surface_composed(surface, surface)

    def test_composed_id(self):
        composed = surface_composed(surface_frontend(), surface_backend())
        assert composed.surface_id == "frontend+backend"


class TestNoise:
    def test_noise_bounded_and_seeded(self):
        surface = surface_quad1d().with_noise(0.5, noise_seed=7)
        setting = (2.0,)
        clean = surface_quad1d().value(setting)
        noisy = surface.value(setting)
        assert noisy != clean
        assert abs(noisy - clean) <= 0.5
        assert surface.value(setting) == noisy

    def test_noise_is_order_independent(self):
        surface = surface_quad1d().with_noise(0.5, noise_seed=7)
        a_first = surface.value((1.0,))
        surface.value((9.0,))
        surface.value((4.0,))
        assert surface.value((1.0,)) == a_first

    def test_different_noise_seeds_differ(self):
        a = surface_quad1d().with_noise(0.5, noise_seed=1).value((2.0,))
        b = surface_quad1d().with_noise(0.5, noise_seed=2).value((2.0,))
        assert a != b

    def test_zero_noise_is_pure(self):
        assert surface_quad1d().with_noise(0.0).value((2.0,)) == surface_quad1d().value((2.0,))


class TestCatalogAndOracle:
    def test_catalog_contents(self):
        ids = surface_catalog()
        for expected in ("steplike", "bumpy", "spiky", "quad1d", "frontend", "backend"):
            assert expected in ids
        assert any("+" in i for i in ids)

    def test_get_surface_unknown_lists_catalog(self):
        with pytest.raises(ValueError) as err:
            get_surface("mystery")
        assert "steplike" in str(err.value)

    def test_grid_axes_discrete_dims_enumerated(self):
        space = ParameterSpace.of(
            Parameter.integer("n", 0, 4),
            Parameter.boolean("b"),
            Parameter.enum("e", ("A", "B", "C")),
            Parameter.real("x", 0.0, 1.0),
        )
        axes = grid_axes(space, resolution=7)
        assert axes[0] == [0, 1, 2, 3, 4]
        assert axes[1] == [False, True]
        assert axes[2] == ["A", "B", "C"]
        assert len(axes[3]) == 7
        assert axes[3][0] == 0.0 and axes[3][-1] == 1.0

    def test_grid_axes_wide_int_subsampled(self):
        space = ParameterSpace.of(Parameter.integer("n", 0, 10**6))
        axes = grid_axes(space, resolution=11)
        assert len(axes[0]) == 11
        assert axes[0][0] == 0 and axes[0][-1] == 10**6
        assert all(isinstance(v, int) for v in axes[0])

    def test_brute_force_counts_evaluations(self):
        space = ParameterSpace.of(Parameter.integer("n", 0, 3), Parameter.boolean("b"))

        def fn(setting):
            return float(setting[0]) + (10.0 if setting[1] else 0.0)

        surface = SyntheticSurface(surface_id="toy", space=space, fn=fn)
        oracle = brute_force(surface, resolution=25)
        assert oracle.evaluation_count == 8
        assert oracle.best_setting == (3, True)
        assert oracle.best_value == 13.0

    def test_brute_force_cap_enforced(self):
        surface = surface_steplike()
        with pytest.raises(ValueError):
            brute_force(surface, resolution=25, cap=100)

    def test_oracle_ties_break_in_axis_order(self):
        space = ParameterSpace.of(Parameter.integer("n", 0, 3))
        surface = SyntheticSurface(surface_id="flat", space=space, fn=lambda s: 1.0)
        oracle = brute_force(surface, resolution=25)
        assert oracle.best_setting == (0,)
