import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from crystalspiral.spiral_ode import (DiscreteSpiral, EvolutionParams, NoGeneration, SpiralError,
                                      SpiralPolyline, SpiralState, coefficients, is_simple,
                                      segments_intersect)
from crystalspiral.wulff import WulffShape, preset_spec, wulff_shape_from_support

SQUARE = wulff_shape_from_support(preset_spec("square"))
TRIANGLE = wulff_shape_from_support(preset_spec("triangle"))
PARAMS = EvolutionParams(1.0, 0.02)


@pytest.fixture(scope="module")
def square_run():
    model = DiscreteSpiral(SQUARE, PARAMS)
    return model, model.simulate(1.0, np.linspace(0, 1, 21))


class TestCoefficients:
    def test_square(self):
        c = coefficients(SQUARE)
        np.testing.assert_allclose(c.b, 0, atol=1e-15)
        np.testing.assert_allclose(c.c_plus, 1)
        np.testing.assert_allclose(c.c_minus, 1)

    def test_triangle(self):
        c = coefficients(TRIANGLE)
        np.testing.assert_allclose(c.b, -2 / math.sqrt(3))
        np.testing.assert_allclose(c.c_plus, 2 / math.sqrt(3))
        np.testing.assert_allclose(c.c_minus, 2 / math.sqrt(3))

    def test_hexagon(self):
        hexagon = WulffShape(np.pi * np.arange(6) / 3, np.ones(6))
        c = coefficients(hexagon)
        np.testing.assert_allclose(c.b, 2 / math.sqrt(3))
        np.testing.assert_allclose(c.c_plus, 2 / math.sqrt(3))

    def test_mobility_scales(self):
        slow = WulffShape(SQUARE.phi, SQUARE.length, [2.0, 1.0, 1.0, 1.0])
        c = coefficients(slow)
        assert c.c_plus[3] == pytest.approx(0.5)  # c_3^+ uses beta_0
        assert c.c_minus[1] == pytest.approx(0.5)  # c_1^- uses beta_0

    def test_rejects_wide_gap(self):
        with pytest.raises(ValueError):
            coefficients(WulffShape([0.0, 0.2, 0.4], [1.0, 1.0, 1.0]))


class TestRhs:
    def test_equilibrium_interior_rows(self):
        model = DiscreteSpiral(TRIANGLE, PARAMS)
        k = 7
        d = np.array([PARAMS.rho_c * TRIANGLE.length[j % 3] / PARAMS.U for j in range(1, k + 1)])
        rhs = model.rhs(SpiralState(0.0, d))
        np.testing.assert_allclose(rhs[1:-1], 0, atol=1e-12)
        np.testing.assert_allclose(rhs[-1], 0, atol=1e-12)

    @given(st.floats(0, 5))
    def test_single_facet_speed(self, d1):
        model = DiscreteSpiral(SQUARE, PARAMS)
        assert model.rhs(SpiralState(0.0, np.array([d1])))[0] == pytest.approx(1.0)

    def test_newest_row(self):
        model = DiscreteSpiral(SQUARE, PARAMS)
        rhs = model.rhs(SpiralState(0.0, np.array([0.02, 0.0])))
        assert rhs[-1] == pytest.approx(-1.0)

    def test_rejects_nonpositive_interior(self):
        model = DiscreteSpiral(SQUARE, PARAMS)
        with pytest.raises(SpiralError):
            model.rhs(SpiralState(0.0, np.array([0.0, 0.01])))

    def test_params_validated(self):
        with pytest.raises(ValueError):
            EvolutionParams(0.0, 0.02)


class TestStepping:
    def test_linear_growth_exact(self):
        model = DiscreteSpiral(SQUARE, PARAMS)
        st1 = model.rk4_step(SpiralState.initial(), 1e-6)
        assert st1.d[0] == 1e-6

    def test_zero_step(self):
        model = DiscreteSpiral(TRIANGLE, PARAMS)
        s0 = SpiralState(0.3, np.array([0.05, 0.03, 0.01]))
        np.testing.assert_array_equal(model.rk4_step(s0, 0.0).d, s0.d)

    def test_first_generation_time(self):
        model = DiscreteSpiral(SQUARE, PARAMS)
        st2, t2 = model.advance_until_generation(SpiralState.initial())
        assert abs(t2 - 0.04) <= 1e-10
        assert st2.d[0] == pytest.approx(0.04, abs=1e-10)

    def test_threshold(self):
        assert DiscreteSpiral(SQUARE, PARAMS).threshold(1) == pytest.approx(0.04)

    def test_no_generation(self):
        model = DiscreteSpiral(SQUARE, PARAMS)
        with pytest.raises(NoGeneration):
            model.advance_until_generation(SpiralState.initial(), t_max=0.01)

    def test_add_facet(self):
        s2 = DiscreteSpiral.add_facet(SpiralState(0.04, np.array([0.04]), [0.0]))
        assert s2.k == 2 and s2.d[-1] == 0.0 and s2.generation_times == [0.0, 0.04]

    def test_single_event_by_004(self):
        traj = DiscreteSpiral(SQUARE, PARAMS).simulate(0.04)
        state = traj[-1][0]
        assert state.k == 2
        assert state.generation_times[1] == pytest.approx(0.04, abs=1e-10)

    def test_zero_horizon(self):
        traj = DiscreteSpiral(SQUARE, PARAMS).simulate(0.0)
        assert len(traj) == 1 and traj[0][0].k == 1 and traj[0][0].d[0] == 0.0

    def test_euler_oracle(self):
        rk = DiscreteSpiral(SQUARE, PARAMS, dt=1e-6).simulate(0.1)[-1][0]
        eu = DiscreteSpiral(SQUARE, PARAMS, dt=1e-8, method="euler").simulate(0.1)[-1][0]
        assert rk.k == eu.k
        np.testing.assert_allclose(rk.d, eu.d, atol=1e-6, rtol=0)

    def test_step_halving(self):
        a = DiscreteSpiral(SQUARE, PARAMS, dt=1e-6).simulate(0.4)[-1][0]
        b = DiscreteSpiral(SQUARE, PARAMS, dt=5e-7).simulate(0.4)[-1][0]
        assert a.k == b.k
        np.testing.assert_allclose(a.generation_times, b.generation_times, atol=1e-8)


class TestTrajectory:
    def test_generation_times_increase(self, square_run):
        _, traj = square_run
        times = traj[-1][0].generation_times
        assert times[0] == 0.0
        assert np.all(np.diff(times) > 0)
        assert traj[-1][0].k == len(times)

    def test_interior_lengths_positive(self, square_run):
        _, traj = square_run
        for state, _ in traj:
            assert np.all(state.d[:-1] > 0)

    def test_outer_facet_speed(self, square_run):
        # the line through the half-line moves with normal speed U / beta_0
        _, traj = square_run
        for state, poly in traj:
            s0 = poly.points[-1] @ SQUARE.normals[0]
            assert s0 == pytest.approx(state.t, abs=1e-6)

    def test_simple(self, square_run):
        _, traj = square_run
        assert all(is_simple(poly) for _, poly in traj)

    def test_vertices(self):
        model = DiscreteSpiral(SQUARE, PARAMS)
        poly = model.vertices(SpiralState(0.04, np.array([0.04])))
        np.testing.assert_allclose(poly.points, [[0, 0], [0.04, 0]], atol=1e-15)
        np.testing.assert_allclose(poly.ray, [0, -1], atol=1e-15)

    def test_vertex_recursion(self, square_run):
        model, traj = square_run
        state, poly = traj[-1]
        pts = poly.points[::-1]  # y_0 .. y_k
        for j in range(1, state.k + 1):
            np.testing.assert_allclose(pts[j - 1], pts[j] + state.d[j - 1] * SQUARE.tangents[j % 4],
                                       atol=1e-14)

    def test_samples_land_exactly(self, square_run):
        _, traj = square_run
        np.testing.assert_array_equal([s.t for s, _ in traj], np.linspace(0, 1, 21))

    @settings(max_examples=10, deadline=None)
    @given(st.sampled_from(["square", "diagonal", "triangle"]), st.floats(0.005, 0.05),
           st.floats(0.1, 0.6))
    def test_simple_property(self, name, rho_c, t_end):
        shape = wulff_shape_from_support(preset_spec(name))
        traj = DiscreteSpiral(shape, EvolutionParams(1.0, rho_c), dt=1e-5).simulate(
            t_end, np.linspace(0, t_end, 5))
        for state, poly in traj:
            assert is_simple(poly)
            assert np.all(np.diff(state.generation_times) > 0)


class TestIntersections:
    def test_crossing_detected(self):
        segs = np.array([[[0, 0], [1, 1]], [[5, 5], [6, 6]], [[0, 1], [1, 0]]], dtype=float)
        assert segments_intersect(segs) == [(0, 2)]

    def test_self_crossing_polyline(self):
        poly = SpiralPolyline(0.0, np.array([[0, 0], [1, 0], [1, 1], [0.5, -1]], dtype=float),
                              np.array([0.0, -1.0]))
        assert not is_simple(poly)
