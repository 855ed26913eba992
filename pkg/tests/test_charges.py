import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from disctree import (
    Charge,
    ChargeSystem,
    DensitySpec,
    ImageSpec,
    from_density,
    from_particles,
    sign_term_all,
    with_images,
)

finite_floats = st.floats(
    min_value=-1e6, max_value=1e6, allow_nan=False, allow_infinity=False
)


def brute_force_sign_terms(xs, qs, targets):
    out = []
    for y in targets:
        e = 0.0
        for x, q in zip(xs, qs):
            e += q if x < y else -q
        out.append(e)
    return np.array(out)


class TestFromParticles:
    def test_sorts_by_position(self):
        system = from_particles([(0.5, 1.0), (-1.0, 2.0), (0.0, 3.0)])
        np.testing.assert_array_equal(system.xs, [-1.0, 0.0, 0.5])
        np.testing.assert_array_equal(system.qs, [2.0, 3.0, 1.0])

    def test_prefix_and_total(self):
        system = from_particles([(0.0, 1.0), (1.0, 2.0), (2.0, -0.5)])
        np.testing.assert_array_equal(system.prefix, [1.0, 3.0, 2.5])
        assert system.total == 2.5

    def test_duplicates_kept_in_input_order(self):
        system = from_particles([(1.0, 10.0), (1.0, 20.0), (0.0, 5.0)])
        np.testing.assert_array_equal(system.xs, [0.0, 1.0, 1.0])
        np.testing.assert_array_equal(system.qs, [5.0, 10.0, 20.0])

    def test_arrays_read_only(self):
        system = from_particles([(0.0, 1.0)])
        with pytest.raises(ValueError):
            system.xs[0] = 5.0

    def test_len_getitem_iter(self):
        system = from_particles([(0.0, 1.0), (2.0, -1.0)])
        assert len(system) == 2
        assert system[1] == Charge(2.0, -1.0)
        assert list(system) == [Charge(0.0, 1.0), Charge(2.0, -1.0)]

    def test_empty_input(self):
        system = from_particles([])
        assert len(system) == 0
        assert system.total == 0.0

    @pytest.mark.parametrize("bad", [[(0.0, math.nan)], [(math.inf, 1.0)]])
    def test_rejects_nonfinite(self, bad):
        with pytest.raises(ValueError):
            from_particles(bad)

    def test_rejects_wrong_shape(self):
        with pytest.raises(ValueError):
            from_particles([(0.0, 1.0, 2.0)])

    @given(st.lists(st.tuples(finite_floats, finite_floats), min_size=1, max_size=60))
    @settings(max_examples=60, deadline=None)
    def test_invariants_hold_for_any_input(self, pairs):
        system = from_particles(pairs)
        assert np.all(np.diff(system.xs) >= 0)
        np.testing.assert_array_equal(system.prefix, np.cumsum(system.qs))
        assert system.total == system.prefix[-1]
        assert sorted(zip(system.xs, system.qs)) == sorted(
            (x, q) for x, q in pairs
        )


class TestFromDensity:
    def test_constant_density_total_charge(self):
        eps0 = 8.8541878128e-12
        spec = DensitySpec(
            domain=(0.0, 1.0), cells=4, values=[2.0 * eps0] * 4, quadrature_order=3
        )
        system = from_density(spec)
        assert len(system) == 12
        assert system.total == pytest.approx(1.0, rel=1e-12)

    def test_order_two_node_positions(self):
        spec = DensitySpec(
            domain=(0.0, 1.0), cells=1, values=[1.0], quadrature_order=2, eps0=0.5
        )
        system = from_density(spec)
        root3 = 1.0 / (2.0 * math.sqrt(3.0))
        np.testing.assert_allclose(system.xs, [0.5 - root3, 0.5 + root3], rtol=1e-14)
        np.testing.assert_allclose(system.qs, [0.5, 0.5], rtol=1e-14)

    def test_endpoint_tabulation_linear_density(self):
        # sigma(x) = x on [0, 1]: integral is 1/2, exact for any order >= 1
        spec = DensitySpec(
            domain=(0.0, 1.0),
            cells=5,
            values=np.linspace(0.0, 1.0, 6),
            quadrature_order=2,
            eps0=0.5,
        )
        system = from_density(spec)
        assert system.total == pytest.approx(0.5, rel=1e-12)

    def test_nodes_stay_inside_domain(self):
        spec = DensitySpec(domain=(-2.0, 3.0), cells=7, values=[1.0] * 7, quadrature_order=5)
        system = from_density(spec)
        assert np.all(system.xs > -2.0)
        assert np.all(system.xs < 3.0)

    def test_rejects_bad_specs(self):
        with pytest.raises(ValueError):
            DensitySpec(domain=(1.0, 0.0), cells=1, values=[1.0], quadrature_order=2)
        with pytest.raises(ValueError):
            DensitySpec(domain=(0.0, 1.0), cells=0, values=[], quadrature_order=2)
        with pytest.raises(ValueError):
            DensitySpec(domain=(0.0, 1.0), cells=3, values=[1.0], quadrature_order=2)
        with pytest.raises(ValueError):
            DensitySpec(domain=(0.0, 1.0), cells=1, values=[1.0], quadrature_order=0)
        with pytest.raises(ValueError):
            DensitySpec(domain=(0.0, 1.0), cells=1, values=[1.0], quadrature_order=2, eps0=0.0)

    def test_rejects_order_beyond_cap(self):
        spec = DensitySpec(domain=(0.0, 1.0), cells=1, values=[1.0], quadrature_order=17)
        with pytest.raises(ValueError):
            from_density(spec)


class TestWithImages:
    def test_both_planes(self):
        system = from_particles([(0.3, 1.0), (0.9, 2.0)])
        spec = ImageSpec(gap_length=1.0)
        imaged = with_images(system, spec)
        np.testing.assert_allclose(imaged.xs, [-0.9, -0.3, 0.3, 0.9, 1.1, 1.7])
        np.testing.assert_allclose(imaged.qs, [-2.0, -1.0, 1.0, 2.0, -2.0, -1.0])

    def test_lower_only(self):
        system = from_particles([(0.3, 1.0)])
        spec = ImageSpec(gap_length=1.0, reflect_upper=False)
        imaged = with_images(system, spec)
        np.testing.assert_allclose(imaged.xs, [-0.3, 0.3])
        np.testing.assert_allclose(imaged.qs, [-1.0, 1.0])

    def test_upper_only_with_offset_electrode(self):
        system = from_particles([(1.4, 1.0)])
        spec = ImageSpec(gap_length=1.0, lower_electrode=1.0, reflect_lower=False)
        imaged = with_images(system, spec)
        np.testing.assert_allclose(imaged.xs, [1.4, 2.6])
        np.testing.assert_allclose(imaged.qs, [1.0, -1.0])

    def test_far_image_dropped(self):
        # reflected across the lower plane to -1.5, distance 1.5 >= gap 1.0
        system = from_particles([(1.5, 1.0)])
        spec = ImageSpec(gap_length=1.0, reflect_upper=False)
        imaged = with_images(system, spec)
        assert len(imaged) == 1

    def test_image_exactly_at_gap_distance_dropped(self):
        system = from_particles([(1.0, 1.0)])
        spec = ImageSpec(gap_length=1.0, reflect_upper=False)
        imaged = with_images(system, spec)
        assert len(imaged) == 1

    def test_charge_on_plane_images_onto_itself(self):
        system = from_particles([(0.0, 1.0)])
        spec = ImageSpec(gap_length=1.0, reflect_upper=False)
        imaged = with_images(system, spec)
        assert len(imaged) == 2
        assert imaged.total == 0.0

    def test_rejects_bad_gap(self):
        with pytest.raises(ValueError):
            ImageSpec(gap_length=0.0)


class TestSignTerm:
    def test_hand_case(self):
        system = from_particles([(0.0, 1.0), (1.0, 2.0), (2.0, 4.0)])
        # y=0.5: below  {1} -> 1 - 6 = -5;  y=1.5: below {1,2} -> 3 - 4 = -1
        np.testing.assert_array_equal(sign_term_all(system, [0.5, 1.5]), [-5.0, -1.0])

    def test_charge_exactly_at_target_counts_minus(self):
        system = from_particles([(1.0, 3.0)])
        np.testing.assert_array_equal(sign_term_all(system, [1.0]), [-3.0])
        np.testing.assert_array_equal(sign_term_all(system, [1.0 + 1e-12]), [3.0])

    def test_matches_brute_force_with_duplicates(self):
        rng = np.random.default_rng(5)
        xs = np.round(rng.uniform(0, 1, 200), 2)  # force duplicates
        qs = rng.uniform(-1, 1, 200)
        system = from_particles(np.column_stack([xs, qs]))
        targets = np.sort(np.concatenate([rng.uniform(0, 1, 50), xs[:10]]))
        got = sign_term_all(system, targets)
        want = brute_force_sign_terms(system.xs, system.qs, targets)
        np.testing.assert_allclose(got, want, rtol=1e-12, atol=1e-12)

    def test_rejects_unsorted_targets(self):
        system = from_particles([(0.0, 1.0)])
        with pytest.raises(ValueError):
            sign_term_all(system, [1.0, 0.5])

    def test_rejects_bad_shape(self):
        system = from_particles([(0.0, 1.0)])
        with pytest.raises(ValueError):
            sign_term_all(system, [[0.5]])

    def test_outside_support(self):
        system = from_particles([(0.0, 1.0), (1.0, 2.0)])
        np.testing.assert_array_equal(sign_term_all(system, [-5.0, 5.0]), [-3.0, 3.0])

    @given(
        st.lists(st.tuples(finite_floats, finite_floats), min_size=1, max_size=40),
        st.lists(finite_floats, min_size=1, max_size=20),
    )
    @settings(max_examples=60, deadline=None)
    def test_matches_brute_force_for_any_input(self, pairs, raw_targets):
        system = from_particles(pairs)
        targets = np.sort(np.asarray(raw_targets, dtype=np.float64))
        got = sign_term_all(system, targets)
        want = brute_force_sign_terms(system.xs, system.qs, targets)
        scale = float(np.sum(np.abs(system.qs))) or 1.0
        np.testing.assert_allclose(got, want, atol=1e-9 * scale)
