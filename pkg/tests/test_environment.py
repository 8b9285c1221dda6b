"""Environment tests: grids, propagation, source variants, file formats.

Geometry predicates are checked against an exact rational-arithmetic
oracle; the propagation model against closed-form path-loss values.
"""

from fractions import Fraction

import numpy as np
import pytest

from alignloc import environment as env
from alignloc.errors import ConfigurationError, StructuralError


def rational_proper_intersection(a1, a2, b1, b2) -> bool:
    """Exact oracle: open segments cross iff both orientation pairs strictly alternate."""

    def orient(o, p, q):
        ox, oy = map(Fraction, o)
        px, py = map(Fraction, p)
        qx, qy = map(Fraction, q)
        v = (px - ox) * (qy - oy) - (py - oy) * (qx - ox)
        return (v > 0) - (v < 0)

    d1 = orient(b1, b2, a1)
    d2 = orient(b1, b2, a2)
    d3 = orient(a1, a2, b1)
    d4 = orient(a1, a2, b2)
    return d1 * d2 == -1 and d3 * d4 == -1


@pytest.fixture
def square_plan():
    return env.FloorPlan(width=4.0, height=4.0)


@pytest.fixture
def corner_aps():
    coords = [(0.0, 0.0), (4.0, 0.0), (0.0, 4.0), (4.0, 4.0)]
    return [env.AccessPoint(x=x, y=y, ap_id=i + 1) for i, (x, y) in enumerate(coords)]


class TestBuildGrid:
    def test_3x3_lattice(self):
        plan = env.FloorPlan(width=2.0, height=2.0)
        grid = env.build_grid(plan, 1.0)
        assert grid.n_points == 9
        expected = [(x, y) for y in (0.0, 1.0, 2.0) for x in (0.0, 1.0, 2.0)]
        assert np.array_equal(grid.positions, np.array(expected))

    def test_row_major_order(self, square_plan):
        grid = env.build_grid(square_plan, 2.0)
        # within a row x ascends; rows ascend in y
        keys = [(y, x) for x, y in grid.positions]
        assert keys == sorted(keys)

    def test_spacing_too_large(self):
        plan = env.FloorPlan(width=1.0, height=1.0)
        with pytest.raises(ConfigurationError):
            env.build_grid(plan, 2.0)

    def test_spacing_must_be_positive(self, square_plan):
        with pytest.raises(ConfigurationError):
            env.build_grid(square_plan, 0.0)

    def test_mask_selects_points(self):
        plan = env.FloorPlan(
            width=2.0,
            height=2.0,
            mask=[[1, 0, 0], [1, 1, 0], [0, 0, 1]],
        )
        grid = env.build_grid(plan, 1.0)
        assert grid.n_points == 4
        assert np.array_equal(
            grid.positions, np.array([(0.0, 0.0), (0.0, 1.0), (1.0, 1.0), (2.0, 2.0)])
        )
        assert np.array_equal(grid.lattice, np.array([(0, 0), (0, 1), (1, 1), (2, 2)]))

    def test_mask_shape_mismatch(self):
        plan = env.FloorPlan(width=2.0, height=2.0, mask=[[1, 1], [1, 1]])
        with pytest.raises(StructuralError):
            env.build_grid(plan, 1.0)

    def test_positions_pairwise_distinct(self, square_plan):
        grid = env.build_grid(square_plan, 1.0)
        seen = {tuple(p) for p in grid.positions}
        assert len(seen) == grid.n_points

    def test_lattice_neighbors(self):
        plan = env.FloorPlan(width=2.0, height=2.0)
        grid = env.build_grid(plan, 1.0)
        center = 4  # (1, 1) in a 3x3 row-major lattice
        assert sorted(grid.lattice_neighbors(center)) == [1, 3, 5, 7]


class TestSegmentIntersection:
    def test_plain_crossing(self):
        assert env.segments_properly_intersect((0, 0), (2, 2), (0, 2), (2, 0))

    def test_parallel(self):
        assert not env.segments_properly_intersect((0, 0), (2, 0), (0, 1), (2, 1))

    def test_endpoint_touch_is_not_crossing(self):
        # shared endpoint
        assert not env.segments_properly_intersect((0, 0), (1, 1), (1, 1), (2, 0))
        # T-junction: one endpoint on the other segment's interior
        assert not env.segments_properly_intersect((0, 0), (2, 0), (1, 0), (1, 2))

    def test_collinear_overlap(self):
        assert not env.segments_properly_intersect((0, 0), (2, 0), (1, 0), (3, 0))

    def test_matches_rational_oracle_on_random_segments(self):
        rng = np.random.default_rng(7)
        for _ in range(300):
            pts = rng.integers(0, 6, size=8).astype(float) / 2.0
            a1, a2, b1, b2 = pts.reshape(4, 2)
            got = env.segments_properly_intersect(a1, a2, b1, b2)
            want = rational_proper_intersection(a1, a2, b1, b2)
            assert got == want, (a1, a2, b1, b2)


class TestSimulateRadioMap:
    def test_strictly_decreasing_along_ray(self):
        plan = env.FloorPlan(width=10.0, height=2.0)
        ap = env.AccessPoint(x=0.0, y=0.0, ap_id=1)
        grid = env.build_grid(plan, 1.0)
        rm = env.simulate_radio_map(plan, [ap], grid, env.PropagationModel(exponent=2.0))
        # first lattice row marches straight away from the AP
        row = rm.rss[:11, 0]
        assert np.all(np.diff(row) < 0)

    def test_value_at_ap_position(self):
        plan = env.FloorPlan(width=4.0, height=2.0)
        ap = env.AccessPoint(x=0.0, y=0.0, tx_dbm=0.0, ap_id=1)
        grid = env.build_grid(plan, 1.0)
        model = env.PropagationModel(exponent=2.0, reference_distance_m=0.5)
        rm = env.simulate_radio_map(plan, [ap], grid, model)
        # distance clamps to the reference distance at the AP itself
        assert rm.rss[0, 0] == pytest.approx(-20.0 * np.log10(0.5), abs=1e-12)

    def test_equidistant_points_equal_rss(self, square_plan):
        ap = env.AccessPoint(x=2.0, y=2.0, ap_id=1)
        grid = env.build_grid(square_plan, 1.0)
        rm = env.simulate_radio_map(square_plan, [ap], grid, env.PropagationModel())
        left = grid.positions.tolist().index([1.0, 2.0])
        right = grid.positions.tolist().index([3.0, 2.0])
        assert rm.rss[left, 0] == rm.rss[right, 0]

    def test_wall_costs_exactly_its_attenuation(self):
        # mirror points, same distance from the AP; one behind a 10 dB wall
        plan = env.FloorPlan(
            width=8.0,
            height=4.0,
            walls=(env.Wall(x1=6.0, y1=0.0, x2=6.0, y2=4.0, atten_db=10.0),),
        )
        ap = env.AccessPoint(x=4.0, y=2.0, ap_id=1)
        clear = np.array([[1.0, 2.0]])
        blocked = np.array([[7.0, 2.0]])  # wall between x=6 crossed
        model = env.PropagationModel()
        r_clear = env.predict_rss(clear, ap, plan, model)[0]
        r_blocked = env.predict_rss(blocked, ap, plan, model)[0]
        # oracle: count proper crossings with the rational predicate
        assert rational_proper_intersection((4, 2), (7, 2), (6, 0), (6, 4))
        assert not rational_proper_intersection((4, 2), (1, 2), (6, 0), (6, 4))
        d = 3.0
        base = -10.0 * model.exponent * np.log10(d)
        assert r_blocked == pytest.approx(base - 10.0, abs=1e-12)
        assert r_clear == pytest.approx(base, abs=1e-12)
        assert r_clear - r_blocked == pytest.approx(10.0, abs=1e-12)

    def test_ap_outside_plan_rejected(self, square_plan):
        grid = env.build_grid(square_plan, 1.0)
        bad = env.AccessPoint(x=9.0, y=0.0, ap_id=1)
        with pytest.raises(ConfigurationError):
            env.simulate_radio_map(square_plan, [bad], grid)

    def test_ap_ids_must_be_contiguous(self, square_plan):
        grid = env.build_grid(square_plan, 1.0)
        aps = [env.AccessPoint(x=1.0, y=1.0, ap_id=1), env.AccessPoint(x=2.0, y=2.0, ap_id=3)]
        with pytest.raises(StructuralError):
            env.simulate_radio_map(square_plan, aps, grid)

    def test_noise_is_seed_deterministic(self, square_plan, corner_aps):
        grid = env.build_grid(square_plan, 1.0)
        a = env.simulate_radio_map(square_plan, corner_aps, grid, noise_sigma=2.0, seed=42)
        b = env.simulate_radio_map(square_plan, corner_aps, grid, noise_sigma=2.0, seed=42)
        c = env.simulate_radio_map(square_plan, corner_aps, grid, noise_sigma=2.0, seed=43)
        assert np.array_equal(a.rss, b.rss)
        assert not np.array_equal(a.rss, c.rss)


class TestPlanSource:
    def test_alternating_pattern(self):
        plan = env.FloorPlan(width=2.0, height=3.0)
        grid = env.build_grid(plan, 1.0)
        ext = env.make_plan_source(grid, 5)
        i = grid.positions.tolist().index([1.0, 2.0])
        assert ext[i].tolist() == [1.0, 2.0, 1.0, 2.0, 1.0]

    def test_origin_maps_to_zero_vector(self):
        plan = env.FloorPlan(width=2.0, height=2.0)
        grid = env.build_grid(plan, 1.0)
        for k in (2, 3, 7):
            ext = env.make_plan_source(grid, k)
            assert np.all(ext[0] == 0.0)

    def test_k4_distance_scaling_is_sqrt2(self):
        # squared distance doubles: each of dx^2, dy^2 appears twice for K=4
        rng = np.random.default_rng(3)
        plan = env.FloorPlan(width=50.0, height=50.0)
        grid = env.build_grid(plan, 10.0)
        ext = env.make_plan_source(grid, 4)
        for _ in range(50):
            i, j = rng.integers(0, grid.n_points, size=2)
            d2 = np.linalg.norm(grid.positions[i] - grid.positions[j])
            d4 = np.linalg.norm(ext[i] - ext[j])
            assert d4 == pytest.approx(np.sqrt(2.0) * d2, rel=1e-12)

    def test_even_k_preserves_nearest_neighbor_ordering(self):
        plan = env.FloorPlan(width=6.0, height=4.0)
        grid = env.build_grid(plan, 1.0)
        for k in (2, 4, 6):
            ext = env.make_plan_source(grid, k)
            for i in range(grid.n_points):
                d2 = np.linalg.norm(grid.positions - grid.positions[i], axis=1)
                dk = np.linalg.norm(ext - ext[i], axis=1)
                d2[i] = np.inf
                dk[i] = np.inf
                assert np.argmin(d2) == np.argmin(dk)

    def test_odd_k_uses_weighted_metric(self):
        # one extra x copy: |p-q|^2 = ceil(K/2) dx^2 + floor(K/2) dy^2
        plan = env.FloorPlan(width=6.0, height=4.0)
        grid = env.build_grid(plan, 1.0)
        for k in (3, 5):
            ext = env.make_plan_source(grid, k)
            rng = np.random.default_rng(k)
            for _ in range(30):
                i, j = rng.integers(0, grid.n_points, size=2)
                dx, dy = grid.positions[i] - grid.positions[j]
                want = np.sqrt(np.ceil(k / 2) * dx**2 + np.floor(k / 2) * dy**2)
                assert np.linalg.norm(ext[i] - ext[j]) == pytest.approx(want, abs=1e-12)

    def test_k_must_be_at_least_two(self):
        plan = env.FloorPlan(width=2.0, height=2.0)
        grid = env.build_grid(plan, 1.0)
        with pytest.raises(ConfigurationError):
            env.make_plan_source(grid, 1)


class TestDissociation:
    @pytest.fixture
    def walled_plan(self):
        return env.FloorPlan(
            width=4.0,
            height=4.0,
            walls=(
                env.Wall(x1=2.0, y1=0.5, x2=2.0, y2=3.5, atten_db=10.0, dissociating=True),
                env.Wall(x1=0.5, y1=2.0, x2=1.5, y2=2.0, atten_db=5.0, dissociating=False),
            ),
        )

    def test_clear_pair_not_dissociated(self, walled_plan):
        grid = env.build_grid(walled_plan, 1.0)
        a = grid.positions.tolist().index([0.0, 0.0])
        b = grid.positions.tolist().index([1.0, 0.0])
        assert not env.dissociation_filter(grid, walled_plan, a, b)

    def test_pair_across_dissociating_wall(self, walled_plan):
        grid = env.build_grid(walled_plan, 1.0)
        a = grid.positions.tolist().index([1.0, 2.0])
        b = grid.positions.tolist().index([3.0, 2.0])
        assert env.dissociation_filter(grid, walled_plan, a, b)

    def test_attenuating_wall_does_not_dissociate(self, walled_plan):
        grid = env.build_grid(walled_plan, 1.0)
        a = grid.positions.tolist().index([1.0, 1.0])
        b = grid.positions.tolist().index([1.0, 3.0])
        # crosses only the 5 dB wall, which is not flagged dissociating
        assert not env.dissociation_filter(grid, walled_plan, a, b)

    def test_endpoint_graze_does_not_dissociate(self):
        # segment passes exactly through the wall's endpoint (0.5, 2)
        plan = env.FloorPlan(
            width=4.0,
            height=4.0,
            walls=(env.Wall(x1=0.5, y1=2.0, x2=0.5, y2=4.0, atten_db=3.0, dissociating=True),),
        )
        grid = env.build_grid(plan, 1.0)
        a = grid.positions.tolist().index([0.0, 2.0])
        b = grid.positions.tolist().index([1.0, 2.0])
        assert rational_proper_intersection((0, 2), (1, 2), (0.5, 2), (0.5, 4)) is False
        assert not env.dissociation_filter(grid, plan, a, b)

    def test_identical_indices_rejected(self, walled_plan):
        grid = env.build_grid(walled_plan, 1.0)
        with pytest.raises(StructuralError):
            env.dissociation_filter(grid, walled_plan, 2, 2)

    def test_index_out_of_range(self, walled_plan):
        grid = env.build_grid(walled_plan, 1.0)
        with pytest.raises(StructuralError):
            env.dissociation_filter(grid, walled_plan, 0, grid.n_points)

    def test_matrix_matches_pairwise_filter(self, walled_plan):
        grid = env.build_grid(walled_plan, 1.0)
        mat = env.dissociation_matrix(grid, walled_plan)
        assert mat.any()
        for i in range(0, grid.n_points, 3):
            for j in range(0, grid.n_points, 3):
                if i == j:
                    assert not mat[i, j]
                else:
                    assert mat[i, j] == env.dissociation_filter(grid, walled_plan, i, j)


class TestSampleObservation:
    @pytest.fixture
    def small_map(self, square_plan, corner_aps):
        grid = env.build_grid(square_plan, 1.0)
        return env.simulate_radio_map(square_plan, corner_aps, grid)

    def test_zero_sigma_is_exact(self, small_map):
        obs = env.sample_observation(small_map, 3, 0.0, seed=1)
        assert np.array_equal(obs, small_map.rss[3])

    def test_deterministic_for_fixed_seed(self, small_map):
        a = env.sample_observation(small_map, 5, 2.0, seed=9)
        b = env.sample_observation(small_map, 5, 2.0, seed=9)
        assert np.array_equal(a, b)

    def test_monte_carlo_mean(self, small_map):
        # law of large numbers: sample mean within 3*sigma/100 per AP at 1e4 draws
        sigma = 2.0
        draws = np.array(
            [env.sample_observation(small_map, 7, sigma, seed=[11, t]) for t in range(10_000)]
        )
        err = np.abs(draws.mean(axis=0) - small_map.rss[7])
        assert np.all(err < 3.0 * sigma / 100.0)

    def test_index_out_of_range(self, small_map):
        with pytest.raises(StructuralError):
            env.sample_observation(small_map, small_map.n_points, 0.0, seed=0)


class TestRadioMapCsv:
    def test_round_trip_is_bit_exact(self, tmp_path, square_plan, corner_aps):
        grid = env.build_grid(square_plan, 1.0)
        rm = env.simulate_radio_map(square_plan, corner_aps, grid, noise_sigma=3.0, seed=5)
        path = tmp_path / "map.csv"
        env.save_radio_map(rm, path)
        back = env.load_radio_map(path)
        assert np.array_equal(back.positions, rm.positions)
        assert np.array_equal(back.rss, rm.rss)

    def test_header_and_decimal_digits(self, tmp_path, square_plan, corner_aps):
        grid = env.build_grid(square_plan, 1.0)
        rm = env.simulate_radio_map(square_plan, corner_aps, grid)
        path = tmp_path / "map.csv"
        env.save_radio_map(rm, path)
        lines = path.read_text().splitlines()
        assert lines[0] == "idx,x,y,rss_1,rss_2,rss_3,rss_4"
        for field in lines[1].split(",")[1:]:
            whole, frac = field.split(".")
            assert len(frac) >= 4

    def test_rejects_wrong_header(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,b,c\n1,2,3\n")
        with pytest.raises(StructuralError):
            env.load_radio_map(path)

    def test_rejects_ragged_rows(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("idx,x,y,rss_1\n0,0.0,0.0,-40.0,-50.0\n")
        with pytest.raises(StructuralError):
            env.load_radio_map(path)


class TestFloorPlanYaml:
    def test_round_trip(self, tmp_path):
        plan = env.FloorPlan(
            width=5.0,
            height=3.0,
            walls=(env.Wall(x1=1.0, y1=0.0, x2=1.0, y2=3.0, atten_db=6.0, dissociating=True),),
            mask=[[1, 1, 1, 0, 0, 0], [1, 1, 1, 1, 1, 1], [0, 0, 1, 1, 1, 1], [0, 0, 0, 1, 1, 1]],
        )
        aps = [env.AccessPoint(x=0.5, y=0.5, tx_dbm=-3.0, ap_id=1)]
        path = tmp_path / "plan.yaml"
        env.save_floor_plan(plan, aps, path)
        plan2, aps2 = env.load_floor_plan(path)
        assert plan2 == plan
        assert aps2 == aps

    def test_unknown_top_level_key(self, tmp_path):
        path = tmp_path / "plan.yaml"
        path.write_text("width: 2\nheight: 2\naps: [{x: 1, y: 1}]\nfloors: 3\n")
        with pytest.raises(ConfigurationError):
            env.load_floor_plan(path)

    def test_unknown_wall_key(self, tmp_path):
        path = tmp_path / "plan.yaml"
        path.write_text(
            "width: 2\nheight: 2\naps: [{x: 1, y: 1}]\n"
            "walls: [{x1: 0, y1: 0, x2: 1, y2: 1, thickness: 2}]\n"
        )
        with pytest.raises(ConfigurationError):
            env.load_floor_plan(path)

    def test_missing_required_key(self, tmp_path):
        path = tmp_path / "plan.yaml"
        path.write_text("width: 2\naps: [{x: 1, y: 1}]\n")
        with pytest.raises(ConfigurationError):
            env.load_floor_plan(path)

    def test_wall_endpoint_outside_plan(self):
        with pytest.raises(ConfigurationError):
            env.FloorPlan(
                width=2.0,
                height=2.0,
                walls=(env.Wall(x1=0.0, y1=0.0, x2=5.0, y2=0.0, atten_db=1.0),),
            )

    def test_negative_attenuation_rejected(self):
        with pytest.raises(ConfigurationError):
            env.Wall(x1=0.0, y1=0.0, x2=1.0, y2=0.0, atten_db=-2.0)

    def test_packaged_environment_has_219_points(self):
        import yaml as _yaml

        from alignloc.harness import packaged_environment_path

        doc = _yaml.safe_load(packaged_environment_path().read_text())
        plan, aps = env.floor_plan_from_dict(doc)
        grid = env.build_grid(plan, 1.0)
        assert grid.n_points == 219
        assert len(aps) == 5
