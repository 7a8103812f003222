import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from secrecy_regions.errors import EmptyRegion, ValidationError
from secrecy_regions.geometry import (
    LinearInequality as LI, RateRegion, contains, eliminate, eliminate_all, frontier_csv,
    hausdorff, hull_accumulate, pareto_frontier, region_from_json, region_to_json,
    system_from_json, system_to_json, weight_grid,
)


def as_set(system):
    return {(tuple(sorted((k, round(v, 9)) for k, v in s.coeffs.items())), round(s.bound, 9)) for s in system}


def box_diag():
    return RateRegion.from_systems(("R1", "R2"), [[LI({"R1": 1}, 1), LI({"R2": 1}, 1), LI({"R1": 1, "R2": 1}, 1.5)]])


class TestInequality:
    def test_zero_coefficients_dropped(self):
        assert LI({"x": 0.0, "y": 2}, 1).coeffs == {"y": 2.0}

    def test_json_round_trip(self):
        sys_ = [LI({"R0": 1, "R1": 1}, 0.83)]
        assert as_set(system_from_json(system_to_json(sys_))) == as_set(sys_)

    def test_json_rejects_empty(self):
        with pytest.raises(ValidationError):
            system_from_json([{"coeffs": {}, "bound": 1}])


class TestEliminate:
    def test_single_pairing(self):
        out = eliminate([LI({"y": 1}, 2), LI({"x": 1, "y": -1}, 0)], "y")
        assert as_set(out) == as_set([LI({"x": 1}, 2)])

    def test_absent_variable(self):
        sys_ = [LI({"x": 1}, 3), LI({"x": 1, "z": 2}, 5)]
        assert eliminate(sys_, "y") == sys_

    def test_empty_system(self):
        assert eliminate([], "x") == []

    def test_infeasible_certificate(self):
        out = eliminate([LI({"y": 1}, -1)], "y")   # y <= -1 with y >= 0
        assert len(out) == 1 and not out[0].coeffs and out[0].bound < 0

    def test_dominance_removes_parallel_rows(self):
        out = eliminate([LI({"y": 1}, 2), LI({"x": 1, "y": -1}, 0), LI({"x": 2, "y": -2}, 1)], "y")
        assert as_set(out) == as_set([LI({"x": 1}, 2)])


def random_system(rng, names, rows):
    sys_ = []
    for _ in range(rows):
        c = {n: int(v) for n, v in zip(names, rng.integers(-3, 4, size=len(names))) if v}
        if c:
            sys_.append(LI(c, int(rng.integers(-2, 8))))
    return sys_


def extension_interval(system, point, var, nonnegative):
    """Brute force: feasible interval of ``var`` with every other variable fixed."""
    lo, hi = (0.0 if nonnegative else -np.inf), np.inf
    for s in system:
        rest = sum(c * point[k] for k, c in s.coeffs.items() if k != var)
        c = s.coeff(var)
        if c > 0:
            hi = min(hi, (s.bound - rest) / c)
        elif c < 0:
            lo = max(lo, (s.bound - rest) / c)
        elif rest > s.bound + 1e-9:
            return None
    return (lo, hi) if lo <= hi + 1e-9 else None


def grid_extends(system, point, var, nonnegative):
    vals = np.linspace(0 if nonnegative else -20, 20, 40001)
    ok = np.ones_like(vals, dtype=bool)
    for s in system:
        rest = sum(c * point[k] for k, c in s.coeffs.items() if k != var)
        ok &= rest + s.coeff(var) * vals <= s.bound + 1e-9
    return bool(ok.any())


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 100_000), st.booleans())
def test_fm_soundness_against_bruteforce(seed, nonnegative):
    rng = np.random.default_rng(seed)
    names = ["x", "y", "v"]
    system = random_system(rng, names, int(rng.integers(2, 7)))
    projected = eliminate(system, "v", nonnegative=nonnegative)
    for _ in range(60):
        lo = 0 if nonnegative else -4
        pt = {"x": float(rng.uniform(lo, 4)), "y": float(rng.uniform(lo, 4))}
        in_proj = all(s.satisfied(pt) for s in projected)
        interval = extension_interval(system, pt, "v", nonnegative)
        assert in_proj == (interval is not None)
        # when the feasible interval is wide enough the grid search must agree too
        if interval is not None and interval[1] - interval[0] > 2e-3 and -20 < interval[0] < 20:
            assert grid_extends(system, pt, "v", nonnegative)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 100_000))
def test_elimination_order_independent(seed):
    rng = np.random.default_rng(seed)
    system = random_system(rng, ["x", "a", "b"], 6)
    one = eliminate_all(system, ["a", "b"])
    two = eliminate_all(system, ["b", "a"])
    for x in rng.uniform(0, 6, size=200):
        pt = {"x": float(x)}
        assert all(s.satisfied(pt) for s in one) == all(s.satisfied(pt) for s in two)


class TestContains:
    def test_origin(self):
        assert contains(box_diag(), [0, 0])

    def test_outside(self):
        assert not contains(box_diag(), [1.0, 1.0])

    def test_random_points_match_direct_evaluation(self):
        rng = np.random.default_rng(3)
        systems = [[LI({"R1": 1}, float(a)), LI({"R2": 1}, float(b)), LI({"R1": 1, "R2": 1}, float(c))]
                   for a, b, c in rng.uniform(0.2, 2, size=(5, 3))]
        region = RateRegion.from_systems(("R1", "R2"), systems)
        pts = rng.uniform(0, 2, size=(500, 2))
        verdict = contains(region, pts)
        direct = [any(all(s.satisfied({"R1": p[0], "R2": p[1]}) for s in sys_) for sys_ in systems) for p in pts]
        assert list(verdict) == direct

    def test_dimension_mismatch(self):
        from secrecy_regions.errors import DimensionMismatch
        with pytest.raises(DimensionMismatch):
            contains(box_diag(), [0, 0, 0])


class TestFrontier:
    def test_axis_weight_tie_break(self):
        # both (1, 0) and (1, 0.5) maximize R1; the lexicographically largest wins
        pts = pareto_frontier(box_diag(), [[1, 0]])
        assert np.allclose(pts, [[1.0, 0.5]])

    def test_diagonal_weight(self):
        pts = pareto_frontier(box_diag(), [[1, 1]])
        assert np.allclose(pts, [[1.0, 0.5]])

    def test_frontier_points_are_members_and_extreme(self):
        region = hull_accumulate(box_diag())
        pts = pareto_frontier(region, weight_grid(2, 40))
        assert contains(region, pts, mode="hull").all()
        for i, j, k in itertools.permutations(range(len(pts)), 3):
            # no point is a strict convex combination of two others
            a, b, c = pts[i], pts[j], pts[k]
            d = c - b
            if np.allclose(d, 0):
                continue
            t = np.dot(a - b, d) / np.dot(d, d)
            assert not (1e-9 < t < 1 - 1e-9 and np.allclose(b + t * d, a, atol=1e-9))

    def test_empty_region(self):
        with pytest.raises(EmptyRegion):
            pareto_frontier(RateRegion(("R1",), np.ones((1, 1)), np.zeros((0, 1))), [[1]])

    def test_bad_weights(self):
        with pytest.raises(ValidationError):
            pareto_frontier(box_diag(), [[0, 0]])

    def test_csv_header(self):
        text = frontier_csv(box_diag(), weight_grid(2, 4))
        assert text.splitlines()[0] == "R1,R2,piece_id"


def brute_hull_contains(vertices, p):
    """Point in the convex hull of 2-d points iff it lies in some vertex triangle."""
    for a, b, c in itertools.combinations(vertices, 3):
        T = np.column_stack([b - a, c - a])
        if abs(np.linalg.det(T)) < 1e-12:
            continue
        s, t = np.linalg.solve(T, p - a)
        if s >= -1e-12 and t >= -1e-12 and s + t <= 1 + 1e-12:
            return True
    return False


class TestHull:
    def test_single_piece(self):
        region = hull_accumulate(box_diag())
        assert sorted(map(tuple, np.round(region.hull.vertices, 12))) == [(0, 0), (0, 1), (0.5, 1), (1, 0), (1, 0.5)]

    def test_two_boxes(self):
        region = RateRegion.from_systems(("R1", "R2"), [
            [LI({"R1": 1}, 1), LI({"R2": 1}, 1)],
            [LI({"R1": 1}, 0.5), LI({"R2": 1}, 2)],
        ])
        region = hull_accumulate(region)
        enumerated = np.array([(0, 0), (1, 0), (1, 1), (0, 1), (0.5, 0), (0.5, 2), (0, 2)], dtype=float)
        p = np.array([0.75, 1.25])
        assert brute_hull_contains(enumerated, p)
        assert contains(region, p, mode="hull")
        assert not contains(region, p, mode="union")
        rng = np.random.default_rng(0)
        for q in rng.uniform(0, 2.2, size=(300, 2)):
            assert contains(region, q, mode="hull") == brute_hull_contains(enumerated, q)

    def test_idempotent(self):
        once = hull_accumulate(box_diag())
        twice = hull_accumulate(once)
        assert np.array_equal(once.hull.vertices, twice.hull.vertices)

    def test_degenerate_regions(self):
        zero = hull_accumulate(RateRegion.from_systems(("R0", "R1"), [[LI({"R0": 1}, 0), LI({"R1": 1}, 0)]]))
        assert np.allclose(zero.hull.vertices, 0)
        assert contains(zero, [0, 0], mode="hull") and not contains(zero, [1e-3, 0], mode="hull")
        line = hull_accumulate(RateRegion.from_systems(("R0", "R1", "R2"), [[LI({"R0": 1}, 0), LI({"R1": 1, "R2": 1}, 1)]]))
        assert contains(line, [0, 0.5, 0.5], mode="hull")
        assert not contains(line, [0.1, 0.5, 0.4], mode="hull")

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 100_000))
    def test_hull_monotone(self, seed):
        rng = np.random.default_rng(seed)
        systems = [[LI({"R0": 1}, float(a)), LI({"R0": 1, "R1": 1}, float(b)), LI({"R0": 1, "R1": 1, "R2": 1}, float(c))]
                   for a, b, c in rng.uniform(0, 2, size=(4, 3))]
        region = hull_accumulate(RateRegion.from_systems(("R0", "R1", "R2"), systems))
        pts = rng.uniform(0, 2, size=(300, 3))
        in_union = contains(region, pts, mode="union")
        in_hull = contains(region, pts, mode="hull")
        assert not (in_union & ~in_hull).any()


def test_region_json_round_trip():
    region = hull_accumulate(box_diag())
    back = region_from_json(region_to_json(region))
    assert np.allclose(hull_accumulate(back).hull.vertices, region.hull.vertices)


def test_hausdorff():
    assert hausdorff(np.array([[0, 0], [1, 0]]), np.array([[0, 0], [1, 0.5]])) == pytest.approx(0.5)
