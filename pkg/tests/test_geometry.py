import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from percolab import (Angle, Center, IntervalSet, ProbabilityMatrix, ProjectionFrame, SquareCode,
                      axis_projection_cover, column_row_condition, contains_interval,
                      coradial_point, normalize_center, project_level, project_point, project_square,
                      radial_point, radial_project_level, sample_tree)
from percolab.errors import DomainError, ValidationError
from percolab.geometry import ANTI, MAIN, square_images

angles_in_D = st.floats(0.01, math.pi - 0.01).filter(lambda a: abs(a - math.pi / 2) > 0.01)


def corner_image(frame, code):
    """Oracle: min and max of the projected corners of a square."""
    ix, iy = code.coords
    h = code.M ** -code.level
    vals = [project_point(frame, ((ix + dx) * h, (iy + dy) * h)) for dx in (0, 1) for dy in (0, 1)]
    return min(vals), max(vals)


def projection_oracle(frame, z):
    """Intersect the line z + s d(alpha) with the paired diagonal by solving a 2x2 system."""
    dx, dy = math.cos(frame.alpha), -math.sin(frame.alpha)
    if frame.codomain == MAIN:
        # z + s d = (u, u)
        A = np.array([[1.0, -dx], [1.0, -dy]])
        rhs = np.array([z[0], z[1]])
    else:
        # z + s d = (u, 1 - u)
        A = np.array([[1.0, -dx], [-1.0, -dy]])
        rhs = np.array([z[0], z[1] - 1.0])
    u, _ = np.linalg.solve(A, rhs)
    return u


class TestAngle:
    def test_domain(self):
        assert Angle.pi_times(1, 3).in_D and not Angle.pi_times(1, 2).in_D
        with pytest.raises(DomainError):
            Angle(0.0)
        with pytest.raises(DomainError):
            Angle(math.pi)
        with pytest.raises(DomainError):
            ProjectionFrame(Angle.pi_times(1, 2))

    def test_pairing(self):
        assert ProjectionFrame.at(0.3).codomain == MAIN
        assert ProjectionFrame.at(2.5).codomain == ANTI
        dx, dy = ProjectionFrame.at(0.3).direction()
        assert dy / dx < 0  # upper left to lower right


class TestProjectPoint:
    def test_fixed_point_on_diagonal(self):
        assert project_point(ProjectionFrame(Angle.pi_times(1, 4)), (0.3, 0.3)) == pytest.approx(0.3, abs=1e-15)

    def test_pi4(self):
        assert project_point(ProjectionFrame(Angle.pi_times(1, 4)), (0.2, 0.6)) == pytest.approx(0.4, abs=1e-15)

    def test_3pi4(self):
        assert project_point(ProjectionFrame(Angle.pi_times(3, 4)), (0.2, 0.6)) == pytest.approx(0.3, abs=1e-15)

    @given(angles_in_D, st.floats(0, 1), st.floats(0, 1))
    def test_against_linear_solve(self, a, x, y):
        fr = ProjectionFrame.at(a)
        assert project_point(fr, (x, y)) == pytest.approx(projection_oracle(fr, (x, y)), abs=1e-9)

    @given(angles_in_D)
    def test_square_maps_onto_diagonal(self, a):
        fr = ProjectionFrame.at(a)
        vals = [project_point(fr, c) for c in ((0, 0), (1, 0), (0, 1), (1, 1))]
        assert min(vals) == pytest.approx(0.0, abs=1e-12) and max(vals) == pytest.approx(1.0, abs=1e-12)


class TestProjectSquare:
    def test_root(self):
        lo, hi = project_square(ProjectionFrame.at(1.0), SquareCode.root(2))
        assert lo == pytest.approx(0.0, abs=1e-12) and hi == pytest.approx(1.0, abs=1e-12)

    def test_corner_square_pi4(self):
        assert project_square(ProjectionFrame(Angle.pi_times(1, 4)), SquareCode(2, (0,), (0,))) == (0.0, 0.5)

    @settings(max_examples=200)
    @given(angles_in_D, st.integers(2, 3), st.integers(0, 5), st.data())
    def test_width_and_corners(self, a, M, n, data):
        ix = data.draw(st.integers(0, M ** n - 1))
        iy = data.draw(st.integers(0, M ** n - 1))
        code = SquareCode.from_coords(M, n, ix, iy)
        fr = ProjectionFrame.at(a)
        lo, hi = project_square(fr, code)
        assert hi - lo == pytest.approx(M ** -n, abs=1e-12)
        clo, chi = corner_image(fr, code)
        assert lo == pytest.approx(clo, abs=1e-12) and hi == pytest.approx(chi, abs=1e-12)


class TestIntervalSet:
    def test_merge_and_longest(self):
        s = IntervalSet([(0, 0.3), (0.2, 0.6)])
        assert s.intervals == [(0.0, 0.6)]
        assert contains_interval(s, 0.5).passes

    def test_empty(self):
        r = contains_interval(IntervalSet(), 0.1)
        assert r.interval is None and not r.passes

    def test_two_short(self):
        assert not contains_interval(IntervalSet([(0, 0.1), (0.2, 0.3)]), 0.15).passes

    def test_touching_merged(self):
        assert IntervalSet([(0, 0.5), (0.5, 1)]).intervals == [(0.0, 1.0)]

    def test_bad_interval(self):
        with pytest.raises(ValidationError):
            IntervalSet([(0.5, 0.2)])
        with pytest.raises(ValidationError):
            contains_interval(IntervalSet([(0, 1)]), 0.0)

    @given(st.lists(st.tuples(st.floats(0, 1), st.floats(0, 0.3)), max_size=30), st.randoms())
    def test_normalization_idempotent_and_order_free(self, raw, rnd):
        ivs = [(a, min(1.0, a + w)) for a, w in raw]
        s = IntervalSet(ivs)
        shuffled = list(ivs)
        rnd.shuffle(shuffled)
        assert IntervalSet(shuffled) == s
        assert IntervalSet(s.intervals) == s
        lo, hi = s.lows, s.highs
        assert np.all(lo <= hi) and np.all(hi[:-1] < lo[1:])
        # every input interval is covered
        assert all(s.contains_interval(a, b) for a, b in ivs)

    @given(st.lists(st.floats(0, 0.9), max_size=40), st.floats(0.01, 0.1))
    def test_equal_width_matches_general(self, lows, w):
        a = IntervalSet.from_equal_width(lows, w)
        b = IntervalSet([(x, x + w) for x in lows])
        assert np.allclose(a.lows, b.lows) and np.allclose(a.highs, b.highs) and len(a) == len(b)


class TestProjectLevel:
    def test_full_tree(self):
        t = sample_tree(ProbabilityMatrix.uniform(2, 1.0), 4, 0)
        for a in (0.4, Angle.pi_times(1, 4), Angle.pi_times(3, 4), 2.0):
            s = project_level(t, 4, ProjectionFrame.at(a))
            assert len(s) == 1
            assert s.intervals[0][0] == pytest.approx(0, abs=1e-12)
            assert s.intervals[0][1] == pytest.approx(1, abs=1e-12)

    def test_empty(self):
        t = sample_tree(ProbabilityMatrix.uniform(2, 0.0), 2, 0)
        assert not project_level(t, 2, ProjectionFrame.at(0.5))

    @settings(max_examples=30, deadline=None)
    @given(angles_in_D, st.integers(0, 10_000))
    def test_monotone_in_level(self, a, seed):
        t = sample_tree(ProbabilityMatrix.uniform(2, 0.8), 7, seed)
        fr = ProjectionFrame.at(a)
        for n in range(7):
            assert project_level(t, n + 1, fr).issubset(project_level(t, n, fr), tol=1e-12)

    def test_axis_cover(self):
        t = sample_tree(ProbabilityMatrix.uniform(2, 1.0), 3, 0)
        assert axis_projection_cover(t, 3, "vertical").intervals == [(0.0, 1.0)]
        with pytest.raises(ValidationError):
            axis_projection_cover(t, 3, "diagonal")

    def test_axis_cover_column_hole(self):
        m = ProbabilityMatrix(np.array([[1.0, 1.0], [0.0, 0.0]]))  # only i = 0 survives
        t = sample_tree(m, 2, 0)
        assert axis_projection_cover(t, 2, "vertical").intervals == [(0.0, 0.25)]
        assert axis_projection_cover(t, 2, "horizontal").intervals == [(0.0, 1.0)]


class TestColumnRow:
    def test_sierpinski_045_fails(self):
        assert not column_row_condition(ProbabilityMatrix.sierpinski(0.45))

    def test_sierpinski_055_holds(self):
        m = ProbabilityMatrix.sierpinski(0.55)
        assert column_row_condition(m)
        assert sorted(set(np.round(m.p.sum(axis=0), 12))) == [1.1, 1.65]

    def test_full(self):
        assert column_row_condition(ProbabilityMatrix.uniform(2, 1.0))


class TestRadial:
    def test_center_point(self):
        assert radial_point(Center((-10, -10)), (0.5, 0.5)) == pytest.approx(0.5, abs=1e-15)

    def test_off_diagonal(self):
        u = radial_point(Center((-10, -10)), (0.2, 0.6))
        line = lambda s: (-10 + s * 10.2, -10 + s * 10.6)
        s = 21 / 20.8  # x + y = 1 on the anti diagonal
        assert u == pytest.approx(line(s)[0], abs=1e-12)
        assert u == pytest.approx(21 / 20.8 * 10.2 - 10, abs=1e-12)
        assert u == pytest.approx(0.29808, abs=1e-5)

    @given(st.floats(0, 1))
    def test_coradial_on_main_diagonal(self, u0):
        assert coradial_point(Center((-7, -7), "coradial"), (u0, u0)) == pytest.approx(u0, abs=1e-9)

    def test_coradial_distance(self):
        t = Center((-3, -5), "coradial")
        z = (0.4, 0.7)
        u = coradial_point(t, z)
        assert math.dist((u, u), t.t) == pytest.approx(math.dist(z, t.t), abs=1e-12)

    def test_not_diagonal_position(self):
        with pytest.raises(DomainError):
            Center((0.5, -3))

    def test_full_tree_covers(self):
        t = sample_tree(ProbabilityMatrix.uniform(2, 1.0), 3, 0)
        s = radial_project_level(t, 3, Center((-10, -10)))
        assert len(s) == 1
        assert s.intervals[0][0] == pytest.approx(0, abs=1e-12)
        assert s.intervals[0][1] == pytest.approx(1, abs=1e-12)

    def test_empty_level(self):
        t = sample_tree(ProbabilityMatrix.uniform(2, 0.0), 2, 0)
        assert not radial_project_level(t, 2, Center((-10, -10)))

    def test_unclamped_outside_k(self):
        # K maps into [0, 1], but a point beyond K is reported as is
        u = radial_point(Center((-10, -10)), (3.0, 0.0))
        assert u == pytest.approx(-10 + 13 * 21 / 23, abs=1e-12) and u > 1

    def test_radial_to_linear_limit(self):
        code = SquareCode(2, (0, 1), (0, 1))
        ix, iy = code.coords
        lin = project_square(ProjectionFrame(Angle.pi_times(3, 4)), code)
        errs = []
        for d in (1e2, 1e4):
            lo, hi = square_images(Center((-d, -d)), ix, iy, 0.25)
            errs.append(max(abs(float(lo) - lin[0]), abs(float(hi) - lin[1])))
        assert errs[1] < errs[0] and errs[1] < 1e-4


class TestNormalize:
    def test_examples(self):
        t = Center((-1, -1))
        assert normalize_center(t, SquareCode(2, (0,), (0,))).t == (-2.0, -2.0)
        assert normalize_center(t, SquareCode(2, (1,), (1,))).t == (-3.0, -3.0)
        assert normalize_center(t, SquareCode.root(2)) == t

    def test_upper_left_center(self):
        assert normalize_center(Center((-1, 2)), SquareCode(2, (0,), (1,))).t == (-2.0, 3.0)
