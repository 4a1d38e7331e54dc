import numpy as np
import pytest

from assignment.schemas import MatchResult
from geometry.quadric import make_plane, make_sphere
from geometry.schemas import BoundedPrimitive
from metrics.errors import EmptySet, NoAxisPairs, NonUnitNormal
from metrics.evaluation import aggregate, evaluate_shape
from metrics.geometric import chamfer, fscore, hausdorff, normal_consistency
from metrics.primitive import axis_error, eval_match, primitive_quality, sample_primitives
from metrics.schemas import EvalConfig, EvalReport

ORIGIN = [[0.0, 0.0, 0.0]]


def plane_at(height: float) -> BoundedPrimitive:
    return BoundedPrimitive(quadric=make_plane((0, 0, 1), -height),
                            support=[[0, 0, height], [1, 1, height]], extent=[[0, 0, -0.1], [1, 1, 0.1]])


class TestGeometric:
    def test_chamfer(self, rng):
        pts = rng.uniform(size=(50, 3))
        assert chamfer(pts, pts) == 0.0
        assert chamfer(ORIGIN, [[1, 0, 0]]) == pytest.approx(1.0)

    def test_hausdorff(self):
        assert hausdorff(ORIGIN, [[0, 0, 0], [2, 0, 0]]) == pytest.approx(2.0)

    def test_normal_consistency(self, rng):
        pts = rng.uniform(size=(30, 3))
        up = np.tile([0.0, 0.0, 1.0], (30, 1))
        side = np.tile([1.0, 0.0, 0.0], (30, 1))
        assert normal_consistency(pts, up, pts, -up) == pytest.approx(1.0)
        assert normal_consistency(pts, up, pts, side) == pytest.approx(0.0)

    def test_non_unit_normal(self):
        with pytest.raises(NonUnitNormal):
            normal_consistency(ORIGIN, [[0, 0, 2.0]], ORIGIN, [[0, 0, 1.0]])

    def test_fscore(self):
        assert fscore(ORIGIN, ORIGIN) == 1.0
        assert fscore(ORIGIN, [[1, 0, 0]]) == 0.0
        assert fscore([[0, 0, 0], [1, 0, 0]], ORIGIN) == pytest.approx(2 / 3)

    @pytest.mark.parametrize("metric", [chamfer, hausdorff, fscore])
    def test_empty_sets(self, metric):
        with pytest.raises(EmptySet):
            metric(np.zeros((0, 3)), ORIGIN)


class TestPrimitiveQuality:
    def test_offset_plane(self):
        cfg = EvalConfig(samples=256)
        pred, gt = [plane_at(0.005)], [plane_at(0.0)]
        match = eval_match(pred, gt, cfg)
        assert match.pairs == [(0, 0)]
        quality = primitive_quality(match, pred, gt, cfg)
        assert quality.res == pytest.approx(0.5)
        assert quality.cov == pytest.approx(100.0)
        assert quality.type_acc == 100.0
        assert quality.axis_deg == pytest.approx(0.0, abs=1e-5)

    def test_no_pairs(self):
        with pytest.raises(EmptySet):
            primitive_quality(MatchResult(pairs=[], total=0.0, unmatched=[0]), [plane_at(0.0)], [plane_at(0.0)])

    def test_spheres_have_no_axis(self):
        sphere = BoundedPrimitive(quadric=make_sphere((0, 0, 0), 0.5), support=[[0, 0, 0.5]],
                                  extent=[[-1, -1, -1], [1, 1, 1]])
        with pytest.raises(NoAxisPairs):
            axis_error(MatchResult(pairs=[(0, 0)], total=0.0, unmatched=[]), [sphere], [sphere])

    def test_sampling_is_seeded_per_primitive(self):
        a = sample_primitives([plane_at(0.0), plane_at(0.0)], 32, seed=4)
        assert not np.array_equal(a[0], a[1])
        assert np.array_equal(a[1], sample_primitives([plane_at(0.0)], 32, seed=5)[0])


class TestShapeEvaluation:
    def test_ground_truth_against_itself(self, box_cloud):
        report = evaluate_shape(box_cloud.primitives, box_cloud, EvalConfig(samples=128))
        assert report.cd == 0.0
        assert report.hd == 0.0
        assert report.nc == pytest.approx(1.0)
        assert report.fscore == 1.0
        assert report.primitive_f1 == pytest.approx(1.0)
        assert report.type_acc == 100.0
        assert report.axis_deg == pytest.approx(0.0, abs=1e-5)
        assert report.cov == 100.0
        assert report.matched == report.evaluated == report.ground_truth == 6

    def test_empty_prediction(self, box_cloud):
        report = evaluate_shape([], box_cloud)
        assert report.cd is None and report.nc is None and report.res is None
        assert report.cov == 0.0
        assert (report.evaluated, report.ground_truth) == (0, 6)

    def test_aggregate(self):
        total = aggregate([EvalReport(cd=1.0, cov=50.0, evaluated=2, ground_truth=3, matched=2),
                           EvalReport(cd=3.0, nc=0.8, cov=100.0, evaluated=1, ground_truth=3, matched=1)])
        assert total.cd == pytest.approx(2.0)
        assert total.nc == pytest.approx(0.8)
        assert total.axis_deg is None
        assert total.cov == pytest.approx(75.0)
        assert (total.evaluated, total.ground_truth, total.matched, total.shapes) == (3, 6, 3, 2)

    def test_aggregate_nothing(self):
        with pytest.raises(EmptySet):
            aggregate([])
