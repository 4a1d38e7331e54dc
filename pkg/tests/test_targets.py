import numpy as np
import pytest
from pydantic import ValidationError

from geometry.quadric import make_plane
from geometry.schemas import BoundedPrimitive
from scene.schemas import LabeledCloud
from targets.induction import assign_point_labels, build_target_sets, induce_targets, nearest_indices, \
    patch_majority
from targets.schemas import PatchedPrediction, TargetAssignment


@pytest.fixture
def two_planes() -> LabeledCloud:
    points = np.array([[0, 0, 0], [0.1, 0, 0], [0, 0, 1], [0, 0.1, 1]], dtype=float)
    return LabeledCloud(
        points=points,
        labels=[1, 1, 2, 2],
        primitives=[BoundedPrimitive(quadric=make_plane((0, 0, 1), 0.0), support=points[:2]),
                    BoundedPrimitive(quadric=make_plane((0, 0, 1), -1.0), support=points[2:])],
    )


class TestLabelTransfer:
    def test_nearest(self):
        reference = np.array([[0, 0, 0], [1, 0, 0]], dtype=float)
        assert nearest_indices(reference, [[0.1, 0, 0]]).tolist() == [0]

    def test_equidistant_goes_to_lowest_index(self):
        reference = np.array([[0, 0, 0], [1, 0, 0]], dtype=float)
        assert nearest_indices(reference, [[0.5, 0, 0]]).tolist() == [0]
        assert nearest_indices(reference[::-1], [[0.5, 0, 0]]).tolist() == [0]
        assert nearest_indices(np.array([[1, 0, 0], [0, 0, 0], [1, 0, 0]], dtype=float),
                               [[0.5, 0, 0]]).tolist() == [0]

    def test_point_labels_follow_nearest_ground_truth(self, two_planes):
        pred = PatchedPrediction(patches=[[[0, 0, 0.1], [0.1, 0, 0.2]], [[0, 0, 0.9], [0.05, 0.05, 0.8]]])
        assert assign_point_labels(pred, two_planes).tolist() == [[1, 1], [2, 2]]


class TestVoting:
    @pytest.mark.parametrize("labels, expected", [([1, 1, 2], 1), ([1, 2], 1), ([2, 1], 1), ([3, 3, 3, 3], 3)])
    def test_majority(self, labels, expected):
        assert patch_majority(labels) == expected

    def test_sets(self):
        assert build_target_sets([1, 1, 2], 2) == {1: frozenset({0, 1}), 2: frozenset({2})}

    def test_primitives_without_patches_stay(self):
        assert build_target_sets([2, 2], 3) == {1: frozenset(), 2: frozenset({0, 1}), 3: frozenset()}

    def test_out_of_range_label(self):
        with pytest.raises(ValueError):
            build_target_sets([1, 4], 3)


class TestInduction:
    def test_partition(self, two_planes):
        pred = PatchedPrediction(patches=[[[0, 0, 0.1], [0, 0, 0.9]], [[0, 0, 0.8], [0, 0, 0.7]],
                                          [[0, 0, 0.0], [0, 0, 0.2]]])
        assignment = induce_targets(pred, two_planes)
        assert assignment.patch_labels.tolist() == [1, 2, 1]
        assert assignment.target_sets == {1: frozenset({0, 2}), 2: frozenset({1})}
        assert assignment.mask(1).tolist() == [1.0, 0.0, 1.0]

    def test_all_patches_on_one_primitive(self, two_planes):
        pred = PatchedPrediction(patches=np.zeros((2, 3, 3)))
        assignment = induce_targets(pred, two_planes)
        assert assignment.target_sets[2] == frozenset()
        assert assignment.primitive_count == 2

    def test_overlapping_sets_rejected(self):
        with pytest.raises(ValidationError):
            TargetAssignment(point_labels=np.ones((2, 1)), patch_labels=np.array([1, 1]),
                             target_sets={1: frozenset({0, 1}), 2: frozenset({1})})

    def test_patches_shape_checked(self):
        with pytest.raises(ValidationError):
            PatchedPrediction(patches=np.zeros((4, 3)))
