import warnings

import numpy as np
import pytest
from pydantic import ValidationError
from scipy.spatial.transform import Rotation

from geometry.errors import AllZero, DegenerateGradient, InvalidPrimitive, NoAxis, Underdetermined
from geometry.fitting import fit_quadric, fit_residual
from geometry.quadric import (FROBENIUS_WEIGHTS, axis_of, classify, distance, distances, evaluate, make_cone,
                              make_cylinder, make_plane, make_sphere, quadric_from_coeffs, snap_to_type,
                              transform_quadric)
from geometry.ransac import ransac_extract
from geometry.sampling import project, project_points, sample_surface
from geometry.schemas import BoundedPrimitive, PrimitiveType, RansacConfig

UNIT_SPHERE = [1, 1, 1, -1, 0, 0, 0, 0, 0, 0]


def fibonacci_sphere(n: int) -> np.ndarray:
    i = np.arange(n) + 0.5
    phi = np.arccos(1 - 2 * i / n)
    theta = np.pi * (1 + 5 ** 0.5) * i
    return np.stack([np.cos(theta) * np.sin(phi), np.sin(theta) * np.sin(phi), np.cos(phi)], axis=1)


def frobenius(coeffs) -> float:
    c = np.asarray(coeffs)
    return float(np.sqrt(np.sum(FROBENIUS_WEIGHTS * c * c)))


def random_pose(rotation: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    transform = np.eye(4)
    transform[:3, :3] = rotation
    transform[:3, 3] = rng.uniform(-1, 1, 3)
    return transform


def canonical_cloud(type_tag: PrimitiveType, rng: np.random.Generator, n: int = 300) -> np.ndarray:
    """Noise-free samples of one primitive with its axis along z and its apex or centre at the origin."""
    angles = rng.uniform(0, 2 * np.pi, n)
    ring = np.stack([np.cos(angles), np.sin(angles), np.zeros(n)], axis=1)
    if type_tag is PrimitiveType.PLANE:
        return np.column_stack([rng.uniform(-0.5, 0.5, size=(n, 2)), np.zeros(n)])
    if type_tag is PrimitiveType.SPHERE:
        directions = rng.normal(size=(n, 3))
        return rng.uniform(0.2, 0.5) * directions / np.linalg.norm(directions, axis=1, keepdims=True)
    if type_tag is PrimitiveType.CYLINDER:
        return rng.uniform(0.2, 0.4) * ring + np.outer(rng.uniform(-0.5, 0.5, n), (0, 0, 1))
    heights = rng.uniform(0.3, 1.0, n)
    return np.tan(rng.uniform(0.3, 0.6)) * heights[:, None] * ring + np.outer(heights, (0, 0, 1))


def posed(points: np.ndarray, transform: np.ndarray) -> np.ndarray:
    return points @ transform[:3, :3].T + transform[:3, 3]


class TestCanonicalForm:
    def test_unit_sphere_is_normalized(self):
        q = quadric_from_coeffs(UNIT_SPHERE)
        assert np.allclose(q.vector, np.array(UNIT_SPHERE) / 2.0)
        assert frobenius(q.coeffs) == pytest.approx(1.0)
        assert q.type_tag is PrimitiveType.SPHERE

    def test_scale_and_sign_invariance(self, rng):
        c = rng.normal(size=10)
        a, b = quadric_from_coeffs(c), quadric_from_coeffs(-3.0 * c)
        assert np.allclose(a.vector, b.vector, atol=1e-15)
        assert a.type_tag is b.type_tag

    def test_first_nonzero_is_positive(self):
        q = quadric_from_coeffs([0, 0, 0, 0, 0, 0, 0, 0, 0, -2.0])
        assert q.coeffs[9] > 0

    def test_all_zero_rejected(self):
        with pytest.raises(AllZero):
            quadric_from_coeffs(np.zeros(10))

    def test_plane_tag_needs_flat_quadratic_block(self):
        with pytest.raises(InvalidPrimitive):
            quadric_from_coeffs(UNIT_SPHERE, PrimitiveType.PLANE)


class TestEvaluateAndDistance:
    def test_evaluate_sphere(self):
        q = quadric_from_coeffs(UNIT_SPHERE)
        assert evaluate(q, (1, 0, 0)) == 0.0
        assert evaluate(q, (2, 0, 0)) == pytest.approx(3 * 0.5)

    def test_evaluate_plane_on_surface(self):
        assert evaluate(make_plane((0, 0, 1), 0.0), (5, 5, 0)) == 0.0

    def test_exact_distances(self):
        assert distance(make_sphere((0, 0, 0), 1.0), (2, 0, 0)) == 1.0
        assert distance(make_plane((0, 0, 1), 0.0), (1, 2, 3)) == pytest.approx(3.0)

    def test_first_order_cylinder_distance(self):
        q = make_cylinder((0, 0, 0), (0, 0, 1), 1.0)
        # (r² − 1) / 2r at r = 2
        assert distance(q, (2, 0, 5)) == pytest.approx(0.75)

    def test_cone_apex_is_degenerate(self):
        q = make_cone((0, 0, 0), (0, 0, 1), np.pi / 4)
        with pytest.raises(DegenerateGradient) as info:
            distance(q, (0, 0, 0))
        assert info.value.fallback == 0.0

    def test_vectorized_matches_scalar(self, rng):
        q = make_cylinder((0.1, 0, 0), (1, 1, 0), 0.3)
        pts = rng.uniform(-1, 1, size=(20, 3))
        assert np.allclose(distances(q, pts), [distance(q, p) for p in pts])


class TestClassify:
    @pytest.mark.parametrize("coeffs, expected", [
        (UNIT_SPHERE, PrimitiveType.SPHERE),
        ([1, 1, 0, -1, 0, 0, 0, 0, 0, 0], PrimitiveType.CYLINDER),
        ([1, 1, -1, 0, 0, 0, 0, 0, 0, 0], PrimitiveType.CONE),
        ([0, 0, 0, 0, 0, 0, 0, 0, 0, 1], PrimitiveType.PLANE),
        ([1, 2, 3, -1, 0, 0, 0, 0, 0, 0], PrimitiveType.NULL),
        ([1, 1, 1, 1, 0, 0, 0, 0, 0, 0], PrimitiveType.NULL),
    ])
    def test_signatures(self, coeffs, expected):
        assert classify(np.array(coeffs, dtype=float)) is expected

    def test_constructors_classify_as_their_type(self):
        assert classify(make_sphere((0.2, 0.1, 0), 0.4)) is PrimitiveType.SPHERE
        assert classify(make_cylinder((0, 0.3, 0), (1, 2, 3), 0.2)) is PrimitiveType.CYLINDER
        assert classify(make_cone((0.1, 0, 0), (0, 1, 1), 0.5)) is PrimitiveType.CONE

    def test_type_survives_similarity(self):
        angle = 0.7
        transform = np.eye(4)
        transform[:3, :3] = 2.0 * np.array([[np.cos(angle), -np.sin(angle), 0],
                                            [np.sin(angle), np.cos(angle), 0], [0, 0, 1]])
        transform[:3, 3] = (0.3, -0.2, 0.1)
        moved = transform_quadric(make_cone((0, 0, 0), (1, 0, 1), 0.4), transform)
        assert classify(moved) is PrimitiveType.CONE

    def test_type_survives_random_rigid_poses(self, rng):
        shapes = [make_plane((0, 0, 1), 0.0), make_cylinder((0, 0, 0), (0, 0, 1), 0.3),
                  make_sphere((0, 0, 0), 0.4), make_cone((0, 0, 0), (0, 0, 1), 0.5)]
        for rotation in Rotation.random(100, random_state=0).as_matrix():
            transform = random_pose(rotation, rng)
            for q in shapes:
                assert classify(transform_quadric(q, transform)) is q.type_tag


class TestAxis:
    def test_plane_normal(self):
        assert np.allclose(axis_of(make_plane((0, 0, 1), 0.0)), (0, 0, 1))

    def test_cylinder_axis(self):
        assert np.allclose(axis_of(quadric_from_coeffs([1, 1, 0, -1, 0, 0, 0, 0, 0, 0])), (0, 0, 1))

    def test_sign_canonicalization(self):
        assert np.allclose(axis_of(make_plane((0, 0, -1), -3.0)), (0, 0, 1))

    def test_sphere_has_no_axis(self):
        with pytest.raises(NoAxis):
            axis_of(make_sphere((0, 0, 0), 1.0))


class TestFitting:
    def test_plane_from_four_points(self):
        pts = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [1, 1, 0]], dtype=float)
        q = fit_quadric(pts, constrain=PrimitiveType.PLANE)
        assert q.type_tag is PrimitiveType.PLANE
        assert fit_residual(q, pts) < 1e-18

    def test_sphere_from_exact_samples(self):
        pts = fibonacci_sphere(32)
        q = fit_quadric(pts)
        assert classify(q) is PrimitiveType.SPHERE
        assert q.type_tag is PrimitiveType.SPHERE
        assert distances(q, pts).max() < 1e-6

    def test_constrained_cylinder_recovers_axis(self, rng):
        angles = rng.uniform(0, 2 * np.pi, 30)
        heights = rng.uniform(-0.5, 0.5, 30)
        pts = np.stack([0.3 * np.cos(angles), 0.3 * np.sin(angles), heights], axis=1)
        q = fit_quadric(pts, constrain=PrimitiveType.CYLINDER)
        assert q.type_tag is PrimitiveType.CYLINDER
        assert abs(axis_of(q) @ np.array([0, 0, 1.0])) > np.cos(np.radians(1.0))
        assert distances(q, pts).max() < 1e-6

    @pytest.mark.parametrize("seed", range(5))
    def test_minimal_jittered_cylinder_recovers_axis(self, seed):
        rng = np.random.default_rng(seed)
        axis = rng.normal(size=3)
        axis /= np.linalg.norm(axis)
        # nine points spread around the circumference, jittered off the surface
        angles = 2 * np.pi * (np.arange(9) + rng.uniform(0, 1, 9)) / 9
        local = np.stack([0.3 * np.cos(angles), 0.3 * np.sin(angles), rng.uniform(-0.5, 0.5, 9)], axis=1)
        frame = Rotation.align_vectors([axis], [[0, 0, 1]])[0].as_matrix()
        pts = local @ frame.T + rng.uniform(-0.2, 0.2, 3) + rng.normal(scale=1e-5, size=(9, 3))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            q = fit_quadric(pts, constrain=PrimitiveType.CYLINDER)
        assert q.type_tag is PrimitiveType.CYLINDER
        assert abs(axis_of(q) @ axis) > np.cos(np.radians(5.0))

    def test_underdetermined(self):
        with pytest.raises(Underdetermined):
            fit_quadric(np.zeros((3, 3)))
        with pytest.raises(Underdetermined):
            fit_quadric(np.zeros((2, 3)), constrain=PrimitiveType.PLANE)


class TestSampling:
    def test_plane_in_unit_cube(self):
        bp = BoundedPrimitive(quadric=make_plane((0, 0, 1), 0.0), support=[[0, 0, 0], [1, 1, 0]],
                              extent=[[0, 0, 0], [1, 1, 1]])
        pts = sample_surface(bp, 512, seed=0)
        assert pts.shape == (512, 3)
        assert np.all(np.abs(pts[:, 2]) < 1e-12)
        assert np.all((pts[:, :2] >= -1e-9) & (pts[:, :2] <= 1 + 1e-9))

    def test_sphere_radius(self):
        bp = BoundedPrimitive(quadric=make_sphere((0, 0, 0), 0.5), support=[[0, 0, 0.5]],
                              extent=[[-1, -1, -1], [1, 1, 1]])
        pts = sample_surface(bp, 512, seed=1)
        assert np.allclose(np.linalg.norm(pts, axis=1), 0.5, atol=1e-6)

    def test_same_seed_same_points(self):
        bp = BoundedPrimitive(quadric=make_cylinder((0, 0, 0), (0, 0, 1), 0.25),
                              support=[[0.25, 0, -0.5], [-0.25, 0, 0.5]], extent=[[-1, -1, -0.5], [1, 1, 0.5]])
        assert np.array_equal(sample_surface(bp, 100, 7), sample_surface(bp, 100, 7))

    def test_extent_accepts_nested_lists(self):
        bp = BoundedPrimitive(quadric=make_plane((0, 0, 1), 0.0), support=[[0.2, 0.2, 0]],
                              extent=[[0, 0, -0.1], [1, 1, 0.1]])
        assert isinstance(bp.extent, np.ndarray)
        assert bp.extent.shape == (2, 3)
        assert np.array_equal(bp.extent[1], (1, 1, 0.1))

    def test_extent_must_enclose_support(self):
        with pytest.raises(ValidationError):
            BoundedPrimitive(quadric=make_plane((0, 0, 1), 0.0), support=[[2, 0, 0]], extent=[[0, 0, 0], [1, 1, 1]])
        with pytest.raises(ValidationError):
            BoundedPrimitive(quadric=make_plane((0, 0, 1), 0.0), support=[[0, 0, 0]], extent=[0, 0, 0])

    def test_rejects_nonpositive_count(self):
        bp = BoundedPrimitive(quadric=make_plane((0, 0, 1), 0.0), support=[[0, 0, 0], [1, 1, 0]])
        with pytest.raises(ValueError):
            sample_surface(bp, 0, 0)


class TestProjection:
    def test_plane(self):
        assert np.allclose(project((1, 2, 3), make_plane((0, 0, 1), 0.0)), (1, 2, 0))

    def test_sphere(self):
        assert np.allclose(project((2, 0, 0), make_sphere((0, 0, 0), 1.0)), (1, 0, 0))

    def test_cone_equidistant_foot(self):
        q = quadric_from_coeffs([1, 1, -1, 0, 0, 0, 0, 0, 0, 0])
        assert q.type_tag is PrimitiveType.CONE
        assert np.allclose(project((1, 0, 0), q), (0.5, 0, 0.5))

    def test_projected_points_lie_on_surface(self, rng):
        q = make_cylinder((0, 0, 0), (0, 1, 0), 0.4)
        out, failed = project_points(rng.uniform(-1, 1, size=(50, 3)), q)
        assert not failed.any()
        assert np.all(np.abs(evaluate(q, out)) < 1e-8)

    def test_foot_points_satisfy_the_equation(self, rng):
        makers = [
            lambda: make_plane(rng.normal(size=3), rng.uniform(-0.5, 0.5)),
            lambda: make_sphere(rng.uniform(-0.5, 0.5, 3), rng.uniform(0.1, 0.8)),
            lambda: make_cylinder(rng.uniform(-0.5, 0.5, 3), rng.normal(size=3), rng.uniform(0.1, 0.8)),
            lambda: make_cone(rng.uniform(-0.5, 0.5, 3), rng.normal(size=3), rng.uniform(0.2, 1.2)),
        ]
        for i in range(1000):
            q = makers[i % 4]()
            p = rng.uniform(-1, 1, 3)
            assert abs(evaluate(q, project(p, q))) < 1e-8, (q.type_tag, p)

    def test_projection_failure_keeps_point(self):
        out, failed = project_points(np.zeros((1, 3)), make_sphere((0, 0, 0), 1.0))
        assert failed.tolist() == [True]
        assert np.array_equal(out, np.zeros((1, 3)))


class TestSnap:
    def test_perturbed_cylinder_snaps_back(self):
        noisy = np.array(make_cylinder((0, 0, 0), (0, 0, 1), 0.5).coeffs) + 1e-4 * np.arange(10)
        q = snap_to_type(noisy, PrimitiveType.CYLINDER)
        assert q.type_tag is PrimitiveType.CYLINDER
        assert classify(q) is PrimitiveType.CYLINDER

    def test_sphere_cannot_snap_to_cone(self):
        with pytest.raises(InvalidPrimitive):
            snap_to_type(make_sphere((0, 0, 0), 1.0), PrimitiveType.CONE)


class TestRansac:
    def test_two_parallel_planes(self, rng):
        xy = rng.uniform(0, 1, size=(400, 2))
        pts = np.column_stack([xy, np.repeat([0.0, 1.0], 200)])
        found = ransac_extract(pts, RansacConfig(types=(PrimitiveType.PLANE,), iterations=50))
        assert len(found) == 2
        for bp in found:
            assert bp.type_tag is PrimitiveType.PLANE
            assert len(bp.support) == 200
            assert distances(bp.quadric, bp.support).max() < 1e-6

    def test_sphere_samples(self):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            found = ransac_extract(fibonacci_sphere(500), RansacConfig(iterations=50))
        assert len(found) == 1
        assert classify(found[0].quadric) is PrimitiveType.SPHERE

    def test_too_few_points(self):
        assert ransac_extract(np.zeros((10, 3)), RansacConfig(min_support=50)) == []

    def test_single_primitive_types(self, rng):
        cfg = RansacConfig(iterations=20, min_support=100, max_primitives=1)
        truth, found = [], []
        rotations = Rotation.random(20, random_state=1).as_matrix()
        for i, rotation in enumerate(rotations):
            type_tag = PrimitiveType.geometric()[i % 4]
            cloud = posed(canonical_cloud(type_tag, rng), random_pose(rotation, rng))
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                extracted = ransac_extract(cloud, cfg)
            truth.append(type_tag)
            found.append(extracted[0].type_tag if extracted else PrimitiveType.NULL)
        accuracy = np.mean([a is b for a, b in zip(truth, found)])
        assert accuracy >= 0.95, list(zip(truth, found))
