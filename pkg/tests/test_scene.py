import numpy as np
import pytest
from pydantic import ValidationError

from geometry.quadric import distances
from geometry.schemas import PrimitiveType
from scene.errors import InvariantViolation, ParseError, SpecInfeasible, TooFewPoints
from scene.generator import generate_shape
from scene.lpc import read_lpc, read_scan, write_lpc, write_scan
from scene.partial import add_noise, crop_mask, farthest_point_sample, make_partial
from scene.schemas import PartialScan, ShapeSpec


class TestGenerator:
    def test_plane_only_box(self, box_cloud):
        assert box_cloud.primitive_count == 6
        assert box_cloud.types == [PrimitiveType.PLANE] * 6
        assert len(box_cloud.points) == 512
        assert sorted(set(box_cloud.labels.tolist())) == [1, 2, 3, 4, 5, 6]

    @pytest.mark.parametrize("seed", range(4))
    def test_default_mix_is_mostly_planes(self, seed):
        counts = generate_shape(ShapeSpec(point_count=1024, seed=seed)).type_counts()
        assert counts["plane"] >= 6
        assert counts["plane"] == max(counts.values())

    def test_points_fill_unit_cube(self, box_cloud):
        span = box_cloud.points.max(axis=0) - box_cloud.points.min(axis=0)
        assert span.max() == pytest.approx(1.0)
        assert np.all(np.abs(box_cloud.points) <= 0.5 + 1e-9)

    def test_labels_lie_on_their_primitive(self, mixed_cloud):
        lo, hi = ShapeSpec().primitive_count_range
        assert lo <= mixed_cloud.primitive_count <= hi
        for g, prim in enumerate(mixed_cloud.primitives, start=1):
            assert prim.type_tag is not PrimitiveType.NULL
            assert distances(prim.quadric, mixed_cloud.support_of(g)).max() < 1e-6

    def test_same_seed_same_shape(self):
        spec = ShapeSpec(point_count=256, seed=11)
        a, b = generate_shape(spec), generate_shape(spec)
        assert np.array_equal(a.points, b.points)
        assert np.array_equal(a.labels, b.labels)
        assert [p.quadric for p in a.primitives] == [p.quadric for p in b.primitives]

    def test_random_pose_keeps_labels_on_surfaces(self):
        cloud = generate_shape(ShapeSpec(point_count=256, seed=5), random_pose=True)
        for g, prim in enumerate(cloud.primitives, start=1):
            assert distances(prim.quadric, cloud.support_of(g)).max() < 1e-6

    @pytest.mark.parametrize("spec", [
        ShapeSpec(primitive_count_range=(2, 3), point_count=64),
        ShapeSpec(primitive_count_range=(7, 7), type_mix={PrimitiveType.PLANE: 1.0}, point_count=64),
    ])
    def test_unrealizable_counts(self, spec):
        with pytest.raises(SpecInfeasible):
            generate_shape(spec)

    def test_spec_validation(self):
        with pytest.raises(ValidationError):
            ShapeSpec(primitive_count_range=(1, 1))
        with pytest.raises(ValidationError):
            ShapeSpec(type_mix={PrimitiveType.NULL: 1.0})
        with pytest.raises(ValidationError):
            ShapeSpec(unknown=1)


class TestPartial:
    def test_crop_is_a_half_space(self, box_cloud):
        direction = np.array([1.0, 2.0, -0.5]) / np.linalg.norm([1.0, 2.0, -0.5])
        removed = crop_mask(box_cloud.points, 0.25, direction)
        assert removed.sum() == 128
        projection = box_cloud.points @ direction
        assert projection[removed].min() >= projection[~removed].max()

    def test_partial_is_subset_of_exact_size(self, box_cloud):
        scan = make_partial(box_cloud, 0.5, seed=3, target_count=128, shape_id="box")
        assert scan.points.shape == (128, 3)
        source = {tuple(p) for p in box_cloud.points.tolist()}
        assert all(tuple(p) in source for p in scan.points.tolist())
        assert scan.source.shape_id == "box"
        assert scan.source.ratio == 0.5

    def test_partial_keeps_all_survivors_when_target_matches(self, box_cloud):
        scan = make_partial(box_cloud, 0.75, seed=0, target_count=128)
        assert len(scan.points) == 128
        assert len({tuple(p) for p in scan.points.tolist()}) == 128

    def test_too_few_points(self, box_cloud):
        with pytest.raises(TooFewPoints):
            make_partial(box_cloud, 0.75, seed=0, target_count=200)

    @pytest.mark.parametrize("ratio", [0.0, 1.0, -0.1])
    def test_ratio_bounds(self, box_cloud, ratio):
        with pytest.raises(ValueError):
            make_partial(box_cloud, ratio, seed=0, target_count=16)

    def test_farthest_point_sample(self, box_cloud):
        picked = farthest_point_sample(box_cloud.points, 64, seed=2)
        assert len(set(picked.tolist())) == 64
        assert np.array_equal(picked, farthest_point_sample(box_cloud.points, 64, seed=2))

    def test_zero_noise_is_identity(self, box_cloud):
        scan = make_partial(box_cloud, 0.5, seed=1, target_count=64)
        assert np.array_equal(add_noise(scan, 0.0, seed=4).points, scan.points)

    def test_noise_level(self, rng):
        scan = PartialScan(points=rng.uniform(-0.5, 0.5, size=(10000, 3)))
        noisy = add_noise(scan, 0.01, seed=9)
        rms = np.sqrt(np.mean((noisy.points - scan.points) ** 2))
        assert rms == pytest.approx(0.01, rel=0.1)
        assert noisy.source.noise_sigma == 0.01


class TestLpc:
    def test_round_trip(self, box_cloud, tmp_path):
        path = tmp_path / "box.lpc"
        write_lpc(box_cloud, path)
        back = read_lpc(path)
        assert np.allclose(back.points, box_cloud.points, atol=1e-12, rtol=0)
        assert np.array_equal(back.labels, box_cloud.labels)
        for a, b in zip(back.primitives, box_cloud.primitives):
            assert a.type_tag is b.type_tag
            assert np.allclose(a.quadric.vector, b.quadric.vector, atol=1e-12)

    def test_truncated(self, box_cloud, tmp_path):
        path = tmp_path / "box.lpc"
        write_lpc(box_cloud, path)
        lines = path.read_text().splitlines()
        path.write_text("\n".join(lines[:-3]) + "\n")
        with pytest.raises(ParseError):
            read_lpc(path)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.lpc"
        path.write_text("PLY\ncounts 0 0\n")
        with pytest.raises(ParseError) as info:
            read_lpc(path)
        assert info.value.line == 1

    def test_label_without_primitive(self, box_cloud, tmp_path):
        path = tmp_path / "box.lpc"
        write_lpc(box_cloud, path)
        lines = path.read_text().splitlines()
        head, _ = lines[-1].rsplit(" ", 1)
        lines[-1] = head + " 9"
        path.write_text("\n".join(lines) + "\n")
        with pytest.raises(InvariantViolation):
            read_lpc(path)

    def test_scan_round_trip(self, box_cloud, tmp_path):
        scan = make_partial(box_cloud, 0.5, seed=2, target_count=64)
        path = tmp_path / "scan.lpc"
        write_scan(scan, path)
        assert np.allclose(read_scan(path).points, scan.points, atol=1e-12, rtol=0)
        assert "counts 64 0" in path.read_text()

    def test_labeled_file_reads_as_scan(self, box_cloud, tmp_path):
        path = tmp_path / "box.lpc"
        write_lpc(box_cloud, path)
        assert len(read_scan(path).points) == len(box_cloud.points)
