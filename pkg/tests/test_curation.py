import numpy as np
import pytest

from evbench import curation, so3
from evbench.colmap_io import camera_fov_deg
from evbench.curation import CurationConfig, OverlapCategory
from conftest import make_camera, make_ring_scene, make_scene


def scene_with_centers(centers):
    rng = np.random.default_rng(0)
    rotations = [np.eye(3)] * len(centers)
    return make_scene(rng, n_images=len(centers), n_points=10,
                      centers=np.asarray(centers, dtype=float), rotations=rotations)


def brute_mutual_knn(scene, k):
    # straight-line O(N^2) oracle with explicit (distance, id) sorting
    ids = sorted(scene.images)
    centers = {i: scene.images[i].center() for i in ids}
    nn = {}
    for i in ids:
        others = sorted(
            (float(np.linalg.norm(centers[i] - centers[j])), j) for j in ids if j != i
        )
        nn[i] = {j for _, j in others[:k]}
    return {
        (a, b)
        for ai, a in enumerate(ids)
        for b in ids[ai + 1 :]
        if b in nn[a] and a in nn[b]
    }


class TestMutualKnn:
    def test_two_cameras_single_pair(self):
        scene = scene_with_centers([[0, 0, 0], [1, 0, 0]])
        assert curation.mutual_knn_pairs(scene, 1) == [(1, 2)]

    def test_collinear_chain(self):
        # x = 0, 1, 2, 10: camera 3's NN is 2, but 2's NN ties to 1 (smaller id);
        # camera 4 pairs with 3 only one-way
        scene = scene_with_centers([[0, 0, 0], [1, 0, 0], [2, 0, 0], [10, 0, 0]])
        assert curation.mutual_knn_pairs(scene, 1) == [(1, 2)]

    def test_k_covers_everyone(self):
        scene = scene_with_centers(np.random.default_rng(1).uniform(0, 5, (6, 3)))
        pairs = curation.mutual_knn_pairs(scene, 5)
        assert len(pairs) == 15

    def test_matches_bruteforce_oracle(self):
        rng = np.random.default_rng(2)
        for _ in range(10):
            n = int(rng.integers(3, 40))
            scene = make_scene(rng, n_images=n, n_points=5)
            for k in (1, 3, 7):
                got = set(curation.mutual_knn_pairs(scene, k))
                assert got == brute_mutual_knn(scene, k)

    def test_monotone_in_k(self):
        rng = np.random.default_rng(3)
        scene = make_scene(rng, n_images=20, n_points=5)
        prev = set()
        for k in range(1, 8):
            cur = set(curation.mutual_knn_pairs(scene, k))
            assert prev <= cur
            prev = cur

    def test_fewer_than_two_images(self):
        scene = scene_with_centers([[0, 0, 0]])
        assert curation.mutual_knn_pairs(scene, 1) == []


class TestClassifyOverlap:
    def test_zero_angles_large(self):
        assert curation.classify_overlap_angles(0, 0, (40, 40), (90, 90)) is OverlapCategory.LARGE

    def test_small_angles_large(self):
        assert (
            curation.classify_overlap_angles(10, 5, (60, 60), (60, 60)) is OverlapCategory.LARGE
        )

    def test_one_angle_exceeding_half_sum_is_small(self):
        # None needs BOTH angles above the half-sum
        assert (
            curation.classify_overlap_angles(90, 0, (60, 60), (60, 60)) is OverlapCategory.SMALL
        )

    def test_both_angles_exceeding_is_none(self):
        assert (
            curation.classify_overlap_angles(70, 70, (60, 60), (60, 60)) is OverlapCategory.NONE
        )

    def test_boundary_equalities_fall_to_small(self):
        assert (
            curation.classify_overlap_angles(30, 0, (60, 60), (60, 60)) is OverlapCategory.SMALL
        )
        assert (
            curation.classify_overlap_angles(60, 60, (60, 60), (60, 60)) is OverlapCategory.SMALL
        )

    def test_rotation_entry_point(self):
        fov = (60.0, 60.0)
        assert curation.classify_overlap(np.eye(3), fov, fov) is OverlapCategory.LARGE
        assert curation.classify_overlap(so3.rot_y(90.0), fov, fov) is OverlapCategory.SMALL

    def test_swap_invariance(self):
        rng = np.random.default_rng(4)
        for _ in range(100):
            r = so3.random_rotation(rng)
            fov_a = tuple(rng.uniform(30, 120, 2))
            fov_b = tuple(rng.uniform(30, 120, 2))
            assert curation.classify_overlap(r, fov_a, fov_b) is curation.classify_overlap(
                r.T, fov_b, fov_a
            )


class TestScaleConsistent:
    cfg = CurationConfig()

    def test_identical_cameras(self):
        cam = make_camera()
        assert curation.scale_consistent(cam, cam, self.cfg)

    def test_focal_ratio_boundary_strict(self):
        a = make_camera(camera_id=1, fx=400.0)
        b = make_camera(camera_id=2, fx=1000.0)  # ratio exactly 2.5
        # keep FoVs inside the 15 degree gate? they are not, but the focal gate
        # alone must already reject the boundary
        assert not curation.scale_consistent(a, b, self.cfg)

    def test_resolution_ratio(self):
        a = make_camera(camera_id=1, width=640, height=480, fx=500.0)
        b = make_camera(camera_id=2, width=1920, height=1080, fx=1500.0)
        # area ratio 2073600 / 307200 = 6.75 > 3
        assert not curation.scale_consistent(a, b, self.cfg)

    def test_fov_delta_gate(self):
        a = make_camera(camera_id=1, width=640, height=480, fx=300.0)
        b = make_camera(camera_id=2, width=640, height=480, fx=600.0)
        assert not curation.scale_consistent(a, b, self.cfg)


class TestCurate:
    def test_ring_all_pairs_categories_match_bruteforce(self):
        scene = make_ring_scene(n_images=8)
        cfg = CurationConfig(k=7, max_pairs_per_scene=1000)
        pairs = curation.curate(scene, "ring", cfg)
        assert len(pairs) == 28
        for p in pairs:
            cam_a = scene.cameras[scene.images[p.image_a].camera_id]
            cam_b = scene.cameras[scene.images[p.image_b].camera_id]
            r_rel, t_rel = curation.relative_pose(scene, p.image_a, p.image_b)
            expect = curation.classify_overlap(r_rel, camera_fov_deg(cam_a), camera_fov_deg(cam_b))
            assert p.category is expect
            np.testing.assert_allclose(p.r_rel_gt, r_rel)
            np.testing.assert_allclose(p.t_rel_gt, t_rel)

    def test_cap_is_deterministic(self):
        scene = make_ring_scene(n_images=8)
        cfg = CurationConfig(k=7, max_pairs_per_scene=2, seed=5)
        a = curation.curate(scene, "s", cfg)
        b = curation.curate(scene, "s", cfg)
        assert len(a) == 2
        assert [p.key() for p in a] == [p.key() for p in b]

    def test_balance_to_min_category(self):
        scene = make_ring_scene(n_images=8)
        cfg = CurationConfig(k=7, max_pairs_per_scene=1000)
        pairs = curation.curate(scene, "s", cfg)
        cats = [OverlapCategory.LARGE] * 5 + [OverlapCategory.SMALL] * 3 + [OverlapCategory.NONE]
        for p, c in zip(pairs, cats):
            p.category = c
        balanced = curation.balance_categories(pairs[: len(cats)], seed=1)
        counts = {c: sum(1 for p in balanced if p.category is c) for c in OverlapCategory}
        assert counts == {c: 1 for c in OverlapCategory}

    def test_verification_drops_none_with_matches(self):
        scene = make_ring_scene(n_images=8)
        cfg = CurationConfig(k=7, max_pairs_per_scene=1000)
        base = curation.curate(scene, "s", cfg)
        names = {i: scene.images[i].name for i in scene.images}
        table = {}
        for p in base:
            key = tuple(sorted((names[p.image_a], names[p.image_b])))
            if p.category is OverlapCategory.NONE:
                table[key] = curation.VerificationEntry(5, 0.0)  # should be dropped
            elif p.category is OverlapCategory.LARGE:
                table[key] = curation.VerificationEntry(100, 0.5)  # consistent
            else:
                table[key] = curation.VerificationEntry(10, 0.1)  # consistent
        got = curation.curate(scene, "s", cfg, verification=table)
        assert all(p.category is not OverlapCategory.NONE for p in got)
        assert all(p.verified for p in got)
        n_none = sum(1 for p in base if p.category is OverlapCategory.NONE)
        assert len(got) == len(base) - n_none

    def test_verification_coverage_consistency(self):
        scene = make_ring_scene(n_images=16)
        cfg = CurationConfig(k=15, max_pairs_per_scene=1000)
        base = curation.curate(scene, "s", cfg)
        large = [p for p in base if p.category is OverlapCategory.LARGE]
        assert large, "dense ring must contain Large pairs"
        names = {i: scene.images[i].name for i in scene.images}
        key = tuple(sorted((names[large[0].image_a], names[large[0].image_b])))
        # low coverage contradicts the geometric Large label -> dropped
        got = curation.curate(scene, "s", cfg, verification={key: curation.VerificationEntry(3, 0.1)})
        assert large[0].key() not in {p.key() for p in got}

    def test_exclusion_list(self):
        scene = make_ring_scene(n_images=8)
        cfg = CurationConfig(k=7, max_pairs_per_scene=1000)
        base = curation.curate(scene, "s", cfg)
        names = {i: scene.images[i].name for i in scene.images}
        drop = base[0]
        excl = {("s", *sorted((names[drop.image_a], names[drop.image_b])))}
        got = curation.curate(scene, "s", cfg, exclusions=excl)
        assert drop.key() not in {p.key() for p in got}
        assert len(got) == len(base) - 1

    def test_pair_invariants(self):
        scene = make_ring_scene(n_images=6)
        for p in curation.curate(scene, "s", CurationConfig(k=5, max_pairs_per_scene=1000)):
            assert p.image_a < p.image_b
            so3.validate_rotation(p.r_rel_gt, atol=1e-9)


class TestPairFiles:
    def test_jsonl_round_trip(self, tmp_path):
        scene = make_ring_scene(n_images=6)
        pairs = curation.curate(scene, "s", CurationConfig(k=5))
        path = tmp_path / "pairs.jsonl"
        curation.write_pairs_jsonl(pairs, path)
        back = curation.read_pairs_jsonl(path)
        assert [p.key() for p in back] == [p.key() for p in pairs]
        for a, b in zip(pairs, back):
            np.testing.assert_array_equal(a.r_rel_gt, b.r_rel_gt)
            assert a.category is b.category

    def test_verification_csv_loader(self, tmp_path):
        p = tmp_path / "ver.csv"
        p.write_text("image_a,image_b,match_count,coverage\nb.jpg,a.jpg,12,0.5\n")
        table = curation.load_verification_table(p)
        assert table[("a.jpg", "b.jpg")].match_count == 12

    def test_exclusion_loader(self, tmp_path):
        p = tmp_path / "excl.txt"
        p.write_text("# comment\nscene1,b.jpg,a.jpg\n")
        assert curation.load_exclusion_list(p) == {("scene1", "a.jpg", "b.jpg")}
