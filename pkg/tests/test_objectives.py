import struct

import numpy as np
import pytest

from byzrobust.objectives import (ObjectiveError, QuadraticObjective,
                                  SoftmaxObjective, global_optimum,
                                  load_idx_images, load_idx_labels,
                                  partition_iid, partition_per_digit_groups)


def toy_softmax(n=40, dim=3, n_classes=2, seed=0):
    rng = np.random.default_rng(seed)
    labels = rng.integers(0, n_classes, size=n)
    means = np.eye(n_classes, dim) * 3.0
    feats = means[labels] + rng.standard_normal((n, dim))
    return SoftmaxObjective(feats, labels, n_classes)


class TestQuadratic:
    def test_noiseless_gradient(self):
        obj = QuadraticObjective(np.array([0.0]))
        rng = np.random.default_rng(0)
        assert obj.sample_gradient(np.array([2.0]), rng) == pytest.approx(2.0)

    def test_gradient_vanishes_at_target(self):
        obj = QuadraticObjective(np.array([1.0, 1.0]))
        g = obj.full_gradient(np.array([1.0, 1.0]))
        assert np.array_equal(g, [0.0, 0.0])

    def test_sampled_mean_matches_full_gradient(self):
        obj = QuadraticObjective(np.array([0.5, -1.0]), curvature=2.0, noise_std=0.1)
        rng = np.random.default_rng(1)
        x = np.array([1.0, 3.0])
        draws = np.stack([obj.sample_gradient(x, rng) for _ in range(100_000)])
        tol = 4 * 0.1 / np.sqrt(100_000)
        assert np.all(np.abs(draws.mean(axis=0) - obj.full_gradient(x)) < tol)

    def test_sample_variance_matches_bound(self):
        obj = QuadraticObjective(np.zeros(3), noise_std=0.2)
        rng = np.random.default_rng(2)
        x = np.ones(3)
        draws = np.stack([obj.sample_gradient(x, rng) for _ in range(50_000)])
        var = np.sum(np.var(draws, axis=0))
        assert var == pytest.approx(obj.grad_variance_bound, rel=0.05)

    def test_curvature_identity(self):
        # <grad(x) - grad(y), x - y> = c ||x - y||^2 exactly.
        obj = QuadraticObjective(np.array([1.0, -2.0]), curvature=3.0)
        rng = np.random.default_rng(3)
        for _ in range(20):
            x, y = rng.normal(size=2), rng.normal(size=2)
            lhs = (obj.full_gradient(x) - obj.full_gradient(y)) @ (x - y)
            assert lhs == pytest.approx(3.0 * np.sum((x - y) ** 2))

    def test_rejects_bad_params(self):
        with pytest.raises(ObjectiveError):
            QuadraticObjective(np.zeros(2), curvature=0.0)
        with pytest.raises(ObjectiveError):
            QuadraticObjective(np.zeros(2), noise_std=-1.0)


class TestSoftmax:
    def test_loss_at_origin_is_log_classes(self):
        obj = toy_softmax(n_classes=2)
        loss, _ = obj.loss_and_gradient(np.zeros(obj.dim), [0])
        assert loss == pytest.approx(np.log(2))

        obj10 = SoftmaxObjective(np.ones((1, 4)), np.array([3]), 10)
        loss, _ = obj10.loss_and_gradient(np.zeros(obj10.dim))
        assert loss == pytest.approx(np.log(10))

    def test_probabilities_normalized(self):
        obj = toy_softmax()
        rng = np.random.default_rng(4)
        probs = obj.probabilities(rng.normal(size=obj.dim))
        assert np.allclose(probs.sum(axis=1), 1.0)

    def test_gradient_matches_finite_differences(self):
        obj = toy_softmax(n=5, dim=2, n_classes=2, seed=5)
        rng = np.random.default_rng(6)
        h = 1e-6
        for _ in range(20):
            x = rng.normal(size=obj.dim)
            _, grad = obj.loss_and_gradient(x)
            fd = np.empty_like(grad)
            for c in range(obj.dim):
                e = np.zeros(obj.dim)
                e[c] = h
                lp, _ = obj.loss_and_gradient(x + e)
                lm, _ = obj.loss_and_gradient(x - e)
                fd[c] = (lp - lm) / (2 * h)
            assert np.allclose(grad, fd, rtol=1e-5, atol=1e-6)

    def test_sample_gradient_unbiased(self):
        obj = toy_softmax(n=30, seed=7)
        rng = np.random.default_rng(8)
        x = rng.normal(size=obj.dim)
        full = obj.full_gradient(x)
        draws = np.stack([obj.sample_gradient(x, rng, batch_size=4)
                          for _ in range(20_000)])
        assert np.allclose(draws.mean(axis=0), full, atol=0.02)

    def test_accuracy_at_origin_uses_lowest_class_tie_rule(self):
        obj = toy_softmax(n=100, seed=9)
        expected = float(np.mean(obj.labels == 0))
        assert obj.accuracy(np.zeros(obj.dim)) == pytest.approx(expected)

    def test_accuracy_single_sample(self):
        obj = SoftmaxObjective(np.array([[1.0, 0.0]]), np.array([0]), 2)
        x = np.array([1.0, 0.0, -1.0, 0.0])  # class-0 block scores higher
        assert obj.accuracy(x) == 1.0

    def test_perfectly_separable_fit(self):
        obj = toy_softmax(n=60, dim=4, n_classes=3, seed=10)
        x = global_optimum([obj], grad_tol=1e-6)
        # Well-separated blobs: the pooled fit classifies its train set.
        assert obj.accuracy(x) == 1.0

    def test_dimension_mismatch(self):
        obj = toy_softmax()
        with pytest.raises(ObjectiveError):
            obj.loss_and_gradient(np.zeros(obj.dim + 1))

    def test_empty_batch_rejected(self):
        obj = toy_softmax()
        with pytest.raises(ObjectiveError):
            obj.loss_and_gradient(np.zeros(obj.dim), [])


def write_idx_labels(path, labels):
    with open(path, "wb") as fh:
        fh.write(struct.pack(">II", 2049, len(labels)))
        fh.write(bytes(labels))


def write_idx_images(path, images):
    n, rows, cols = images.shape
    with open(path, "wb") as fh:
        fh.write(struct.pack(">IIII", 2051, n, rows, cols))
        fh.write(images.astype(np.uint8).tobytes())


class TestIdxLoading:
    def test_label_fixture(self, tmp_path):
        path = tmp_path / "labels"
        write_idx_labels(path, [5, 0, 4])
        assert np.array_equal(load_idx_labels(path), [5, 0, 4])

    def test_image_fixture_scaled(self, tmp_path):
        path = tmp_path / "images"
        imgs = np.arange(2 * 2 * 3, dtype=np.uint8).reshape(2, 2, 3)
        write_idx_images(path, imgs)
        out = load_idx_images(path)
        assert out.shape == (2, 6)
        assert out.max() <= 1.0
        assert out[1, -1] == pytest.approx(11 / 255)

    def test_wrong_magic(self, tmp_path):
        path = tmp_path / "bad"
        with open(path, "wb") as fh:
            fh.write(struct.pack(">IIII", 1234, 1, 1, 1))
            fh.write(b"\x00")
        with pytest.raises(ObjectiveError, match="magic"):
            load_idx_images(path)
        with pytest.raises(ObjectiveError, match="magic"):
            load_idx_labels(tmp_path / "bad")

    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty"
        path.write_bytes(b"")
        with pytest.raises(ObjectiveError, match="truncated"):
            load_idx_images(path)
        with pytest.raises(ObjectiveError, match="truncated"):
            load_idx_labels(path)

    def test_truncated_payload(self, tmp_path):
        path = tmp_path / "short"
        with open(path, "wb") as fh:
            fh.write(struct.pack(">II", 2049, 10))
            fh.write(b"\x01\x02")
        with pytest.raises(ObjectiveError, match="expected 10"):
            load_idx_labels(path)


class TestPartition:
    def test_iid_even_disjoint_cover(self):
        shards = partition_iid(100, 10, seed=0)
        assert all(len(s) == 10 for s in shards)
        combined = np.concatenate(shards)
        assert len(set(combined.tolist())) == 100

    def test_iid_deterministic(self):
        a = partition_iid(50, 7, seed=3)
        b = partition_iid(50, 7, seed=3)
        assert all(np.array_equal(x, y) for x, y in zip(a, b))

    def test_per_digit_groups(self):
        labels = np.repeat(np.arange(10), 12)
        shards = partition_per_digit_groups(labels, 30)
        assert np.all(labels[shards[0]] == 0)
        assert np.all(labels[shards[29]] == 9)
        assert sum(len(s) for s in shards) == len(labels)
        # Agents 3d..3d+2 split digit d evenly.
        assert all(len(s) == 4 for s in shards)

    def test_per_digit_wrong_agent_count(self):
        with pytest.raises(ObjectiveError):
            partition_per_digit_groups(np.zeros(10, dtype=int), 29)


class TestGlobalOptimum:
    def test_two_quadratics_mean(self):
        objs = [QuadraticObjective(np.array([0.0])), QuadraticObjective(np.array([2.0]))]
        assert global_optimum(objs) == pytest.approx(1.0)

    def test_three_quadratics(self):
        objs = [QuadraticObjective(np.array([float(b)])) for b in (0, 1, 2)]
        assert global_optimum(objs) == pytest.approx(1.0)

    def test_weighted_by_curvature(self):
        objs = [QuadraticObjective(np.array([0.0]), curvature=1.0),
                QuadraticObjective(np.array([3.0]), curvature=3.0)]
        assert global_optimum(objs) == pytest.approx(9 / 4)

    def test_softmax_gradient_certificate(self):
        objs = [toy_softmax(n=50, dim=3, n_classes=2, seed=s) for s in (0, 1)]
        x = global_optimum(objs, grad_tol=1e-6)
        pooled = sum(o.full_gradient(x) for o in objs)
        assert np.linalg.norm(pooled) < 1e-6

    def test_empty_rejected(self):
        with pytest.raises(ObjectiveError):
            global_optimum([])
