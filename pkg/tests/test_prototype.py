import numpy as np
import pytest

from fedph.datagen import ClientDataset
from fedph.mathcore import RngStream
from fedph.model import BackboneSpec, backbone_forward, clip_norm, init_head, project
from fedph.prototype import (
    AggregationError,
    MissingClassError,
    PrototypeSet,
    aggregate_uniform,
    aggregate_weighted,
    local_prototypes,
)


def dataset_from(xs, ys, client_id=0):
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.int64)
    return ClientDataset(
        client_id=client_id,
        condition=0,
        train_x=xs,
        train_y=ys,
        test_x=np.empty((0, xs.shape[1])),
        test_y=np.empty(0, dtype=np.int64),
    )


class TestPrototypeSet:
    def test_classes_sorted(self):
        ps = PrototypeSet(
            {3: np.zeros(2), 1: np.ones(2)}, {3: 1, 1: 2}
        )
        assert ps.classes == (1, 3)
        assert ps.count(1) == 2

    def test_mismatched_keys_rejected(self):
        with pytest.raises(ValueError):
            PrototypeSet({0: np.zeros(2)}, {1: 1})

    def test_non_finite_rejected(self):
        with pytest.raises(ValueError):
            PrototypeSet({0: np.array([np.nan, 0.0])}, {0: 1})

    def test_vectors_read_only(self):
        ps = PrototypeSet({0: np.zeros(2)}, {0: 1})
        with pytest.raises(ValueError):
            ps.vector(0)[0] = 5.0


class TestLocalPrototypes:
    def setup_method(self):
        self.backbone = BackboneSpec.from_seed(0, 4, 6)
        self.params = init_head(RngStream(1), 6, 3, 2)

    def test_single_sample_is_clipped_projection(self):
        x = RngStream(2).normal(0, 1, (1, 4))
        ds = dataset_from(x, [1])
        protos = local_prototypes(ds, self.params, self.backbone, 0.5)
        z = project(self.params, backbone_forward(self.backbone, x[0]))
        assert np.allclose(protos.vector(1), clip_norm(z, 0.5), atol=0)
        assert protos.count(1) == 1

    def test_symmetric_projections_cancel(self):
        ps = PrototypeSet({0: np.zeros(3)}, {0: 2})
        # direct construction sanity: mean of p and -p is the zero vector
        p = np.array([0.3, -0.2, 0.1])
        mean = (p + (-p)) / 2
        assert np.array_equal(mean, ps.vector(0))

    def test_matches_bruteforce_per_sample_oracle(self):
        rng = RngStream(3)
        xs = rng.normal(0, 1, (40, 4))
        ys = rng.integers(0, 2, 40)
        ds = dataset_from(xs, ys)
        bound = 0.8
        protos = local_prototypes(ds, self.params, self.backbone, bound)
        for j in (0, 1):
            acc = np.zeros(3)
            n = 0
            for x, y in zip(xs, ys):
                if y == j:
                    z = project(self.params, backbone_forward(self.backbone, x))
                    acc += clip_norm(z, bound)
                    n += 1
            assert np.allclose(protos.vector(j), acc / n, atol=1e-10)
            assert protos.count(j) == n

    def test_norm_bounded_by_clip(self):
        rng = RngStream(4)
        xs = rng.normal(0, 5, (30, 4))
        ds = dataset_from(xs, rng.integers(0, 2, 30))
        protos = local_prototypes(ds, self.params, self.backbone, 0.3)
        for j, vec, _ in protos.items():
            assert np.linalg.norm(vec) <= 0.3 + 1e-12


def make_set(vals_counts: dict[int, tuple[list, int]]) -> PrototypeSet:
    return PrototypeSet(
        {j: np.asarray(v, dtype=np.float64) for j, (v, _) in vals_counts.items()},
        {j: c for j, (_, c) in vals_counts.items()},
    )


class TestAggregateWeighted:
    def test_equal_counts_mean(self):
        u = make_set({0: ([1.0, 0.0], 2)})
        v = make_set({0: ([0.0, 1.0], 2)})
        out = aggregate_weighted([u, v])
        assert np.allclose(out.vector(0), [0.5, 0.5])
        assert out.count(0) == 4

    def test_one_three_weighting(self):
        u = make_set({0: ([1.0, 0.0], 1)})
        v = make_set({0: ([0.0, 1.0], 3)})
        out = aggregate_weighted([u, v])
        assert np.allclose(out.vector(0), [0.25, 0.75])

    def test_pooled_mean_property(self):
        # aggregate of per-client class means equals the pooled mean
        rng = RngStream(5)
        for _ in range(10):
            sets = []
            pooled: dict[int, list] = {0: [], 1: []}
            for _client in range(4):
                vals = {}
                for j in (0, 1):
                    n = int(rng.integers(1, 6))
                    pts = rng.normal(0, 1, (n, 3))
                    pooled[j].append(pts)
                    vals[j] = (pts.mean(axis=0).tolist(), n)
                sets.append(make_set(vals))
            out = aggregate_weighted(sets)
            for j in (0, 1):
                expected = np.concatenate(pooled[j]).mean(axis=0)
                assert np.allclose(out.vector(j), expected, atol=1e-9)

    def test_weights_sum_to_one(self):
        counts = [3, 5, 9]
        total = sum(counts)
        assert sum(c / total for c in counts) == pytest.approx(1.0, abs=1e-12)

    def test_permutation_invariant(self):
        rng = RngStream(6)
        sets = [
            make_set({0: (rng.normal(0, 1, 3).tolist(), int(rng.integers(1, 9)))})
            for _ in range(5)
        ]
        a = aggregate_weighted(sets)
        b = aggregate_weighted(sets[::-1])
        assert np.allclose(a.vector(0), b.vector(0), atol=1e-15)

    def test_zero_count_client_contributes_nothing(self):
        u = make_set({0: ([1.0, 1.0], 0)})
        v = make_set({0: ([0.0, 2.0], 4)})
        out = aggregate_weighted([u, v])
        assert np.allclose(out.vector(0), [0.0, 2.0])

    def test_all_zero_counts_rejected(self):
        u = make_set({0: ([1.0, 1.0], 0)})
        with pytest.raises(AggregationError):
            aggregate_weighted([u])

    def test_empty_input_rejected(self):
        with pytest.raises(AggregationError):
            aggregate_weighted([])


class TestAggregateUniform:
    def test_single_client_identity(self):
        u = make_set({0: ([1.5, -0.5], 3), 1: ([0.0, 2.0], 1)})
        out = aggregate_uniform([u], 1)
        for j in (0, 1):
            assert np.array_equal(out.vector(j), u.vector(j))

    def test_identical_locals_idempotent(self):
        u = make_set({0: ([1.0, 2.0], 2)})
        out = aggregate_uniform([u, u, u], 3)
        assert np.allclose(out.vector(0), [1.0, 2.0], atol=1e-15)

    def test_equals_weighted_for_equal_counts(self):
        rng = RngStream(7)
        sets = [
            make_set({j: (rng.normal(0, 1, 4).tolist(), 5) for j in range(3)})
            for _ in range(4)
        ]
        uni = aggregate_uniform(sets, 4)
        wtd = aggregate_weighted(sets)
        for j in range(3):
            assert np.allclose(uni.vector(j), wtd.vector(j), atol=1e-12)

    def test_missing_class_rejected(self):
        full = make_set({0: ([1.0], 1), 1: ([2.0], 1)})
        partial = make_set({0: ([1.0], 1)})
        with pytest.raises(MissingClassError):
            aggregate_uniform([full, partial], 2)

    def test_wrong_client_count_rejected(self):
        u = make_set({0: ([1.0], 1)})
        with pytest.raises(AggregationError):
            aggregate_uniform([u], 2)

    def test_convex_bound_preserved(self):
        # means of clipped prototypes stay inside the clip ball
        rng = RngStream(8)
        bound = 1.0
        sets = []
        for _ in range(3):
            v = rng.normal(0, 1, 4)
            v = v / np.linalg.norm(v) * bound
            sets.append(make_set({0: (v.tolist(), 2)}))
        for agg in (aggregate_uniform(sets, 3), aggregate_weighted(sets)):
            assert np.linalg.norm(agg.vector(0)) <= bound + 1e-12
