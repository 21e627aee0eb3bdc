import json

import numpy as np
import pytest

from trimodal.encoders import TriModalNetwork
from trimodal.retrieval import (
    RETRIEVAL_DIRECTIONS,
    RetrievalIndex,
    average_precision,
    evaluate_retrieval,
    l1_normalize,
    mean_average_precision,
    permutation_baseline,
    rank_by_distance,
    rank_gallery,
    write_ranked_lists,
)


def index(ids, labels, features, modality="mesh") -> RetrievalIndex:
    return RetrievalIndex(object_ids=ids, labels=labels, modality=modality, features=l1_normalize(features))


@pytest.fixture
def gallery() -> RetrievalIndex:
    return index(["g1", "g2", "g3"], [0, 1, 0], [[1.0, 0.0], [0.5, 0.5], [0.0, 1.0]])


class TestAveragePrecision:
    def test_hits_at_one_and_three(self):
        assert average_precision([True, False, True]) == pytest.approx(5 / 6)

    def test_hits_at_two_and_five(self):
        assert average_precision([0, 1, 0, 0, 1]) == pytest.approx((1 / 2 + 2 / 5) / 2)

    def test_perfect(self):
        assert average_precision([1, 1, 0, 0]) == 1.0

    def test_nothing_relevant(self):
        with pytest.raises(ValueError):
            average_precision([False, False])


class TestNormalization:
    def test_rows_sum_to_one(self):
        normalized = l1_normalize(np.array([[3.0, -1.0], [0.0, 2.0]]))
        np.testing.assert_allclose(np.abs(normalized).sum(axis=1), 1.0)
        np.testing.assert_allclose(normalized[0], [0.75, -0.25])

    def test_zero_vector(self):
        with pytest.raises(ValueError):
            l1_normalize(np.zeros(3))

    def test_index_rejects_raw_features(self):
        with pytest.raises(ValueError, match="L1"):
            RetrievalIndex(object_ids=["a"], labels=[0], modality="mesh", features=[[2.0, 2.0]])

    def test_index_rejects_empty(self):
        with pytest.raises(ValueError):
            RetrievalIndex(object_ids=[], labels=[], modality="mesh", features=np.zeros((0, 2)))


class TestRanking:
    def test_ties_go_to_the_lower_id(self):
        order, distances = rank_by_distance(np.zeros(2), np.ones((3, 2)), ["b", "a", "c"])
        assert order.tolist() == [1, 0, 2]
        np.testing.assert_allclose(distances, np.sqrt(2))

    def test_distances_are_sorted(self):
        rng = np.random.default_rng(0)
        _, distances = rank_by_distance(rng.normal(size=4), rng.normal(size=(20, 4)), [str(i) for i in range(20)])
        assert np.all(np.diff(distances) >= 0)

    def test_width_mismatch(self):
        with pytest.raises(ValueError):
            rank_by_distance(np.zeros(3), np.zeros((2, 2)), ["a", "b"])

    def test_rank_gallery(self, gallery):
        ranking = rank_gallery(np.array([1.0, 0.0]), gallery, "q", 0)
        assert ranking.gallery_ids == ["g1", "g2", "g3"]
        assert ranking.relevant.tolist() == [True, False, True]
        assert ranking.top(2)[1] == {"id": "g2", "distance": pytest.approx(np.sqrt(0.5)), "relevant": False}

    def test_exclude_self(self, gallery):
        ranking = rank_gallery(gallery.features[0], gallery, "g1", 0, exclude_self=True)
        assert ranking.gallery_ids == ["g2", "g3"]


class TestMeanAveragePrecision:
    def test_hand_computed(self, gallery):
        queries = index(["q1", "q2"], [0, 1], [[1.0, 0.0], [0.0, 1.0]], modality="point")
        mean_ap, rankings = mean_average_precision(queries, gallery)
        # q1 sees relevance 1 0 1, q2 sees 0 1 0
        assert mean_ap == pytest.approx((5 / 6 + 1 / 2) / 2)
        assert [r.query_id for r in rankings] == ["q1", "q2"]

    def test_unanswerable_query_is_skipped(self, gallery, caplog):
        queries = index(["q1", "q9"], [0, 9], [[1.0, 0.0], [0.0, 1.0]])
        mean_ap, rankings = mean_average_precision(queries, gallery)
        assert mean_ap == pytest.approx(5 / 6)
        assert len(rankings) == 2
        assert "q9" in caplog.text

    def test_nothing_answerable(self, gallery):
        queries = index(["q9"], [9], [[1.0, 0.0]])
        with pytest.raises(ValueError):
            mean_average_precision(queries, gallery)

    def test_permutation_baseline(self, gallery):
        queries = index(["q1", "q2"], [0, 1], [[1.0, 0.0], [0.0, 1.0]])
        first = permutation_baseline(queries, gallery, permutations=20, seed=1)
        assert first == permutation_baseline(queries, gallery, permutations=20, seed=1)
        assert 0.0 < first[0] <= 1.0


class TestPersistence:
    def test_index_round_trip(self, tmp_path, gallery):
        restored = RetrievalIndex.load(gallery.save(tmp_path))
        assert restored.object_ids == gallery.object_ids
        assert restored.modality == gallery.modality
        np.testing.assert_array_equal(restored.features, gallery.features)

    def test_ranked_lists(self, tmp_path, gallery):
        queries = index(["q1", "q2"], [0, 1], [[1.0, 0.0], [0.0, 1.0]])
        _, rankings = mean_average_precision(queries, gallery)
        path = write_ranked_lists(tmp_path / "out" / "lists.jsonl", rankings, top=2)
        lines = [json.loads(line) for line in path.read_text().splitlines()]
        assert [line["query"] for line in lines] == ["q1", "q2"]
        assert [hit["id"] for hit in lines[1]["results"]] == ["g3", "g2"]


class TestEvaluateRetrieval:
    def test_directions(self):
        assert len(set(RETRIEVAL_DIRECTIONS)) == 9

    def test_cross_modal(self, tiny_archive, tiny_encoder_config):
        result = evaluate_retrieval(TriModalNetwork(tiny_encoder_config), tiny_archive, "image", "mesh", views=2)
        assert len(result.rankings) == 6
        assert all(len(r.gallery_ids) == 6 for r in result.rankings)
        assert 0.0 < result.mean_ap <= 1.0
        assert result.views == 2

    def test_in_domain_excludes_self(self, tiny_archive, tiny_encoder_config):
        result = evaluate_retrieval(TriModalNetwork(tiny_encoder_config), tiny_archive, "point", "point")
        for ranking in result.rankings:
            assert len(ranking.gallery_ids) == 5
            assert ranking.query_id not in ranking.gallery_ids

    def test_unknown_modality(self, tiny_archive, tiny_encoder_config):
        with pytest.raises(ValueError):
            evaluate_retrieval(TriModalNetwork(tiny_encoder_config), tiny_archive, "voxel", "mesh")
