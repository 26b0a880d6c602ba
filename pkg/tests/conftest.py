import random

import pytest

from veriloop.corpus import GroundTruth, ImagePair, LabelSet, PairManifest

# Accuracy grid for the five-model fixture log: race -> model -> percent.
# Used to build verdict logs whose per-(model, race) correct rates are exact.
MODEL_ACCURACY_GRID = {
    "African": {"ArcFace": 30, "Facenet": 45, "SFace": 75, "VGG-Face": 75, "Rekognition": 70},
    "Asian": {"ArcFace": 25, "Facenet": 75, "SFace": 75, "VGG-Face": 75, "Rekognition": 70},
    "Caucasian": {"ArcFace": 80, "Facenet": 75, "SFace": 90, "VGG-Face": 90, "Rekognition": 100},
    "Indian": {"ArcFace": 45, "Facenet": 40, "SFace": 80, "VGG-Face": 80, "Rekognition": 70},
}


def build_manifest(per_stratum=60, seed=11, label_set=None, match_rate=0.5):
    rng = random.Random(seed)
    labels = label_set or LabelSet()
    pairs = []
    for label in labels:
        for i in range(per_stratum):
            truth = GroundTruth.MATCH if rng.random() < match_rate else GroundTruth.NON_MATCH
            pairs.append(
                ImagePair(
                    pair_id=f"{label.lower()}-{i}",
                    image_a=f"img/{label}/{i}a.jpg",
                    image_b=f"img/{label}/{i}b.jpg",
                    race=label,
                    truth=truth,
                )
            )
    return PairManifest(pairs, labels, source_name="synthetic", loaded_at=0.0)


@pytest.fixture
def labels():
    return LabelSet()


@pytest.fixture
def manifest():
    return build_manifest()


@pytest.fixture
def tiny_manifest(labels):
    pairs = [
        ImagePair("p-af", "a1", "b1", "African", GroundTruth.MATCH),
        ImagePair("p-as", "a2", "b2", "Asian", GroundTruth.NON_MATCH),
        ImagePair("p-ca", "a3", "b3", "Caucasian", GroundTruth.MATCH),
        ImagePair("p-in", "a4", "b4", "Indian", GroundTruth.NON_MATCH),
    ]
    return PairManifest(pairs, labels, source_name="tiny", loaded_at=0.0)


def kruskal_wallis_oracle(groups):
    """First-principles K-W statistic via rank sums of squares.

    Computes midranks by explicit tie-group walking, then uses the
    variance-ratio form H = (N - 1) * SSB / SST over the ranks, which
    equals the classical rank-sum formula divided by the tie correction.
    Independent of the implementation under test.
    """
    pooled = [(v, gi) for gi, g in enumerate(groups) for v in g]
    n = len(pooled)
    ordered = sorted(range(n), key=lambda i: pooled[i][0])
    ranks = [0.0] * n
    i = 0
    while i < n:
        j = i
        while j + 1 < n and pooled[ordered[j + 1]][0] == pooled[ordered[i]][0]:
            j += 1
        avg = (i + j + 2) / 2.0
        for k in range(i, j + 1):
            ranks[ordered[k]] = avg
        i = j + 1
    grand_mean = sum(ranks) / n
    ssb = 0.0
    for gi, g in enumerate(groups):
        member_ranks = [ranks[idx] for idx in range(n) if pooled[idx][1] == gi]
        gm = sum(member_ranks) / len(member_ranks)
        ssb += len(member_ranks) * (gm - grand_mean) ** 2
    sst = sum((r - grand_mean) ** 2 for r in ranks)
    return (n - 1) * ssb / sst
