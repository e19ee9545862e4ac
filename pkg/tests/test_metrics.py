import itertools
import math

import numpy as np
import pytest
from sklearn import metrics as skm

from scgc.metrics import (MetricReport, ari_score, clustering_metrics, contingency, macro_f1, nmi_score,
                          optimal_mapping)


# --- brute-force references built from raw counts ---------------------------

def count_table(pred, truth):
    ps, ts = sorted(set(pred)), sorted(set(truth))
    return [[sum(1 for a, b in zip(pred, truth) if a == p and b == t) for t in ts] for p in ps], ps, ts


def all_optimal_mappings(pred, truth):
    """Every cluster->label map (classes plus spare labels) achieving the best match count."""
    ps, ts = sorted(set(pred)), sorted(set(truth))
    targets = ts + [max(ts) + 1 + i for i in range(max(0, len(ps) - len(ts)))]
    best, maps = -1, []
    for perm in itertools.permutations(targets, len(ps)):
        m = dict(zip(ps, perm))
        hits = sum(1 for a, b in zip(pred, truth) if m[a] == b)
        if hits > best:
            best, maps = hits, [m]
        elif hits == best:
            maps.append(m)
    return best / len(pred), maps


def brute_nmi(pred, truth):
    n = len(pred)
    table, _, _ = count_table(pred, truth)
    rows = [sum(r) for r in table]
    cols = [sum(c) for c in zip(*table)]
    h = lambda cs: -sum(c / n * math.log(c / n) for c in cs if c)  # noqa: E731
    hp, ht = h(rows), h(cols)
    if hp == 0 and ht == 0:
        return 1.0
    mi = 0.0
    for i, r in enumerate(table):
        for j, c in enumerate(r):
            if c:
                mi += c / n * math.log(n * c / (rows[i] * cols[j]))
    return mi / ((hp + ht) / 2)


def brute_ari(pred, truth):
    """Pair counting over all unordered pairs."""
    n = len(pred)
    both = same_p = same_t = 0
    for i in range(n):
        for j in range(i + 1, n):
            sp, st = pred[i] == pred[j], truth[i] == truth[j]
            both += sp and st
            same_p += sp
            same_t += st
    pairs = n * (n - 1) / 2
    expected = same_p * same_t / pairs if pairs else 0.0
    top = (same_p + same_t) / 2
    if top == expected:
        return 1.0
    return (both - expected) / (top - expected)


def brute_f1(mapped, truth):
    labels = sorted(set(mapped) | set(truth))
    total = 0.0
    for c in labels:
        tp = sum(1 for a, b in zip(mapped, truth) if a == c and b == c)
        fp = sum(1 for a, b in zip(mapped, truth) if a == c and b != c)
        fn = sum(1 for a, b in zip(mapped, truth) if a != c and b == c)
        total += 2 * tp / (2 * tp + fp + fn) if (2 * tp + fp + fn) else 0.0
    return total / len(labels)


# --- tests -------------------------------------------------------------------

def test_identity():
    y = [0, 1, 2, 2, 1, 0]
    rep = clustering_metrics(y, y)
    assert (rep.acc, rep.nmi, rep.ari, rep.f1) == (1.0, 1.0, 1.0, 1.0)
    assert rep.mapping == {0: 0, 1: 1, 2: 2}


def test_swap():
    assert optimal_mapping([1, 1, 0, 0], [0, 0, 1, 1]) == {0: 1, 1: 0}


def test_independent_halves():
    rep = clustering_metrics([0, 1, 0, 1], [0, 0, 1, 1])
    assert rep.acc == 0.5
    # pair counts: no agreeing pair, expected 2/3, max 2 -> -1/2
    assert rep.ari == pytest.approx(-0.5, abs=1e-12)
    assert rep.ari == pytest.approx(skm.adjusted_rand_score([0, 0, 1, 1], [0, 1, 0, 1]), abs=1e-12)
    assert rep.nmi == pytest.approx(0.0, abs=1e-12)


def test_six_class_exhaustive():
    rng = np.random.default_rng(0)
    truth = rng.integers(0, 6, 30)
    pred = np.where(rng.random(30) < 0.6, (truth + 2) % 6, rng.integers(0, 6, 30))
    acc, maps = all_optimal_mappings(list(pred), list(truth))
    rep = clustering_metrics(pred, truth)
    assert rep.acc == pytest.approx(acc, abs=1e-12)
    assert rep.mapping in maps


@pytest.mark.parametrize("seed", range(200))
def test_brute_force_references(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 13))
    truth = [int(v) for v in rng.integers(0, int(rng.integers(1, 7)), n)]
    pred = [int(v) for v in rng.integers(0, int(rng.integers(1, 7)), n)]
    rep = clustering_metrics(pred, truth)
    acc, maps = all_optimal_mappings(pred, truth)
    assert abs(rep.acc - acc) <= 1e-10
    assert abs(rep.nmi - brute_nmi(pred, truth)) <= 1e-10
    assert abs(rep.ari - brute_ari(pred, truth)) <= 1e-10
    # optimal matchings can tie; F1 must agree with the one actually reported
    assert rep.mapping in maps
    mapped = [rep.mapping[p] for p in pred]
    assert abs(rep.f1 - brute_f1(mapped, truth)) <= 1e-10


@pytest.mark.parametrize("seed", range(20))
def test_agrees_with_sklearn(seed):
    rng = np.random.default_rng(100 + seed)
    truth = rng.integers(0, 4, 60)
    pred = rng.integers(0, 5, 60)
    assert nmi_score(pred, truth) == pytest.approx(
        skm.normalized_mutual_info_score(truth, pred, average_method="arithmetic"), abs=1e-10)
    assert ari_score(pred, truth) == pytest.approx(skm.adjusted_rand_score(truth, pred), abs=1e-10)


def test_relabel_invariance():
    rng = np.random.default_rng(5)
    truth, pred = rng.integers(0, 4, 40), rng.integers(0, 4, 40)
    perm = np.array([2, 0, 3, 1])
    a, b = clustering_metrics(pred, truth), clustering_metrics(perm[pred], truth)
    np.testing.assert_allclose([a.acc, a.nmi, a.ari, a.f1], [b.acc, b.nmi, b.ari, b.f1], atol=1e-12)


@pytest.mark.parametrize("seed", range(10))
def test_acc_pigeonhole_bound(seed):
    truth = np.repeat(np.arange(4), 10)
    pred = np.random.default_rng(seed).integers(0, 7, 40)
    assert clustering_metrics(pred, truth).acc >= 1 / 4


def test_random_permutation_ari_near_zero():
    truth = np.repeat(np.arange(4), 25)
    vals = [ari_score(np.random.default_rng(s).permutation(truth), truth) for s in range(1000)]
    assert abs(np.mean(vals)) <= 0.05


def test_degenerate_single_label():
    assert nmi_score([3, 3, 3], [1, 1, 1]) == 1.0
    assert nmi_score([0, 0, 0, 0], [0, 1, 0, 1]) == 0.0
    assert ari_score([0, 0], [5, 5]) == 1.0


def test_surplus_clusters_get_fresh_labels():
    m = optimal_mapping([0, 1, 2, 3], [0, 0, 1, 1])
    assert sorted(m.values())[:2] == [0, 1]
    assert min(sorted(m.values())[2:]) >= 2


def test_contingency_counts():
    table, pv, tv = contingency([1, 1, 2], ["a", "b", "b"])
    np.testing.assert_array_equal(table, [[1, 1], [0, 1]])
    assert list(pv) == [1, 2] and list(tv) == ["a", "b"]


def test_errors():
    with pytest.raises(ValueError):
        clustering_metrics([], [])
    with pytest.raises(ValueError):
        clustering_metrics([0, 1], [0])


def test_report_json_roundtrip():
    rep = clustering_metrics([0, 1, 1, 2], [1, 0, 0, 2])
    back = MetricReport.from_json(rep.to_json())
    assert back == rep
    assert rep.acc == pytest.approx(sum(rep.mapping[p] == t for p, t in zip([0, 1, 1, 2], [1, 0, 0, 2])) / 4)
    assert 0 <= rep.f1 <= 1 and macro_f1([0], [0]) == 1.0
