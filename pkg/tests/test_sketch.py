import math

import numpy as np
import pytest

from app.errors import DomainError, GraphFormatError, InputValidationError
from app.models import SamplerBackend
from app.services.sketch import (
    CountMinSketch,
    ReservoirSamplerBank,
    SketchSamplerBank,
    cm_query,
    cm_update,
    l1_sample,
    l1_update,
    load_sketch,
    make_l1_sampler,
    make_sampler_bank,
)


def test_countmin_dimensions():
    cm = CountMinSketch.for_accuracy(1000, 10, 0.01, seed=1)
    assert cm.width == math.ceil(math.e * 10)
    assert cm.depth == 5
    assert CountMinSketch.for_accuracy(1000, 10, 0.01, seed=1, max_width=8).width == 8
    with pytest.raises(DomainError):
        CountMinSketch.for_accuracy(1000, 0, 0.01, seed=1)
    with pytest.raises(DomainError):
        CountMinSketch.for_accuracy(1000, 10, 1.5, seed=1)


def test_countmin_error_bound():
    n, k = 1000, 100
    rng = np.random.default_rng(0)
    items = rng.integers(0, n, 20_000)
    cm = CountMinSketch.for_accuracy(n, k, 0.01, seed=7)
    cm.update_many(items, np.ones(len(items)))
    exact = np.bincount(items, minlength=n)
    estimates = cm.query_many(np.arange(n))
    assert np.all(estimates >= exact)
    within = np.mean(estimates - exact <= len(items) / k)
    assert within >= 0.97


def test_countmin_handles_deletions():
    cm = CountMinSketch(50, 8, 3, seed=2)
    for i in range(50):
        cm_update(cm, i, 2.0)
    cm_update(cm, 9, 5.0)
    for i in range(50):
        cm_update(cm, i, -2.0)
    assert cm_query(cm, 9) == 5.0
    assert cm.counters.sum() == pytest.approx(5.0 * cm.depth)


def test_countmin_merge():
    a = CountMinSketch(100, 16, 4, seed=3)
    b = CountMinSketch(100, 16, 4, seed=3)
    both = CountMinSketch(100, 16, 4, seed=3)
    a.update_many([1, 2, 3], [1.0, 2.0, 3.0])
    b.update_many([3, 4], [4.0, 5.0])
    both.update_many([1, 2, 3, 3, 4], [1.0, 2.0, 3.0, 4.0, 5.0])
    assert np.array_equal(a.merge(b).counters, both.counters)
    with pytest.raises(InputValidationError):
        a.merge(CountMinSketch(100, 16, 4, seed=4))


def test_countmin_blob():
    cm = CountMinSketch(100, 16, 4, seed=3)
    cm.update_many([5, 6, 5], [1.5, 2.0, -0.5])
    again = load_sketch(cm.to_bytes())
    assert isinstance(again, CountMinSketch)
    assert np.array_equal(again.counters, cm.counters)
    assert again.query(5) == cm.query(5)


def test_countmin_rejects_out_of_range_items():
    cm = CountMinSketch(10, 4, 2, seed=0)
    with pytest.raises(InputValidationError):
        cm.update(10, 1.0)


def test_corrupt_blobs():
    with pytest.raises(GraphFormatError):
        load_sketch(b"XXXX" + bytes(40))
    with pytest.raises(GraphFormatError):
        CountMinSketch.from_bytes(b"L1SB" + bytes(40))


def test_single_item_survives_deletions():
    bank = SketchSamplerBank(1000, 50, seed=11)
    bank.update_many(np.arange(100), np.ones(100))
    bank.update(7, 5.0)
    bank.update_many(np.delete(np.arange(100), 7), -np.ones(99))
    items, values, ok = bank.sample_all()
    assert ok.all()
    assert set(items.tolist()) == {7}
    assert values == pytest.approx(np.full(50, 6.0))


def test_empty_bank_returns_nothing():
    for backend in SamplerBackend:
        bank = make_sampler_bank(backend, 20, 5, seed=1)
        _, _, ok = bank.sample_all()
        assert not ok.any()
        assert bank.sample(0) is None


def _law(items, ok, n):
    return np.bincount(items[ok], minlength=n) / max(int(ok.sum()), 1)


def _total_variation(freq, target):
    return 0.5 * float(np.abs(freq - target).sum())


def _churned(bank, x, rng):
    """Reach x through inserts and deletes of extra mass, in shuffled chunks"""
    dim = len(x)
    extra = rng.uniform(0, 10, dim)
    others = rng.choice(dim, 30, replace=False)
    for part in np.array_split(rng.permutation(dim), 4):
        bank.update_many(part, x[part] + extra[part])
    bank.update_many(others, np.full(30, 3.0))
    for part in np.array_split(rng.permutation(dim), 3):
        bank.update_many(part, -extra[part])
    for i in others:
        bank.update(int(i), -3.0)


def test_sketch_bank_follows_a_skewed_vector():
    # half of the mass sits on item 0
    n, r = 4096, 2000
    x = np.ones(n)
    x[0] = n
    bank = SketchSamplerBank(n, r, seed=21)
    bank.update_many(np.arange(n), x)
    items, values, ok = bank.sample_all()
    assert ok.mean() >= 0.95
    assert _law(items, ok, n)[0] == pytest.approx(0.5, abs=0.05)
    assert np.median(values[ok & (items == 0)]) == pytest.approx(n, rel=0.05)
    assert np.median(values[ok & (items != 0)]) == pytest.approx(1.0, rel=0.1)


@pytest.mark.parametrize("backend", list(SamplerBackend))
def test_sample_law_matches_a_skewed_vector(backend):
    dim, draws = 100, 20_000
    x = np.arange(1, dim + 1, dtype=float)
    rng = np.random.default_rng(4)
    bank = make_sampler_bank(backend, dim, draws, seed=13)
    if backend == SamplerBackend.RESERVOIR:
        for part in np.array_split(rng.permutation(dim), 5):
            bank.update_many(part, x[part])
    else:
        _churned(bank, x, rng)
    items, values, ok = bank.sample_all()
    assert ok.mean() >= 0.95
    assert _total_variation(_law(items, ok, dim), x / x.sum()) <= 0.05
    assert np.median(np.abs(values[ok] / x[items[ok]] - 1)) <= 0.05


def test_sketch_samples_depend_only_on_the_net_vector():
    dim, draws = 100, 5000
    x = np.arange(1, dim + 1, dtype=float) ** 2
    direct = SketchSamplerBank(dim, draws, seed=17)
    direct.update_many(np.arange(dim), x)
    churned = SketchSamplerBank(dim, draws, seed=17)
    _churned(churned, x, np.random.default_rng(8))
    a_items, a_values, a_ok = direct.sample_all()
    b_items, b_values, b_ok = churned.sample_all()
    assert np.array_equal(a_ok, b_ok)
    assert np.mean(a_items == b_items) >= 0.99
    same = a_items == b_items
    assert b_values[same] == pytest.approx(a_values[same], rel=1e-6)


def test_sketch_bank_blob():
    bank = SketchSamplerBank(200, 10, seed=9, buckets=8, rows=3)
    # 60 items overflow the base level, so the CountSketch rows answer
    bank.update_many(np.arange(60), np.arange(1.0, 61.0))
    again = load_sketch(bank.to_bytes())
    assert isinstance(again, SketchSamplerBank)
    for left, right in zip(bank.sample_all(), again.sample_all()):
        assert np.array_equal(left, right)


def test_reservoir_frequencies_follow_weights():
    bank = ReservoirSamplerBank(4, 20_000, seed=3)
    for i, w in enumerate([1.0, 2.0, 3.0, 4.0]):
        bank.update(i, w)
    items, values, ok = bank.sample_all()
    assert ok.all()
    freq = np.bincount(items, minlength=4) / len(items)
    assert freq == pytest.approx([0.1, 0.2, 0.3, 0.4], abs=0.02)
    assert np.array_equal(values, np.array([1.0, 2.0, 3.0, 4.0])[items])


def test_reservoir_rejects_deletions():
    bank = ReservoirSamplerBank(4, 2, seed=0)
    with pytest.raises(InputValidationError):
        bank.update(1, -1.0)


def test_reservoir_blob_continues_identically():
    bank = ReservoirSamplerBank(30, 40, seed=8)
    bank.update_many(np.arange(30), np.arange(1, 31, dtype=float))
    again = load_sketch(bank.to_bytes())
    for b in (bank, again):
        b.update_many([4, 5], [10.0, 20.0])
    for left, right in zip(bank.sample_all(), again.sample_all()):
        assert np.array_equal(left, right)


def test_single_sampler_helpers():
    for backend in SamplerBackend:
        sampler = make_l1_sampler(10, 4, backend)
        assert l1_sample(sampler) is None
        l1_update(sampler, 6, 2.5)
        assert l1_sample(sampler) == (6, 2.5)


def test_bank_validates_sizes():
    with pytest.raises(DomainError):
        SketchSamplerBank(0, 3, seed=0)
    with pytest.raises(DomainError):
        ReservoirSamplerBank(5, 0, seed=0)
    with pytest.raises(DomainError):
        SketchSamplerBank(5, 3, seed=0, rows=6)
    with pytest.raises(DomainError):
        SketchSamplerBank(5, 3, seed=0, buckets=4096)
