import json

import pytest
from hypothesis import given, settings, strategies as st

from prodmap.dataset import (DatasetError, LabeledPair, ProductPair,
                             SynthesisSpec, dataset_stats, load_dataset,
                             stratified_split, synthesize_dataset, write_dataset)


def _write_lines(path, lines):
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def test_load_single_jsonl_record(tmp_path):
    path = tmp_path / "data.jsonl"
    _write_lines(path, [json.dumps({
        "base_title": "Acme widget", "compared_title": "Acme widget pro",
        "label": 1, "pair_id": "a1"})])
    data = load_dataset(path)
    assert len(data) == 1
    assert data[0].label == 1
    assert data[0].pair.pair_id == "a1"


def test_load_missing_file():
    with pytest.raises(DatasetError, match="not found"):
        load_dataset("/nonexistent/never.jsonl")


def test_load_reports_line_number_for_bad_label(tmp_path):
    path = tmp_path / "data.jsonl"
    _write_lines(path, [
        json.dumps({"base_title": "a1 x", "compared_title": "a1 y", "label": 1}),
        json.dumps({"base_title": "b2 x", "compared_title": "b2 y", "label": "2"}),
    ])
    with pytest.raises(DatasetError, match="line 2"):
        load_dataset(path)


def test_load_rejects_malformed_json_with_line(tmp_path):
    path = tmp_path / "data.jsonl"
    _write_lines(path, ['{"base_title": "a"', ])
    with pytest.raises(DatasetError, match="line 1"):
        load_dataset(path)


def test_load_rejects_duplicate_pair_id(tmp_path):
    path = tmp_path / "data.jsonl"
    rec = {"base_title": "a x", "compared_title": "a y", "label": 0, "pair_id": "dup"}
    _write_lines(path, [json.dumps(rec), json.dumps(rec)])
    with pytest.raises(DatasetError, match="duplicate pair_id"):
        load_dataset(path)


def test_missing_pair_id_hashed_and_content_collision_is_error(tmp_path):
    path = tmp_path / "data.jsonl"
    rec = {"base_title": "a x", "compared_title": "a y", "label": 0}
    _write_lines(path, [json.dumps(rec), json.dumps(rec)])
    with pytest.raises(DatasetError, match="duplicate pair_id"):
        load_dataset(path)


def test_csv_round_trip(tmp_path):
    path = tmp_path / "data.csv"
    path.write_text(
        "pair_id,base_title,compared_title,brand,label,reasoning\n"
        "c1,Acme pods x 3,Acme pods x 6,Acme,0,\n",
        encoding="utf-8")
    data = load_dataset(path, format="csv")
    assert data[0].pair.brand == "Acme"
    assert data[0].label == 0
    assert data[0].reasoning is None


def test_write_then_load_round_trip(tmp_path):
    data = synthesize_dataset(SynthesisSpec(n=50, positive_fraction=0.5, brand_count=5, seed=3))
    path = tmp_path / "out.jsonl"
    write_dataset(path, data)
    assert load_dataset(path) == data


def test_load_rejects_float_label(tmp_path):
    path = tmp_path / "data.jsonl"
    _write_lines(path, [json.dumps({
        "base_title": "a x", "compared_title": "a y", "label": 1.0})])
    with pytest.raises(DatasetError, match="line 1"):
        load_dataset(path)


def test_benchmark_file_round_trip_recount(tmp_path):
    data = synthesize_dataset(SynthesisSpec(n=12000, positive_fraction=0.706,
                                            brand_count=500, seed=0))
    path = tmp_path / "bench.jsonl"
    write_dataset(path, data)
    loaded = load_dataset(path)
    assert len(loaded) == 12000
    stats = dataset_stats(loaded)
    assert stats.positive_fraction == pytest.approx(0.706, abs=1e-9)
    assert stats.brand_count == 500


def test_empty_titles_rejected():
    with pytest.raises(DatasetError):
        ProductPair("  ", "ok title", pair_id="x")
    with pytest.raises(DatasetError):
        LabeledPair(ProductPair("a b", "c d", pair_id="x"), label=2)


# --- synthesis ---------------------------------------------------------------

def test_synthesis_seeded_determinism():
    spec = SynthesisSpec(n=4, positive_fraction=0.5, seed=7, brand_count=3)
    assert synthesize_dataset(spec) == synthesize_dataset(spec)


def test_synthesis_rejects_bad_spec():
    with pytest.raises(DatasetError):
        SynthesisSpec(n=0)
    with pytest.raises(DatasetError):
        SynthesisSpec(n=10, positive_fraction=1.5)


def test_synthesis_hits_requested_ratio_and_brands():
    data = synthesize_dataset(SynthesisSpec(n=12000, positive_fraction=0.706,
                                            brand_count=500, seed=0))
    stats = dataset_stats(data)
    assert stats.total == 12000
    assert abs(stats.positive_fraction - 0.706) <= 0.005
    assert stats.brand_count == 500


def test_negatives_differ_from_base_positives_only_decorate():
    data = synthesize_dataset(SynthesisSpec(n=200, positive_fraction=0.5,
                                            brand_count=10, seed=11))
    for lp in data:
        assert lp.pair.base_title != lp.pair.compared_title
        if lp.label == 1:
            # positive compared titles extend the base with descriptors
            assert lp.pair.compared_title.startswith(lp.pair.base_title.split(" ")[0])


# --- stats --------------------------------------------------------------------

def test_stats_empty_convention():
    stats = dataset_stats([])
    assert stats.total == 0
    assert stats.positive_fraction == 0.0


def test_stats_hand_count():
    pairs = [LabeledPair(ProductPair("a x", "b y", pair_id=f"p{i}"), label=1 if i < 7 else 0)
             for i in range(10)]
    assert dataset_stats(pairs).positive_fraction == 0.7


# --- stratified splitting -------------------------------------------------------

BENCH_RATIOS = (0.5, 1 / 3, 1 / 12, 1 / 12)


def test_split_rejects_bad_inputs():
    data = synthesize_dataset(SynthesisSpec(n=10, seed=0, brand_count=2))
    with pytest.raises(DatasetError, match="sum to 1"):
        stratified_split(data, (0.5, 0.3, 0.1, 0.099), seed=0)
    with pytest.raises(DatasetError, match="empty"):
        stratified_split([], BENCH_RATIOS, seed=0)


def test_split_partitions_exactly():
    data = synthesize_dataset(SynthesisSpec(n=500, positive_fraction=0.7,
                                            brand_count=20, seed=5))
    bundle = stratified_split(data, BENCH_RATIOS, seed=9)
    ids = [lp.pair.pair_id for split in bundle.as_dict().values() for lp in split]
    assert len(ids) == len(set(ids)) == len(data)
    assert set(ids) == {lp.pair.pair_id for lp in data}


def test_split_benchmark_sizes_and_balance():
    data = synthesize_dataset(SynthesisSpec(n=12000, positive_fraction=0.706,
                                            brand_count=500, seed=0))
    bundle = stratified_split(data, BENCH_RATIOS, seed=42)
    sizes = bundle.sizes()
    for name, target in zip(("peft", "rl", "val", "test"), (6000, 4000, 1000, 1000)):
        assert abs(sizes[name] - target) <= 1
    stats = dataset_stats(data, bundle)
    for name, frac in stats.per_split_positive_fraction.items():
        assert abs(frac - stats.positive_fraction) <= 0.01, name


def test_split_determinism_and_seed_sensitivity():
    data = synthesize_dataset(SynthesisSpec(n=600, positive_fraction=0.7,
                                            brand_count=25, seed=2))
    a = stratified_split(data, BENCH_RATIOS, seed=1)
    b = stratified_split(data, BENCH_RATIOS, seed=1)
    c = stratified_split(data, BENCH_RATIOS, seed=2)
    assert a == b
    assert a.sizes() == c.sizes()
    assert a != c


@settings(max_examples=40, deadline=None)
@given(
    n=st.integers(min_value=1, max_value=300),
    pos=st.floats(min_value=0.0, max_value=1.0),
    brands=st.integers(min_value=1, max_value=12),
    weights=st.lists(st.integers(min_value=0, max_value=10), min_size=4, max_size=4)
        .filter(lambda ws: sum(ws) > 0),
    seed=st.integers(min_value=0, max_value=2 ** 20),
)
def test_split_partition_property(n, pos, brands, weights, seed):
    data = synthesize_dataset(SynthesisSpec(n=n, positive_fraction=pos,
                                            brand_count=brands, seed=seed))
    total = sum(weights)
    ratios = [w / total for w in weights]
    ratios[-1] = 1.0 - sum(ratios[:-1])  # exact sum under float arithmetic
    bundle = stratified_split(data, ratios, seed=seed)
    ids = [lp.pair.pair_id for split in bundle.as_dict().values() for lp in split]
    assert sorted(ids) == sorted(lp.pair.pair_id for lp in data)
    sizes = bundle.sizes()
    for name, ratio in zip(("peft", "rl", "val", "test"), ratios):
        assert abs(sizes[name] - n * ratio) <= 1.0 + 1e-9
