"""Tests for dataset loading, splitting, the synthetic generator and text features."""

from __future__ import annotations

import numpy as np
import pytest

from hiercl.constants import OBJECT_NAMES
from hiercl.data import (
    Dataset,
    check_ratios,
    check_split,
    generate_synthetic,
    load_jsonl,
    load_split,
    object_name,
    save_jsonl,
    save_split,
    split_by_patent,
    text_features,
)
from hiercl.exceptions import (
    DatasetError,
    DimensionMismatchError,
    DuplicateRecordError,
    HierarchyError,
    InsufficientDataError,
    MalformedRecordError,
    ValidationError,
)
from hiercl.models import SplitSpec, SyntheticSpec
from tests.conftest import make_record, make_record_dict, make_spec, write_jsonl


class TestLoadJsonl:
    def test_valid_file(self, tmp_path):
        path = tmp_path / "d.jsonl"
        write_jsonl(
            path,
            [
                make_record_dict(),
                make_record_dict(image_id="1402-001-2", features=[1.0, 0.0, 0.0]),
                make_record_dict(
                    image_id="1403-001-1", patent_id="1403-001", subclass=1403, text=None
                ),
            ],
        )
        ds = load_jsonl(path)
        assert len(ds) == 3
        assert ds.d_in == 3
        assert ds.patent_ids() == ["1402-001", "1403-001"]
        assert ds.records[2].text is None

    def test_blank_lines_are_skipped(self, tmp_path):
        path = tmp_path / "d.jsonl"
        write_jsonl(path, [make_record_dict(), "", make_record_dict(image_id="x-2")])
        assert len(load_jsonl(path)) == 2

    def test_invalid_json_names_line(self, tmp_path):
        path = tmp_path / "d.jsonl"
        write_jsonl(path, [make_record_dict(), "{not json"])
        with pytest.raises(MalformedRecordError, match="line 2") as exc:
            load_jsonl(path)
        assert exc.value.line == 2
        assert exc.value.code == "malformed_record"

    def test_missing_key(self, tmp_path):
        path = tmp_path / "d.jsonl"
        record = make_record_dict()
        del record["features"]
        write_jsonl(path, [record])
        with pytest.raises(MalformedRecordError, match="features"):
            load_jsonl(path)

    def test_non_finite_feature(self, tmp_path):
        path = tmp_path / "d.jsonl"
        line = (
            '{"image_id": "a", "patent_id": "p", "subclass": 1402, '
            '"main_class": 14, "features": [1.0, NaN]}'
        )
        write_jsonl(path, [line])
        with pytest.raises(MalformedRecordError):
            load_jsonl(path)

    def test_subclass_outside_main_class(self, tmp_path):
        path = tmp_path / "d.jsonl"
        write_jsonl(path, [make_record_dict(main_class=13)])
        with pytest.raises(HierarchyError, match="line 1"):
            load_jsonl(path)

    def test_patent_filed_under_two_subclasses(self, tmp_path):
        path = tmp_path / "d.jsonl"
        write_jsonl(
            path,
            [
                make_record_dict(),
                make_record_dict(image_id="1402-001-2", subclass=1403),
            ],
        )
        with pytest.raises(HierarchyError) as exc:
            load_jsonl(path)
        assert exc.value.code == "hierarchy_inconsistent"

    def test_duplicate_image_id(self, tmp_path):
        path = tmp_path / "d.jsonl"
        write_jsonl(path, [make_record_dict(), make_record_dict()])
        with pytest.raises(DuplicateRecordError, match="1402-001-1"):
            load_jsonl(path)

    def test_feature_dimension_mismatch(self, tmp_path):
        path = tmp_path / "d.jsonl"
        write_jsonl(path, [make_record_dict(), make_record_dict(image_id="b", features=[1.0])])
        with pytest.raises(DimensionMismatchError, match="line 2"):
            load_jsonl(path)

    def test_zero_feature_vector(self, tmp_path):
        path = tmp_path / "d.jsonl"
        write_jsonl(path, [make_record_dict(features=[0.0, 0.0, 0.0])])
        with pytest.raises(MalformedRecordError):
            load_jsonl(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(DatasetError):
            load_jsonl(tmp_path / "nope.jsonl")

    def test_empty_file(self, tmp_path):
        path = tmp_path / "d.jsonl"
        path.write_text("\n")
        with pytest.raises(InsufficientDataError):
            load_jsonl(path)

    def test_save_then_load_preserves_records(self, tmp_path, small_ds):
        path = tmp_path / "out" / "d.jsonl"
        save_jsonl(small_ds, path)
        loaded = load_jsonl(path)
        assert loaded.records == small_ds.records
        assert loaded.d_in == small_ds.d_in


class TestDataset:
    def test_groups_by_patent(self, small_ds):
        groups = small_ds.by_patent()
        assert len(groups) == 24
        assert all(len(recs) == 4 for recs in groups.values())

    def test_features_matrix(self, small_ds):
        X = small_ds.features()
        assert X.shape == (96, 8)
        assert X[0].tolist() == list(small_ds.records[0].features)

    def test_select_patents(self, small_ds):
        pid = small_ds.patent_ids()[0]
        assert [r.patent_id for r in small_ds.select_patents([pid])] == [pid] * 4

    def test_direct_construction_is_validated(self):
        a = make_record("a", "101-001", 101, [1.0, 2.0])
        b = make_record("a", "101-001", 101, [1.0, 3.0])
        with pytest.raises(DuplicateRecordError):
            Dataset.from_records([a, b])

    def test_from_no_records(self):
        with pytest.raises(InsufficientDataError):
            Dataset.from_records([])


class TestSynthetic:
    def test_default_counts(self):
        ds = generate_synthetic(SyntheticSpec())
        assert len(ds) == 8 * 2 * 6 * 4
        assert len(ds.patent_ids()) == 96
        assert ds.subclasses() == [100 * m + s for m in range(10, 18) for s in (1, 2)]
        assert ds.main_classes() == list(range(10, 18))
        assert ds.d_in == 32

    def test_subclass_codes_have_four_digits(self):
        ds = generate_synthetic(SyntheticSpec(main_classes=90, patents_per_subclass=1))
        assert all(1000 <= code <= 9999 for code in ds.subclasses())
        assert ds.main_classes()[0] == 10 and ds.main_classes()[-1] == 99

    def test_too_many_main_classes_rejected(self):
        with pytest.raises(ValueError):
            SyntheticSpec(main_classes=91)

    def test_ids_and_labels(self, small_ds):
        first = small_ds.records[0]
        assert first.image_id == "1001-001-1"
        assert first.patent_id == "1001-001"
        assert first.label.main_class == 10
        for record in small_ds.records:
            assert record.label.subclass // 100 == record.label.main_class
            assert record.image_id.startswith(record.patent_id)

    def test_text_is_subclass_object_name(self, small_ds):
        names = {r.label.subclass: r.text for r in small_ds.records}
        assert names[1001] == object_name(1001, 0) == "seat-1001"
        assert names[1002] == "bed-1002"
        assert len(set(names.values())) == len(names)

    def test_same_seed_same_corpus(self):
        assert generate_synthetic(make_spec()).records == generate_synthetic(make_spec()).records

    def test_different_seed_differs(self):
        a = generate_synthetic(make_spec(seed=1))
        b = generate_synthetic(make_spec(seed=2))
        assert a.records[0].features != b.records[0].features

    def test_patents_cluster_tighter_than_main_classes(self):
        ds = generate_synthetic(make_spec(d_in=16))
        X = ds.features()
        patents = np.array([r.patent_id for r in ds.records])
        mains = np.array([r.label.main_class for r in ds.records])
        D = np.linalg.norm(X[:, None, :] - X[None, :, :], axis=2)
        off = ~np.eye(len(ds), dtype=bool)
        same_patent = (patents[:, None] == patents[None, :]) & off
        other_main = mains[:, None] != mains[None, :]
        assert D[same_patent].mean() < D[other_main].mean()

    def test_single_image_patents_rejected(self):
        with pytest.raises(ValueError):
            SyntheticSpec(images_per_patent=1)

    def test_zero_image_spread_gives_identical_images(self):
        ds = generate_synthetic(make_spec(spread_image=0.0))
        group = ds.by_patent()["1001-001"]
        assert group[0].features == group[1].features


class TestRatios:
    def test_default(self):
        assert check_ratios((0.7225, 0.1275, 0.15)) == (0.7225, 0.1275, 0.15)

    def test_sum_not_one(self):
        with pytest.raises(ValidationError, match="sum to 1"):
            check_ratios((0.5, 0.2, 0.2))

    def test_negative(self):
        with pytest.raises(ValidationError):
            check_ratios((1.2, -0.1, -0.1))

    def test_wrong_arity(self):
        with pytest.raises(ValidationError):
            check_ratios((0.5, 0.5))


class TestSplit:
    @pytest.fixture(scope="class")
    def ds400(self):
        spec = make_spec(
            main_classes=4,
            subclasses_per_main=10,
            patents_per_subclass=10,
            images_per_patent=2,
            d_in=2,
        )
        return generate_synthetic(spec)

    def test_default_ratios_on_400_patents(self, ds400):
        split = split_by_patent(ds400, seed=0)
        assert (len(split.train), len(split.val), len(split.test)) == (289, 51, 60)

    def test_custom_ratios(self, ds400):
        split = split_by_patent(ds400, (0.5, 0.25, 0.25), seed=0)
        assert (len(split.train), len(split.val), len(split.test)) == (200, 100, 100)

    def test_ratios_must_sum_to_one(self, ds400):
        with pytest.raises(ValidationError):
            split_by_patent(ds400, (0.5, 0.2, 0.2))

    def test_disjoint_and_complete(self, small_ds, small_split):
        parts = [set(small_split.train), set(small_split.val), set(small_split.test)]
        assert not parts[0] & parts[1] and not parts[0] & parts[2] and not parts[1] & parts[2]
        assert parts[0] | parts[1] | parts[2] == set(small_ds.patent_ids())
        check_split(small_ds, small_split)

    def test_seeded(self, small_ds):
        assert split_by_patent(small_ds, seed=9) == split_by_patent(small_ds, seed=9)
        assert split_by_patent(small_ds, seed=9).train != split_by_patent(small_ds, seed=10).train

    def test_single_image_patents_go_to_train(self):
        records = [
            make_record(f"{p}-{k}", p, 101, [1.0 + k, float(i)])
            for i, p in enumerate(["101-001", "101-002", "101-003", "101-004"])
            for k in (1, 2)
        ]
        records.append(make_record("101-009-1", "101-009", 101, [3.0, 3.0]))
        split = split_by_patent(Dataset.from_records(records), (0.5, 0.25, 0.25), seed=1)
        assert "101-009" in split.train
        assert len(split.train) == 3

    def test_too_few_patents(self):
        records = [
            make_record(f"{p}-{k}", p, 101, [1.0, float(k)])
            for p in ["101-001", "101-002"]
            for k in (1, 2)
        ]
        with pytest.raises(InsufficientDataError):
            split_by_patent(Dataset.from_records(records))

    def test_save_and_load(self, tmp_path, small_split):
        path = tmp_path / "split.json"
        save_split(small_split, path)
        assert load_split(path) == small_split

    def test_load_missing(self, tmp_path):
        with pytest.raises(DatasetError):
            load_split(tmp_path / "missing.json")

    def test_overlapping_split_file_rejected(self, tmp_path):
        path = tmp_path / "split.json"
        path.write_text('{"train": ["a"], "val": ["a"], "test": []}')
        with pytest.raises(DatasetError, match="disjoint"):
            load_split(path)

    def test_check_split_unknown_patent(self, small_ds, small_split):
        bad = SplitSpec(
            train=small_split.train + ["999-001"], val=small_split.val, test=small_split.test
        )
        with pytest.raises(ValidationError, match="999-001"):
            check_split(small_ds, bad)

    def test_check_split_missing_patent(self, small_ds, small_split):
        bad = SplitSpec(train=small_split.train[1:], val=small_split.val, test=small_split.test)
        with pytest.raises(ValidationError, match="no split"):
            check_split(small_ds, bad)


class TestTextFeatures:
    def test_unit_norm(self):
        v = text_features("seat-1402")
        assert v.shape == (256,)
        assert np.linalg.norm(v) == pytest.approx(1.0)

    def test_deterministic(self):
        assert np.array_equal(text_features("lamp", seed=4), text_features("lamp", seed=4))

    def test_seed_changes_hashing(self):
        assert not np.array_equal(text_features("lamp", seed=1), text_features("lamp", seed=2))

    def test_names_differ_but_share_template(self):
        a = text_features("seat-101")
        b = text_features("lamp-402")
        cos = float(a @ b)
        assert 0.0 < cos < 1.0

    def test_case_and_punctuation_ignored(self):
        assert np.array_equal(text_features("Seat"), text_features("seat!"))

    def test_empty(self):
        with pytest.raises(ValidationError):
            text_features("   ")

    def test_custom_dimension(self):
        assert text_features("cup", d=16).shape == (16,)

    def test_small_dimension_never_degenerates(self):
        names = [f"{OBJECT_NAMES[i % len(OBJECT_NAMES)]}-{1000 + i}" for i in range(200)]
        for d in (1, 2, 3, 4):
            for name in names:
                v = text_features(name, d=d)
                assert np.linalg.norm(v) == pytest.approx(1.0)

    def test_single_bucket_is_plus_or_minus_one(self):
        for i in range(50):
            v = text_features(f"cup-{1000 + i}", d=1)
            assert abs(float(v[0])) == pytest.approx(1.0)
