"""Tests for method comparison, projections, curves and embedding geometry."""

from __future__ import annotations

import numpy as np
import pytest

from hiercl.analysis import (
    COMPARISON_COLUMNS,
    aggregate_runs,
    comparison_table,
    curves_mrr_acc,
    embedding_geometry,
    project_subclasses,
    run_comparison,
    subclass_centroids,
    variant_configs,
    write_comparison_csv,
    write_curves_csv,
    write_projection_csv,
)
from hiercl.data import Dataset, generate_synthetic, split_by_patent
from hiercl.encoder import init_params
from hiercl.exceptions import DegenerateInputError, ValidationError
from hiercl.models import HierLevel, LossMode, Method, SyntheticSpec, TrainConfig
from hiercl.retrieval import evaluate
from hiercl.sampler import build_eval_split
from hiercl.taxonomy import ScoreConfig
from tests.conftest import TREND_SEEDS, make_record, make_train_config


@pytest.fixture
def quick_config():
    return make_train_config(max_epochs=2)


class TestVariantConfigs:
    def test_methods(self, quick_config):
        variants = variant_configs(quick_config)
        assert list(variants) == [Method.CL, Method.HMCL]
        assert variants[Method.CL].loss_mode is LossMode.CL
        assert variants[Method.HMCL].loss_mode is LossMode.HMCL

    def test_text_variant(self, quick_config):
        variants = variant_configs(quick_config, with_text=True)
        assert variants[Method.HMCL_TEXT].use_text
        assert not variants[Method.HMCL].use_text
        assert variants[Method.HMCL_TEXT].lambda_ == quick_config.lambda_


class TestComparison:
    def test_single_seed_has_zero_spread(self, small_ds, small_split, quick_config):
        rows = run_comparison(small_ds, small_split, quick_config, seeds=[1], ks=(1, 5))
        assert len(rows) == 3 * 3 * (2 + 2 * 2)
        assert all(row.std == 0.0 and row.seeds == 1 for row in rows)
        assert [row.method for row in rows[:1]] == [Method.BASELINE]

    def test_text_variant_adds_rows(self, small_ds, small_split, quick_config):
        rows = run_comparison(
            small_ds, small_split, quick_config, seeds=[1], with_text=True, ks=(1,)
        )
        assert {row.method for row in rows} == set(Method)
        assert len(rows) == 4 * 3 * 4

    def test_cl_and_hmcl_agree_without_coarse_scores(self, small_ds, small_split):
        cfg = make_train_config(max_epochs=2, scores=ScoreConfig(s_p=1.0, s_s=0.0, s_m=0.0))
        rows = run_comparison(small_ds, small_split, cfg, seeds=[1, 2], ks=(1,))
        cl = [(r.level, r.metric, r.k, r.mean, r.std) for r in rows if r.method is Method.CL]
        hmcl = [(r.level, r.metric, r.k, r.mean, r.std) for r in rows if r.method is Method.HMCL]
        assert cl == hmcl

    def test_csv_is_byte_identical_across_runs(
        self, small_ds, small_split, quick_config, tmp_path, monkeypatch
    ):
        monkeypatch.setenv("HIERCL_THREADS", "2")
        paths = [tmp_path / "a.csv", tmp_path / "b.csv"]
        for path in paths:
            rows = run_comparison(small_ds, small_split, quick_config, seeds=[1, 2], ks=(1, 5))
            write_comparison_csv(rows, path)
        first, second = (p.read_bytes() for p in paths)
        assert first == second
        assert first.decode("utf-8").splitlines()[0] == ",".join(COMPARISON_COLUMNS)

    def test_table_leaves_k_blank_for_map(self, small_ds, small_split, quick_config):
        rows = run_comparison(small_ds, small_split, quick_config, seeds=[3], ks=(1,))
        table = comparison_table(rows)
        assert table[0]["metric"] == "mAP" and table[0]["K"] == ""
        assert any(entry["K"] == 1 for entry in table)

    def test_seeds_required(self, small_ds, small_split, quick_config):
        with pytest.raises(ValidationError):
            run_comparison(small_ds, small_split, quick_config, seeds=[])
        with pytest.raises(ValidationError):
            aggregate_runs([])


class TestProjection:
    def test_rows_for_requested_subclasses(self, small_ds, tmp_path):
        params = init_params(small_ds.d_in, 5, seed=0)
        rows = project_subclasses(params, small_ds, [1001, 1002])
        assert len(rows) == 2 * 4 * 4
        assert {row.subclass for row in rows} == {1001, 1002}
        assert all(row.main_class == 10 for row in rows)
        path = tmp_path / "proj.csv"
        write_projection_csv(rows, path)
        lines = path.read_text(encoding="utf-8").splitlines()
        assert lines[0] == "x,y,subclass,main_class,image_id"
        assert len(lines) == len(rows) + 1

    def test_unknown_subclass(self, small_ds):
        params = init_params(small_ds.d_in, 5, seed=0)
        with pytest.raises(ValidationError, match="999"):
            project_subclasses(params, small_ds, [1001, 999])

    def test_identical_embeddings(self):
        ds = Dataset.from_records(
            make_record(f"101-00{i}-1", f"101-00{i}", 101, [1.0, 2.0, 3.0]) for i in range(1, 5)
        )
        with pytest.raises(DegenerateInputError):
            project_subclasses(init_params(3, 4, seed=0), ds, [101])


class TestCurves:
    def test_rows_and_monotone_accuracy(self, small_ds, small_split, tmp_path):
        params = init_params(small_ds.d_in, 5, seed=0)
        split = build_eval_split(small_ds, small_split.test, 2, np.random.default_rng(0))
        rows = curves_mrr_acc(evaluate(params, split), Method.BASELINE)
        assert len(rows) == 3 * 2 * 4
        assert all(row["method"] == "Baseline" for row in rows)
        for level in HierLevel:
            acc = [r["value"] for r in rows if r["level"] == level.value and r["metric"] == "Acc"]
            assert acc == sorted(acc)
        path = tmp_path / "curves.csv"
        write_curves_csv(rows, path)
        assert path.read_text(encoding="utf-8").startswith("method,level,metric,K,value\n")


class TestGeometry:
    def test_pair_count_and_range(self, small_ds):
        params = init_params(small_ds.d_in, 5, seed=0)
        records = small_ds.records[::5]
        report = embedding_geometry(params, records)
        assert report.pairs == 20 * 19
        for value in (report.within_subclass, report.cross_subclass, report.cross_main):
            assert value is not None and -1.0 <= value <= 1.0

    def test_single_main_class_has_no_cross_main_pairs(self, small_ds):
        params = init_params(small_ds.d_in, 5, seed=0)
        records = [r for r in small_ds.records if r.label.main_class == 10]
        assert embedding_geometry(params, records).cross_main is None

    def test_centroids_per_subclass(self, small_ds):
        params = init_params(small_ds.d_in, 5, seed=0)
        centroids = subclass_centroids(params, small_ds.records)
        assert sorted(centroids) == small_ds.subclasses()
        for c in centroids.values():
            assert c.shape == (5,)
            assert np.linalg.norm(c) <= 1.0 + 1e-12


def centroid_distance(rows, a, b):
    def centroid(code):
        return np.mean([(r.x, r.y) for r in rows if r.subclass == code], axis=0)

    return float(np.linalg.norm(centroid(a) - centroid(b)))


@pytest.mark.slow
class TestHierarchyTrend:
    def test_hierarchical_training_clusters_by_subclass(self, desk_runs):
        ordered = 0
        for ds, _, result in desk_runs:
            report = embedding_geometry(result.params, ds.records)
            assert report.within_subclass is not None
            assert report.cross_subclass is not None and report.cross_main is not None
            if report.within_subclass > report.cross_subclass > report.cross_main:
                ordered += 1
        assert ordered >= 4

    def test_sibling_subclasses_project_closer(self, desk_runs):
        closer = 0
        for ds, _, result in desk_runs:
            rows = project_subclasses(result.params, ds, [1001, 1002, 1101])
            siblings = centroid_distance(rows, 1001, 1002)
            others = min(centroid_distance(rows, 1001, 1101), centroid_distance(rows, 1002, 1101))
            if siblings < others:
                closer += 1
        assert closer >= 4

    def test_fine_tuning_beats_baseline_and_hierarchy_helps(self):
        totals: dict[tuple[Method, HierLevel], float] = {}
        for seed in TREND_SEEDS:
            ds = generate_synthetic(SyntheticSpec(seed=seed))
            split = split_by_patent(ds, seed=seed)
            rows = run_comparison(ds, split, TrainConfig.desk_scale(), seeds=[seed], ks=(1,))
            for r in rows:
                if r.metric == "mAP":
                    totals[(r.method, r.level)] = totals.get((r.method, r.level), 0.0) + r.mean
        means = {key: value / len(TREND_SEEDS) for key, value in totals.items()}
        for level in (HierLevel.SUBCLASS, HierLevel.MAIN_CLASS):
            assert means[(Method.HMCL, level)] >= means[(Method.CL, level)]
        for level in HierLevel:
            assert means[(Method.CL, level)] > means[(Method.BASELINE, level)]
            assert means[(Method.HMCL, level)] > means[(Method.BASELINE, level)]
