"""Benchmark-protocol defaults and override plumbing."""

import json

import pytest

from bgnn.repro import (DATASETS, DROPOUT_GRID, MIXTURE_GRID,
                        WEIGHT_DECAY_GRID, load_overrides,
                        reproduction_config)


class TestGrids:
    def test_grid_values(self):
        assert DROPOUT_GRID == (0.0, 0.2, 0.4, 0.6)
        assert WEIGHT_DECAY_GRID == (0.0, 1e-4, 5e-4, 1e-3)
        assert MIXTURE_GRID == (0.0, 0.1, 0.3, 0.5, 0.7, 0.9, 1.0)
        assert DATASETS == ("cora", "citeseer", "pubmed")


class TestReproductionConfig:
    def test_defaults_sit_inside_the_grids(self):
        cfg = reproduction_config("cora", "bgcn-t", overrides={})
        assert cfg.dropout in DROPOUT_GRID
        assert cfg.weight_decay in WEIGHT_DECAY_GRID
        assert cfg.alpha in MIXTURE_GRID
        assert cfg.beta[1] in MIXTURE_GRID
        assert cfg.learning_rate == 0.01
        assert cfg.max_epochs == 2000
        assert cfg.patience == 100

    def test_hidden_width_by_stack_kind(self):
        assert reproduction_config("cora", "gcn", overrides={}).hidden_dim == 16
        assert reproduction_config("cora", "bgcn-t", overrides={}).hidden_dim == 16
        assert reproduction_config("cora", "gat", overrides={}).hidden_dim == 8
        assert reproduction_config("cora", "bgat-a", overrides={}).hidden_dim == 8

    def test_plain_variants_have_no_mixture(self):
        cfg = reproduction_config("pubmed", "gat", overrides={})
        assert cfg.alpha == 0.0
        assert cfg.beta == ()

    def test_one_layer_bilinear_uses_single_hop(self):
        cfg = reproduction_config("citeseer", "bgcn-t", layers=1, overrides={})
        assert cfg.layers == 1
        assert cfg.beta == (1.0,)

    def test_overrides_replace_defaults_per_cell(self):
        overrides = {"cora": {"bgcn-t": {"alpha": 0.5, "dropout": 0.2}}}
        tuned = reproduction_config("cora", "bgcn-t", overrides=overrides)
        assert tuned.alpha == 0.5
        assert tuned.dropout == 0.2
        untouched = reproduction_config("citeseer", "bgcn-t", overrides=overrides)
        assert untouched.alpha == 0.3
        assert untouched.dropout == 0.6

    def test_seed_passes_through(self):
        assert reproduction_config("cora", "gcn", seed=7, overrides={}).seed == 7


class TestLoadOverrides:
    def test_explicit_path(self, tmp_path):
        doc = {"cora": {"gcn": {"dropout": 0.4}}}
        path = tmp_path / "tuned.json"
        path.write_text(json.dumps(doc))
        assert load_overrides(path) == doc

    def test_env_var_fallback(self, tmp_path, monkeypatch):
        doc = {"pubmed": {"bgat-t": {"beta2": 0.1}}}
        path = tmp_path / "env.json"
        path.write_text(json.dumps(doc))
        monkeypatch.setenv("BGNN_REPRO_PARAMS", str(path))
        assert load_overrides() == doc
        cfg = reproduction_config("pubmed", "bgat-t")
        assert cfg.beta == (0.9, 0.1)

    def test_unset_env_returns_empty(self, monkeypatch):
        monkeypatch.delenv("BGNN_REPRO_PARAMS", raising=False)
        assert load_overrides() == {}

    def test_missing_file_raises(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_overrides(tmp_path / "absent.json")
