"""Tests for settings, errors and seeded streams."""

import numpy as np
import pytest

from core.errors import ConfigError, RuinsimError
from core.settings import BUILTIN_DEFAULTS, load_settings, resolve_seed
from core.streams import batch_rng, check_rng, iter_batches, map_batches, reduce_sums, split_paths


def _sum_kernel(rng, n):
    return {'total': rng.standard_normal(n).sum(), 'count': n}


class TestSettings:

    def test_missing_file_gives_defaults(self, tmp_path):
        assert load_settings(tmp_path / "absent.yaml") == BUILTIN_DEFAULTS

    def test_partial_override_keeps_other_keys(self, tmp_path):
        path = tmp_path / "config.yaml"
        path.write_text("estimators:\n  min_hits: 50\n")
        settings = load_settings(path)
        assert settings['estimators']['min_hits'] == 50
        assert settings['estimators']['wilson_below_hits'] == 100
        assert settings['simulation'] == BUILTIN_DEFAULTS['simulation']

    def test_seed_override(self, monkeypatch):
        monkeypatch.setenv("RUINSIM_SEED", "123")
        assert resolve_seed(7) == 123
        monkeypatch.delenv("RUINSIM_SEED")
        assert resolve_seed(7) == 7

    def test_bad_seed_override(self, monkeypatch):
        monkeypatch.setenv("RUINSIM_SEED", "abc")
        with pytest.raises(ValueError, match="RUINSIM_SEED"):
            resolve_seed(7)


class TestErrors:

    def test_config_error_keeps_problems(self):
        error = ConfigError("2 problems", ["r: bad", "T: bad"])
        assert isinstance(error, RuinsimError)
        assert error.problems == ["r: bad", "T: bad"]

    def test_single_message_is_its_own_problem(self):
        assert ConfigError("file not found").problems == ["file not found"]


class TestStreams:

    def test_split_paths(self):
        assert split_paths(10, 3) == [4, 3, 3]
        with pytest.raises(ValueError, match="workers"):
            split_paths(10, 0)

    def test_iter_batches(self):
        assert list(iter_batches(25, 10)) == [(0, 10), (1, 10), (2, 5)]

    def test_substreams_differ(self):
        first = batch_rng(1, 0, 0).random(4)
        second = batch_rng(1, 0, 1).random(4)
        assert not np.array_equal(first, second)
        np.testing.assert_array_equal(first, batch_rng(1, 0, 0).random(4))

    def test_check_stream_is_disjoint(self):
        assert not np.array_equal(check_rng(1, 0).random(4), batch_rng(1, 0, 0).random(4))

    def test_map_batches_order_and_totals(self):
        results = map_batches(_sum_kernel, 25, master_seed=3, workers=1, batch_size=10)
        assert [r['count'] for r in results] == [10, 10, 5]
        assert reduce_sums(results)['count'] == 25

    def test_reproducible_for_fixed_layout(self):
        first = reduce_sums(map_batches(_sum_kernel, 100, master_seed=3, batch_size=30))
        second = reduce_sums(map_batches(_sum_kernel, 100, master_seed=3, batch_size=30))
        assert first['total'] == second['total']

    @pytest.mark.slow
    def test_worker_processes_match_inline_blocks(self):
        pooled = map_batches(_sum_kernel, 100, master_seed=3, workers=2, batch_size=30)
        assert [r['count'] for r in pooled] == [30, 20, 30, 20]
