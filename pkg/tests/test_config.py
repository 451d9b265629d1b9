"""Key = value config parsing, serialization round trips, and the bundle."""

import pytest

from torusdyn.config import (
    Config,
    ConfigError,
    bundle_text,
    config_hash,
    default_config,
    dump_config,
    load_config,
    loads_config,
)
from torusdyn.endo import Params


class TestRoundTrip:
    def test_default_round_trip(self):
        cfg = default_config()
        assert loads_config(dump_config(cfg)) == cfg

    def test_floats_are_lossless(self):
        cfg = default_config().with_overrides(
            r=0.036, alpha=1.5e-4, eps_pert=0.1 + 0.2
        )
        back = loads_config(dump_config(cfg))
        assert back.params.r == 0.036
        assert back.params.alpha == 1.5e-4
        assert back.eps_pert == 0.1 + 0.2  # not 0.3
        assert back == cfg

    def test_file_round_trip(self, tmp_path):
        cfg = default_config().with_overrides(N=7, out="elsewhere")
        path = tmp_path / "run.cfg"
        path.write_text(dump_config(cfg), encoding="utf-8")
        assert load_config(str(path)) == cfg


class TestParsing:
    def test_partial_file_fills_defaults(self):
        cfg = loads_config("[run]\nseed = 3\n")
        assert cfg.seed == 3
        assert cfg.params == Params()
        assert cfg.mode == "empirical"

    def test_p_is_a_comma_list(self):
        cfg = loads_config("[params]\np = -0.7, 0.1, 0.3\n")
        assert cfg.params.p == (-0.7, 0.1, 0.3)

    def test_scientific_notation_for_budgets(self):
        cfg = loads_config("[run]\nN = 1e7\nsamples = 2e5\n")
        assert cfg.N == 10_000_000 and isinstance(cfg.N, int)
        assert cfg.samples == 200_000

    def test_non_integer_budget_rejected(self):
        with pytest.raises(ConfigError):
            loads_config("[run]\nN = 2.5\n")

    def test_unknown_section(self):
        with pytest.raises(ConfigError, match="unknown section"):
            loads_config("[wat]\nx = 1\n")

    def test_unknown_keys(self):
        with pytest.raises(ConfigError, match="unknown key"):
            loads_config("[params]\nfoo = 1\n")
        with pytest.raises(ConfigError, match="unknown key"):
            loads_config("[run]\nbar = 1\n")

    def test_bad_value_names_the_location(self):
        with pytest.raises(ConfigError, match=r"\[params\] lam"):
            loads_config("[params]\nlam = forty-one\n")

    def test_bad_mode(self):
        with pytest.raises(ConfigError, match="mode"):
            loads_config("[run]\nmode = sloppy\n")

    def test_duplicate_key(self):
        with pytest.raises(ConfigError):
            loads_config("[run]\nseed = 1\nseed = 2\n")


class TestOverridesAndHash:
    def test_with_overrides_routes_param_and_run_keys(self):
        cfg = default_config().with_overrides(lam=61, trials=7)
        assert cfg.params.lam == 61
        assert cfg.trials == 7
        assert default_config().params.lam == 41  # original untouched

    def test_hash_is_stable_and_sensitive(self):
        a = config_hash(default_config())
        assert a == config_hash(default_config())
        assert len(a) == 16 and int(a, 16) >= 0
        assert a != config_hash(default_config().with_overrides(seed=1))
        assert a != config_hash(default_config().with_overrides(kappa=0.9))


class TestBundle:
    def test_bundle_sections_and_members(self, system):
        txt = bundle_text(system)
        assert "[params]" in txt and "[derived]" in txt
        assert f"m = {system.params.m}" in txt
        assert "slice_centers = " in txt
        assert "[family_shrinking]" in txt and "members = 3" in txt
        assert "[family_pair]" in txt and "members = 2" in txt
        assert txt.count("= zone") == system.params.k + 1
        assert txt.count("= translation") == 1
        assert txt.count("= sine") == 1

    def test_bundle_is_deterministic(self, system):
        assert bundle_text(system) == bundle_text(system)
