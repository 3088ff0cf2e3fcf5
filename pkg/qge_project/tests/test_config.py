"""
Tests for experiment configuration files and command-line overrides.
"""

import pytest

from qge_project.apps.experiments.config import (
    DEFAULT_COARSE_LIST,
    DEFAULT_H_LISTS,
    DEFAULT_SWEEP_H,
    ExperimentConfig,
    config_as_toml,
    load_config,
    parse_size_list,
)
from qge_project.apps.fem.exceptions import InvalidArgument


class DefaultConfigTestCase:
    def test_defaults(self):
        config = load_config()
        assert config.problem == "sine-squared"
        assert (config.reynolds, config.rossby) == (1.0, 1.0)
        assert config.h_list == DEFAULT_H_LISTS["sine-squared"]
        assert config.H_list == DEFAULT_COARSE_LIST
        assert config.sweep_h == DEFAULT_SWEEP_H["sine-squared"] == 1 / 128
        assert config.method == "two-level"
        assert config.ratio == 2 and config.refinement_levels == 1
        assert config.quad_degree == 14
        assert config.newton.abs_tol == 1e-11

    def test_settings_feed_defaults(self, settings):
        settings.QGE_SOLVER = {**settings.QGE_SOLVER, "WORKERS": 3, "LOOKUP": "search"}
        config = load_config()
        assert config.workers == 3
        assert config.lookup == "search"

    def test_problem_defaults(self):
        config = ExperimentConfig.from_dict({"problem": {"id": "boundary-layer"}})
        assert (config.reynolds, config.rossby) == (5.0, 1e-4)
        assert config.h_list == DEFAULT_H_LISTS["boundary-layer"]
        assert config.params.rossby == 1e-4
        assert config.solution.identifier == "boundary-layer"

    def test_newton_settings(self):
        newton = load_config().newton_settings()
        assert newton.max_iters == 25
        assert newton.continuation_steps == 3


class ConfigFileTestCase:
    def test_round_trip(self, tmp_path):
        original = ExperimentConfig.from_dict({
            "problem": {"id": "sine-squared", "re": 2.0, "ro": 0.5},
            "mesh": {"h_list": [0.125, 0.0625], "ratio": 4},
            "solver": {"method": "one-level", "quad_degree": 12, "lookup": "search", "workers": 2},
            "output": {"dir": "out \"quoted\"", "plot_data": True},
        })
        path = tmp_path / "study.toml"
        path.write_text(config_as_toml(original))
        assert load_config(path) == original

    def test_partial_file(self, tmp_path):
        path = tmp_path / "study.toml"
        path.write_text('[mesh]\nh_list = [0.25]\n\n[solver]\nnewton_tol = 1e-9\n')
        config = load_config(path)
        assert config.h_list == (0.25,)
        assert config.newton.abs_tol == 1e-9
        assert config.method == "two-level"

    def test_missing_file(self, tmp_path):
        with pytest.raises(InvalidArgument, match="does not exist"):
            load_config(tmp_path / "absent.toml")

    def test_malformed_file(self, tmp_path):
        path = tmp_path / "broken.toml"
        path.write_text("[mesh\nh_list = ")
        with pytest.raises(InvalidArgument, match="not valid TOML"):
            load_config(path)

    def test_unknown_section(self, tmp_path):
        path = tmp_path / "extra.toml"
        path.write_text("[plots]\nstyle = 'dark'\n")
        with pytest.raises(InvalidArgument, match="plots"):
            load_config(path)


class ConfigValidationTestCase:
    @pytest.mark.parametrize(
        "data",
        [
            {"problem": {"id": "vortex"}},
            {"problem": {"re": 0.0}},
            {"problem": {"ro": -1.0}},
            {"mesh": {"h_list": [0.25, 0.5]}},
            {"mesh": {"h_list": [0.25, 0.25]}},
            {"mesh": {"H_list": [0.25, -0.125]}},
            {"mesh": {"sweep_h": 0.0}},
            {"mesh": {"sweep_h": 0.25, "H_list": [0.5, 0.125]}},
            {"mesh": {"ratio": 3}},
            {"mesh": {"ratio": 0}},
            {"solver": {"method": "multigrid"}},
            {"solver": {"lookup": "guess"}},
            {"solver": {"quad_degree": 30}},
            {"solver": {"workers": 0}},
        ],
    )
    def test_invalid(self, data):
        with pytest.raises(InvalidArgument):
            ExperimentConfig.from_dict(data)


class OverridesTestCase:
    def test_none_is_ignored(self):
        config = load_config()
        assert config.with_overrides(re=None, method=None) == config

    def test_values(self):
        config = load_config().with_overrides(
            re=3.0, h_list=(0.25, 0.125), sweep_h=1 / 256, method="one-level", plot_data=True
        )
        assert config.reynolds == 3.0
        assert config.h_list == (0.25, 0.125)
        assert config.sweep_h == 1 / 256
        assert config.method == "one-level"
        assert config.plot_data is True

    def test_problem_switch_resets_problem_defaults(self):
        config = load_config().with_overrides(problem="boundary-layer")
        assert (config.reynolds, config.rossby) == (5.0, 1e-4)
        assert config.h_list == DEFAULT_H_LISTS["boundary-layer"]
        assert config.sweep_h == DEFAULT_SWEEP_H["boundary-layer"]

    def test_problem_switch_keeps_explicit_values(self):
        config = load_config().with_overrides(problem="boundary-layer", ro=0.01, h_list=(0.5,))
        assert config.rossby == 0.01
        assert config.reynolds == 5.0
        assert config.h_list == (0.5,)

    def test_unknown_override(self):
        with pytest.raises(InvalidArgument):
            load_config().with_overrides(colour="blue")


class ParseSizeListTestCase:
    def test_fractions_and_decimals(self):
        assert parse_size_list("1/16, 1/32, 0.015625") == (0.0625, 0.03125, 0.015625)

    def test_semicolons_and_blanks(self):
        assert parse_size_list("1/4;; 1/8 ,") == (0.25, 0.125)

    def test_empty(self):
        assert parse_size_list("") == ()

    @pytest.mark.parametrize("text", ["1/0", "a quarter", "1/x"])
    def test_invalid(self, text):
        with pytest.raises(InvalidArgument):
            parse_size_list(text)
