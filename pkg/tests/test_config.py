import math

import numpy as np
import pytest
from pydantic import ValidationError

from vphnav.config import get_settings
from vphnav.exceptions import ConfigError
from vphnav.models import ControllerMode, EpisodeConfig, LidarSpec, VehicleParams, VphParams
from vphnav.services.artifacts import build_config, effective_config
from vphnav.utils import deep_merge, dotted_to_nested, parse_override, wrap_angle


class TestSettings:
    def test_defaults(self):
        settings = get_settings()
        assert settings.log_level == "INFO"
        assert settings.output_dir == "out"
        assert settings.jobs == 1
        assert settings.scenario_dir is None

    def test_environment_variables(self, monkeypatch, tmp_path):
        monkeypatch.setenv("LOG_LEVEL", "DEBUG")
        monkeypatch.setenv("NAV_OUTPUT_DIR", str(tmp_path))
        monkeypatch.setenv("NAV_JOBS", "4")
        settings = get_settings()
        assert settings.log_level == "DEBUG"
        assert settings.output_dir == str(tmp_path)
        assert settings.jobs == 4

    def test_invalid_job_count(self, monkeypatch):
        monkeypatch.setenv("NAV_JOBS", "0")
        with pytest.raises(ValidationError):
            get_settings()


class TestBuildConfig:
    def test_defaults(self):
        cfg = build_config()
        assert cfg == EpisodeConfig()
        assert cfg.mpc.prediction_horizon == 15
        assert cfg.vph.r_prime == cfg.vph.radius

    def test_layers_apply_lowest_to_highest(self, write_json):
        params = write_json("params.json", {"vph": {"R": 0.9, "k3": 3.0}, "mpc": {"N_p": 20}})
        cfg = build_config(
            scenario_params={"vph": {"R": 0.8, "k3": 20.0, "L_w": 12.0}, "max_steps": 600},
            params_path=str(params),
            overrides=["vph.R=1.0"],
            controller_mode=ControllerMode.VPH_ONLY,
        )
        assert cfg.vph.radius == 1.0
        assert cfg.vph.k3 == 3.0
        assert cfg.vph.window_radius == 12.0
        assert cfg.max_steps == 600
        assert cfg.mpc.prediction_horizon == 20
        assert cfg.controller_mode == ControllerMode.VPH_ONLY

    def test_alias_and_field_name_address_the_same_setting(self):
        cfg = build_config(scenario_params={"mpc": {"N_p": 20}}, overrides=["mpc.prediction_horizon=25"])
        assert cfg.mpc.prediction_horizon == 25

    def test_flag_beats_override(self):
        cfg = build_config(overrides=["controller_mode=vph_only", "debug=false"], debug=True)
        assert cfg.controller_mode == ControllerMode.VPH_ONLY
        assert cfg.debug is True

    def test_unknown_key(self):
        with pytest.raises(ConfigError, match="mpc.horizon"):
            build_config(overrides=["mpc.horizon=3"])

    def test_override_without_value(self):
        with pytest.raises(ConfigError, match="--set"):
            build_config(overrides=["mpc.N_p"])

    def test_malformed_params_file_reports_line(self, write_json):
        path = write_json("params.json", '{\n  "mpc": {"N_p": 20},\n  "vph": {"R": }\n}\n')
        with pytest.raises(ConfigError, match=r"params\.json:3:"):
            build_config(params_path=str(path))

    def test_missing_params_file(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            build_config(params_path=str(tmp_path / "nope.json"))

    @pytest.mark.parametrize("override, location", [
        ("mpc.N_c=20", "mpc"),
        ("vph.k1=0.5", "vph"),
        ("lidar.beam_count=100", "lidar"),
        ("v_r=-1", "v_r|speed"),
    ])
    def test_invalid_values_name_their_location(self, override, location):
        with pytest.raises(ConfigError, match=location):
            build_config(overrides=[override])

    def test_effective_config_uses_documented_names(self):
        document = effective_config(EpisodeConfig())
        assert document["v_r"] == 2.0
        assert document["mpc"]["N_p"] == 15
        assert document["mpc"]["N_c"] == 5
        assert document["vph"]["R"] == 0.5
        assert document["vehicle"]["L"] == 0.6
        assert document["controller_mode"] == "vph_mpc"

    def test_effective_config_reloads_to_the_same_config(self):
        cfg = build_config(overrides=["mpc.N_p=20", "vph.concavity_rule=recessed", "lidar.range_noise_std=0.01"])
        assert EpisodeConfig.model_validate(effective_config(cfg)) == cfg


class TestModels:
    def test_threshold_radius(self):
        params = VphParams(R=0.8, delta_d=0.3)
        assert params.r_threshold == pytest.approx(1.4)
        assert VphParams(R=0.8, R_prime=0.2).r_prime == 0.2

    def test_lidar_geometry(self):
        spec = LidarSpec()
        assert spec.heading_angle_deg == 90.0
        np.testing.assert_array_equal(spec.beam_angles_deg()[[0, 90, 180]], [0.0, 90.0, 180.0])
        assert LidarSpec(beam_count=361, gamma=0.5).beam_angles_deg()[-1] == 180.0

    def test_vehicle_radius_covers_the_wheel_footprint(self):
        vehicle = VehicleParams()
        assert vehicle.footprint_radius == pytest.approx(0.5 * math.hypot(0.78, 0.35))
        assert vehicle.radius >= vehicle.footprint_radius
        with pytest.raises(ValidationError, match="footprint"):
            VehicleParams(R=0.3)
        with pytest.raises(ValidationError, match="footprint"):
            VehicleParams(L=1.2)

    def test_lidar_beam_count_must_match_fan(self):
        with pytest.raises(ValidationError):
            LidarSpec(beam_count=180)


class TestUtils:
    @pytest.mark.parametrize("expression, expected", [
        ("mpc.N_p=20", ("mpc.N_p", 20)),
        ("vph.R=0.75", ("vph.R", 0.75)),
        ("debug=true", ("debug", True)),
        ("controller_mode=vph_only", ("controller_mode", "vph_only")),
        ("mpc.Q=[1, 1, 2]", ("mpc.Q", [1, 1, 2])),
    ])
    def test_parse_override(self, expression, expected):
        assert parse_override(expression) == expected

    @pytest.mark.parametrize("expression", ["mpc.N_p", "=3"])
    def test_parse_override_rejects(self, expression):
        with pytest.raises(ValueError):
            parse_override(expression)

    def test_dotted_to_nested(self):
        assert dotted_to_nested("a.b.c", 1) == {"a": {"b": {"c": 1}}}

    def test_deep_merge_keeps_inputs(self):
        base = {"mpc": {"N_p": 15, "N_c": 5}, "v_r": 2.0}
        merged = deep_merge(base, {"mpc": {"N_p": 20}})
        assert merged == {"mpc": {"N_p": 20, "N_c": 5}, "v_r": 2.0}
        assert base["mpc"]["N_p"] == 15

    @pytest.mark.parametrize("angle, expected", [
        (0.0, 0.0),
        (math.pi, math.pi),
        (-math.pi, math.pi),
        (2.5 * math.pi, 0.5 * math.pi),
        (1.5 * math.pi, -0.5 * math.pi),
    ])
    def test_wrap_angle(self, angle, expected):
        assert wrap_angle(angle) == pytest.approx(expected)

    def test_wrap_angle_array(self):
        wrapped = wrap_angle(np.array([0.1, 2 * math.pi + 0.1, -2 * math.pi - 0.1]))
        np.testing.assert_allclose(wrapped, [0.1, 0.1, -0.1])
