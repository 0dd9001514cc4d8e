import math

import pytest

from probewalk.errors import ConfigError, ModelValidationError
from probewalk.model import (REQUIRED_JOINTS, default_model, default_model_text,
                             load_model, parse_angle_range, parse_length,
                             parse_speed)


def test_default_total_mass_is_68kg(model):
    assert model.total_mass == pytest.approx(68.0, abs=1e-9)
    assert abs(model.total_mass - sum(m for _, m in model.link_masses)) < 1e-9


def test_default_sensor_range(model):
    assert model.foot.sensor_range == pytest.approx(0.015, abs=1e-12)


def test_rpm_conversion_knee():
    # 60 rpm -> 2*pi rad/s
    assert parse_speed("60 rpm", "x") == pytest.approx(6.2832, abs=1e-4)


def test_degree_range_conversion_hip_roll(model):
    spec = model.joint("left_hip_roll")
    assert spec.range_min == pytest.approx(-0.4363, abs=1e-4)
    assert spec.range_max == pytest.approx(0.5236, abs=1e-4)


def test_knee_speed_from_table(model):
    assert model.joint("left_knee_pitch").max_speed == pytest.approx(
        60 * 2 * math.pi / 60, abs=1e-12)


def test_shipped_file_reproduces_default(model):
    assert load_model(default_model_text()) == model


def test_roundtrip_serialization(model):
    again = load_model(model.to_config_text())
    assert again == model


def test_missing_required_key_raises():
    text = default_model_text().replace("thigh_length = 0.36\n", "")
    with pytest.raises(ModelValidationError, match="thigh_length"):
        load_model(text)


def test_parse_failure_reports_line():
    with pytest.raises(ConfigError, match="line"):
        load_model("[leg\nthigh_length = 0.36")


def test_negative_length_rejected():
    text = default_model_text().replace("shank_length = 0.35", "shank_length = -0.35")
    with pytest.raises(ModelValidationError, match="shank_length"):
        load_model(text)


def test_unit_suffixes():
    assert parse_length("24 cm", "x") == pytest.approx(0.24)
    assert parse_length("5 mm", "x") == pytest.approx(0.005)
    assert parse_angle_range("-25 .. 30 deg", "x") == (
        pytest.approx(math.radians(-25)), pytest.approx(math.radians(30)))


def test_every_required_joint_present_once(model):
    names = [j.name for j in model.joints]
    for required in REQUIRED_JOINTS:
        assert names.count(required) == 1


def test_leg_ranges_contain_zero(model):
    # interior or an explicit one-sided boundary (knee: 0..135 deg)
    for name in REQUIRED_JOINTS:
        spec = model.joint(name)
        ok = spec.range_min < 0 < spec.range_max or 0.0 in (spec.range_min,
                                                            spec.range_max)
        assert ok, name


def test_knee_range_excluding_zero_rejected():
    text = default_model_text().replace('range = "0 .. 135 deg"',
                                        'range = "5 .. 135 deg"')
    with pytest.raises(ModelValidationError, match="knee"):
        load_model(text)


def test_probe_rectangle_centroid_at_origin(model):
    offsets = model.foot.probe_offsets_array()
    assert abs(offsets[:, 0].sum()) < 1e-12
    assert abs(offsets[:, 1].sum()) < 1e-12


def test_probe_spans(model):
    # 0.24 x 0.14 sole with 1 cm inset -> 0.22 x 0.12 probe rectangle
    assert model.foot.span_x == pytest.approx(0.22)
    assert model.foot.span_y == pytest.approx(0.12)


def test_extra_joints_accepted_but_stored(model):
    text = default_model_text() + (
        '\n[[joints]]\nname = "waist_pitch"\naxis = "pitch"\n'
        'gear_ratio = 100\nmax_speed = "20 rpm"\nmax_torque = 120.0\n'
        'range = "-10 .. 20 deg"\n')
    loaded = load_model(text)
    assert loaded.joint("waist_pitch").max_torque == 120.0
    # locomotion-relevant parts unchanged
    assert loaded.leg == model.leg


def test_degenerate_probe_rectangle_rejected():
    text = default_model_text().replace("probe_inset = 0.01", "probe_inset = 0.08")
    with pytest.raises(ModelValidationError, match="probe_inset"):
        load_model(text)
