"""Campaign configuration, sweep execution and artifact writing."""

import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from uavmmw.analytic import LinkBudget, two_ray_rss
from uavmmw.campaign import (CampaignConfig, combination_tag, config_hash, format_config,
                             manifest_text, parse_config, rss_csv, run_campaign, write_outputs)
from uavmmw.errors import CampaignError, ConfigError
from uavmmw.raytrace import dipole_gain, fresnel_reflection
from uavmmw.scene import (MaterialKind, ScenarioKind, default_trajectory, material_permittivity,
                          trajectory_samples)

SMALL = """
# short sweep used across these tests
scenarios = urban, rural
frequencies = 28e9
heights = 50
trajectory_length = 100
trajectory_spacing = 10
"""


def test_defaults():
    cfg = parse_config("")
    assert cfg == CampaignConfig()
    assert cfg.frequencies == (28e9, 60e9)
    assert cfg.heights == (2.0, 50.0, 100.0, 150.0)
    assert cfg.scenarios == tuple(ScenarioKind)


def test_single_frequency():
    cfg = parse_config("frequencies = 28e9\n")
    assert cfg.frequencies == (28e9,)
    assert dataclasses.replace(cfg, frequencies=CampaignConfig().frequencies) == CampaignConfig()


def test_height_list():
    assert parse_config("heights = 50,100,150  # the three UAV altitudes").heights == (50.0, 100.0, 150.0)


@pytest.mark.parametrize("text,line", [
    ("frequencies = 5e9", 1),
    ("\n\nfoo = 1", 3),
    ("heights =", 1),
    ("heights = 50,,100", 1),
    ("max_order = 1.5", 1),
    ("diffraction = maybe", 1),
    ("scenarios = desert", 1),
    ("seed = 1\nseed = 2", 2),
    ("just words", 1),
    ("dynamic_range_db = 5", 1),
    ("bare_ground = foliage", 1),
])
def test_parse_errors_carry_line_numbers(text, line):
    with pytest.raises(ConfigError) as exc:
        parse_config(text)
    assert exc.value.line == line
    assert f"line {line}" in str(exc.value)


@settings(max_examples=50, deadline=None)
@given(freqs=st.lists(st.floats(10e9, 100e9), min_size=1, max_size=3),
       heights=st.lists(st.floats(0.5, 500), min_size=1, max_size=4),
       seed=st.integers(0, 2**32),
       order=st.integers(0, 3),
       diff=st.booleans(),
       bare=st.booleans(),
       scen=st.lists(st.sampled_from(list(ScenarioKind)), min_size=1, max_size=4))
def test_manifest_round_trip(freqs, heights, seed, order, diff, bare, scen):
    cfg = CampaignConfig(scenarios=tuple(scen), frequencies=tuple(freqs), heights=tuple(heights),
                         seed=seed, max_order=order, diffraction=diff, bare_scene=bare)
    assert parse_config(format_config(cfg)) == cfg


def test_config_hash_ignores_workers_and_output():
    cfg = CampaignConfig()
    assert config_hash(cfg) == config_hash(dataclasses.replace(cfg, workers=8, output_dir="x"))
    assert config_hash(cfg) != config_hash(dataclasses.replace(cfg, seed=2))


def test_combination_tag():
    assert combination_tag("urban", 28e9, 50.0) == "urban_28GHz_50m"
    assert combination_tag("oversea", 60e9, 2.0) == "oversea_60GHz_2m"


@pytest.fixture(scope="module")
def small_result():
    return run_campaign(parse_config(SMALL))


def test_one_trace_per_combination(small_result):
    assert sorted(small_result.traces) == [("rural", 28e9, 50.0), ("urban", 28e9, 50.0)]
    for tr in small_result.traces.values():
        assert len(tr) == 11
        np.testing.assert_allclose(tr.distance, 50 + 10 * np.arange(11))


def test_default_combination_count():
    cfg = CampaignConfig(trajectory_length=0.0)
    res = run_campaign(cfg)
    assert len(res.traces) == 32
    assert all(len(t) == 1 for t in res.traces.values())
    # the full-length default trajectory has 2001 samples per combination
    assert len(trajectory_samples(default_trajectory(50.0, CampaignConfig().trajectory_spacing))) == 2001


def test_bare_scene_matches_two_ray():
    cfg = parse_config("bare_scene = true\nfrequencies = 28e9\nheights = 50\n"
                       "trajectory_length = 1950\ntrajectory_spacing = 25")
    res = run_campaign(cfg)
    (key, tr), = res.traces.items()
    assert key == ("bare", 28e9, 50.0)
    eta = material_permittivity(MaterialKind.DRY_GROUND, 28e9)
    for d, rss in zip(tr.distance, tr.rss_dbm):
        g = 10 * math.log10(dipole_gain(math.atan2(d, 48.0)))
        ref = two_ray_rss(LinkBudget(30, 28e9, 2, 50, g, g), d, fresnel_reflection(eta, math.atan2(52, d)))
        assert rss == pytest.approx(ref, abs=0.5)
    # near the Brewster angle (about 14.5 deg grazing, d ~ 200 m) the ground ray falls under the cut
    assert set(tr.num_paths.tolist()) <= {1, 2} and not tr.los_blocked.any()


def test_worker_count_does_not_change_output(tmp_path, small_result):
    multi = run_campaign(parse_config(SMALL), workers=3)
    a = write_outputs(small_result, tmp_path / "a")
    b = write_outputs(multi, tmp_path / "b")
    assert [p.name for p in a] == [p.name for p in b]
    for pa, pb in zip(a, b):
        assert pa.read_bytes() == pb.read_bytes()


def test_output_files(tmp_path, small_result):
    files = write_outputs(small_result, tmp_path)
    names = sorted(p.name for p in files)
    assert names == ["cdf_rmsds_rural_28GHz_50m.csv", "cdf_rmsds_urban_28GHz_50m.csv", "manifest.txt",
                     "rss_rural_28GHz_50m.csv", "rss_urban_28GHz_50m.csv"]
    rss = (tmp_path / "rss_urban_28GHz_50m.csv").read_text()
    lines = rss.splitlines()
    assert lines[0] == "distance_m,rss_dbm,num_paths,rms_ds_ns,los_blocked"
    assert len(lines) == 12
    assert "\r" not in rss
    cdf = (tmp_path / "cdf_rmsds_urban_28GHz_50m.csv").read_text().splitlines()
    assert cdf[0] == "value_ns,probability" and cdf[-1].endswith(",1")
    manifest = (tmp_path / "manifest.txt").read_text()
    assert "# seed = 1" in manifest
    assert parse_config(manifest) == small_result.config
    # rerun is byte-identical
    again = write_outputs(run_campaign(parse_config(SMALL)), tmp_path / "again")
    for p in again:
        assert p.read_bytes() == (tmp_path / p.name).read_bytes()


def test_no_coverage_encoding():
    from uavmmw.metrics import RssTrace
    tr = RssTrace(np.array([50.0, 51.0]), np.array([-80.5, np.nan]), np.array([2, 0]),
                  np.array([1e-9, np.nan]), np.array([False, True]))
    assert rss_csv(tr).splitlines()[1:] == ["50,-80.5,2,1,0", "51,nan,0,nan,1"]


def test_invalid_points_over_threshold_fail(monkeypatch):
    import uavmmw.campaign as camp
    real = camp.Tracer.find_paths

    def flaky(self, rx):
        if rx[0] < 4070:   # the first 3 of 11 points
            raise ValueError("synthetic geometry failure")
        return real(self, rx)

    monkeypatch.setattr(camp.Tracer, "find_paths", flaky)
    cfg = parse_config("scenarios = rural\nfrequencies = 28e9\nheights = 50\n"
                       "trajectory_length = 100\ntrajectory_spacing = 10")
    with pytest.raises(CampaignError):
        run_campaign(cfg)


def test_invalid_points_under_threshold_are_recorded(monkeypatch):
    import uavmmw.campaign as camp
    real = camp.Tracer.find_paths

    def flaky(self, rx):
        if rx[0] == 4050.0:
            raise ValueError("synthetic geometry failure")
        return real(self, rx)

    monkeypatch.setattr(camp.Tracer, "find_paths", flaky)
    cfg = parse_config("scenarios = rural\nfrequencies = 28e9\nheights = 50\n"
                       "trajectory_length = 100\ntrajectory_spacing = 1")
    res = run_campaign(cfg)
    assert res.invalid[("rural", 50.0)] == [0]
    tr = res.traces[("rural", 28e9, 50.0)]
    assert math.isnan(tr.rss_dbm[0]) and tr.los_blocked[0]
    assert "# invalid_points = 1" in manifest_text(res)


def test_unwritable_directory(tmp_path, small_result):
    target = tmp_path / "file"
    target.write_text("occupied")
    with pytest.raises(OSError):
        write_outputs(small_result, target)
