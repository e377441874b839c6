import math
from pathlib import Path

import numpy as np
import pytest

from cellpool.deployment import Region, synthesize_layout
from cellpool.ingest import (ConfigError, IngestError, config_from_dict, config_to_dict,
                             dump_config, load_bs_csv, load_config, parse_quantity, write_bs_csv)
from cellpool.params import Strategy
from cellpool.simulator import ScenarioConfig

from oracles import haversine

DATA = Path(__file__).resolve().parents[1] / "src" / "cellpool" / "data"


def test_bundled_layout_is_the_synthetic_grid():
    layout = load_bs_csv(DATA / "synthetic_16_13_layout.csv")
    assert len(layout) == 29
    assert [bs.operator for bs in layout].count(2) == 13
    assert layout == synthesize_layout((16, 13), Region(), 0, "perturbed-grid")


def test_csv_round_trip(tmp_path):
    layout = synthesize_layout((3, 2), seed=5, mode="uniform")
    write_bs_csv(layout, tmp_path / "bs.csv")
    assert load_bs_csv(tmp_path / "bs.csv") == layout


def test_header_only_warns(tmp_path):
    path = tmp_path / "empty.csv"
    path.write_text("operator,x_m,y_m\n\n")
    with pytest.warns(UserWarning, match="no base stations"):
        assert load_bs_csv(path) == []


@pytest.mark.parametrize("body, where", [
    ("operator,x,y\n1,2,3\n", ":1:"),
    ("operator,x_m,y_m\n1,2,3\n1,abc,3\n", ":3:"),
    ("operator,x_m,y_m\n1,2\n", ":2:"),
    ("operator,x_m,y_m\n1,2,3\n3,2,3\n", ":3:"),
    ("operator,x_m,y_m\n1,nan,3\n", ":2:"),
])
def test_bad_rows_name_the_line(tmp_path, body, where):
    path = tmp_path / "bad.csv"
    path.write_text(body)
    with pytest.raises(IngestError, match=where):
        load_bs_csv(path)


def test_empty_file_is_an_error(tmp_path):
    path = tmp_path / "nothing.csv"
    path.write_text("")
    with pytest.raises(IngestError):
        load_bs_csv(path)


def test_outside_region_warns(tmp_path):
    path = tmp_path / "far.csv"
    path.write_text("operator,x_m,y_m\n1,100,100\n2,50000,10\n")
    with pytest.warns(UserWarning, match="outside"):
        assert len(load_bs_csv(path)) == 2


def test_geographic_projection_matches_great_circle(tmp_path):
    rng = np.random.default_rng(1)
    lat = 48.85 + rng.uniform(-0.07, 0.07, 12)
    lon = 2.35 + rng.uniform(-0.1, 0.1, 12)
    path = tmp_path / "geo.csv"
    path.write_text("operator,lat,lon\n" + "".join(f"{1 + i % 2},{float(a)!r},{float(b)!r}\n"
                                                    for i, (a, b) in enumerate(zip(lat, lon))))
    layout = load_bs_csv(path)
    xy = np.array([[bs.x, bs.y] for bs in layout])
    assert xy.mean(axis=0) == pytest.approx([1e4, 1e4], abs=1e-6)
    for i in range(12):
        for j in range(i + 1, 12):
            planar = math.hypot(*(xy[i] - xy[j]))
            great = haversine(lat[i], lon[i], lat[j], lon[j])
            assert planar == pytest.approx(great, rel=0.005)


@pytest.mark.parametrize("text, kind, value", [
    ("46 dBm", "power", 39.810717055349734),
    ("-174 dBm/Hz", "psd", 3.981071705534969e-21),
    ("10 MHz", "frequency", 1e7),
    ("20 km", "length", 2e4),
    ("8 dB", "decibel", 8.0),
    ("1.5e3 m", "length", 1500.0),
])
def test_quantities(text, kind, value):
    assert parse_quantity(text, kind) == pytest.approx(value, rel=1e-12)


@pytest.mark.parametrize("text, kind", [("46", "power"), (46, "power"), ("10 MHz", "length"),
                                        ("ten MHz", "frequency"), (True, "power")])
def test_bad_quantities(text, kind):
    with pytest.raises(ValueError):
        parse_quantity(text, kind)


def test_empty_config_is_the_default():
    assert config_from_dict({}) == ScenarioConfig()
    assert config_from_dict(None) == ScenarioConfig()


def test_units_converted_on_load():
    config = config_from_dict({"radio": {"tx_power": "46 dBm"},
                               "operators": [{"bandwidth": "5 MHz"}, {"bandwidth": "20 MHz"}]})
    assert config.radio.tx_power == pytest.approx(39.81, abs=0.005)
    assert config.bandwidth == (5e6, 2e7)


def test_negative_bandwidth_names_field():
    with pytest.raises(ConfigError) as info:
        config_from_dict({"operators": [{"bandwidth": "-1 MHz"}, {}]})
    assert any(p.startswith("operators[0].bandwidth") for p in info.value.problems)


def test_all_problems_reported_together():
    tree = {"ofdma": {"frames": 0, "slot": 3}, "radio": {"tx_power": "40"}, "strategy": "share",
            "channel": {"path_loss_model": "hata"}, "colour": "blue", "seed": -1}
    with pytest.raises(ConfigError) as info:
        config_from_dict(tree)
    fields = {p.split(":")[0] for p in info.value.problems}
    assert fields == {"ofdma.frames", "ofdma.slot", "radio.tx_power", "strategy",
                      "channel.path_loss_model", "colour", "seed"}


def test_bundled_config_loads():
    config = load_config(DATA / "synthetic_16_13.yaml")
    assert config.frames == 30 and config.runs == 5 and config.slots == 60
    assert config.subchannels == (32, 32) and config.path_loss_model == "log-distance"
    assert config.strategy is Strategy.NOCOOP
    assert Path(config.layout_file).is_absolute() and len(config.load_layout()) == 29


def test_dump_load_round_trip(tmp_path):
    config = ScenarioConfig(bs_counts=(7, 3), users_per_cell=(12.5, 40.0), bandwidth=(3e6, 7e6),
                            subchannels=(6, 14), slots=9, frames=4, runs=3, strategy="flexroam",
                            seed=17, shadowing_db=6.5, path_loss_model="literal", eps=2.5,
                            literal_interference=True)
    path = tmp_path / "c.yaml"
    path.write_text(dump_config(config))
    assert load_config(path) == config
    assert config_from_dict(config_to_dict(config)) == config


def test_invalid_yaml(tmp_path):
    path = tmp_path / "broken.yaml"
    path.write_text("ofdma: [1, 2\n")
    with pytest.raises(ConfigError, match="not valid YAML"):
        load_config(path)
