"""Loaders for base-station CSV files and YAML scenario configs.

Layout CSV: header ``operator,x_m,y_m`` (planar metres) or
``operator,lat,lon`` (degrees). Geographic rows are projected with a local
equirectangular map centred on their centroid, which lands on the middle
of the scenario region.

Config YAML: nested key/value text; dimensioned values carry a unit
suffix (``46 dBm``, ``10 MHz``, ``20 km``, ``-174 dBm/Hz``, ``8 dB``).
Everything is converted to linear SI on load.
"""

from __future__ import annotations

import csv
import math
import re
import warnings
from pathlib import Path
from typing import Any, Sequence

import yaml

from .deployment import BaseStation, Region
from .params import RadioParams, Strategy, dbm_to_watt
from .simulator import PATH_LOSS_MODELS, ScenarioConfig

EARTH_RADIUS = 6_371_008.8  # m, mean radius


class IngestError(ValueError):
    pass


class ConfigError(ValueError):
    """Every invalid field of a config, one message per field."""

    def __init__(self, problems: Sequence[str]):
        super().__init__("invalid config:\n  " + "\n  ".join(problems))
        self.problems = list(problems)


# -- layouts -------------------------------------------------------------------

_PLANAR = ("operator", "x_m", "y_m")
_GEO = ("operator", "lat", "lon")


def project_equirectangular(lat, lon, lat0: float, lon0: float):
    """Local planar metres (east, north) of (lat, lon) around (lat0, lon0)."""
    x = EARTH_RADIUS * math.radians(lon - lon0) * math.cos(math.radians(lat0))
    y = EARTH_RADIUS * math.radians(lat - lat0)
    return x, y


def load_bs_csv(path, region: Region | None = None) -> list[BaseStation]:
    """Read a layout file; BS ids follow file order."""
    region = region or Region()
    path = Path(path)
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise IngestError(f"{path}: empty file, expected a header row")
    header = tuple(h.strip().lower() for h in rows[0])
    if header not in (_PLANAR, _GEO):
        raise IngestError(f"{path}:1: unknown header {','.join(header)!r}; "
                          f"expected {','.join(_PLANAR)!r} or {','.join(_GEO)!r}")
    records = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != 3:
            raise IngestError(f"{path}:{lineno}: expected 3 fields, got {len(row)}")
        try:
            op = int(row[0])
            a, b = float(row[1]), float(row[2])
        except ValueError as exc:
            raise IngestError(f"{path}:{lineno}: {exc}") from None
        if op not in (1, 2):
            raise IngestError(f"{path}:{lineno}: operator must be 1 or 2, got {op}")
        if not (math.isfinite(a) and math.isfinite(b)):
            raise IngestError(f"{path}:{lineno}: coordinates must be finite")
        records.append((op, a, b))
    if not records:
        warnings.warn(f"{path}: no base stations in file", stacklevel=2)
        return []

    if header == _GEO:
        lat0 = sum(r[1] for r in records) / len(records)
        lon0 = sum(r[2] for r in records) / len(records)
        planar = []
        for op, lat, lon in records:
            x, y = project_equirectangular(lat, lon, lat0, lon0)
            planar.append((op, x + region.width / 2, y + region.height / 2))
        records = planar

    layout = [BaseStation(i, op, x, y) for i, (op, x, y) in enumerate(records)]
    outside = [bs.id for bs in layout if not region.contains(bs.x, bs.y)]
    if outside:
        warnings.warn(f"{path}: {len(outside)} base stations outside the "
                      f"{region.width:g} x {region.height:g} m region (ids {outside[:5]})", stacklevel=2)
    return layout


def write_bs_csv(layout: Sequence[BaseStation], path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(_PLANAR)
        for bs in layout:
            w.writerow([bs.operator, repr(float(bs.x)), repr(float(bs.y))])


# -- quantities ----------------------------------------------------------------

_NUMBER = r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?"
_QUANTITY = re.compile(rf"^\s*({_NUMBER})\s*([A-Za-z/]+)\s*$")

_UNITS = {
    "length": {"m": lambda v: v, "km": lambda v: v * 1e3},
    "frequency": {"hz": lambda v: v, "khz": lambda v: v * 1e3, "mhz": lambda v: v * 1e6,
                  "ghz": lambda v: v * 1e9},
    "power": {"w": lambda v: v, "mw": lambda v: v * 1e-3, "dbm": dbm_to_watt},
    "psd": {"w/hz": lambda v: v, "dbm/hz": dbm_to_watt},
    "decibel": {"db": lambda v: v},
    "rate": {"bit/s": lambda v: v, "bps": lambda v: v},
}


def parse_quantity(text: Any, kind: str) -> float:
    """``'46 dBm'`` -> 39.81 (W). A unit suffix is mandatory."""
    if isinstance(text, bool) or not isinstance(text, str):
        raise ValueError(f"expected a value with a {kind} unit, got {text!r}")
    m = _QUANTITY.match(text)
    if not m:
        raise ValueError(f"cannot parse {text!r} as a {kind} quantity")
    unit = m.group(2).lower()
    table = _UNITS[kind]
    if unit not in table:
        raise ValueError(f"unit {m.group(2)!r} is not a {kind} unit ({', '.join(table)})")
    return float(table[unit](float(m.group(1))))


# -- configs -------------------------------------------------------------------

DEFAULT_CONFIG = ScenarioConfig()


def _get(tree: dict, dotted: str, default=None):
    node = tree
    for key in dotted.split("."):
        if not isinstance(node, dict) or key not in node:
            return default
        node = node[key]
    return node


_KNOWN = {
    "region": {"width", "height"},
    "layout": {"file", "counts", "mode", "seed"},
    "operators": None,
    "radio": {"tx_power", "noise_density", "path_loss_exponent"},
    "ofdma": {"slots", "frames", "runs"},
    "channel": {"path_loss_model", "shadowing", "min_distance", "literal_interference"},
    "scheduler": {"eps"},
    "strategy": None,
    "seed": None,
}
_OPERATOR_KEYS = {"bandwidth", "subchannels", "users_per_cell"}


def config_from_dict(tree: dict | None, base_dir: Path | None = None) -> ScenarioConfig:
    """Build a validated :class:`ScenarioConfig`; missing keys take the defaults."""
    tree = tree or {}
    problems: list[str] = []
    if not isinstance(tree, dict):
        raise ConfigError(["top level must be a mapping"])
    for key, value in tree.items():
        if key not in _KNOWN:
            problems.append(f"{key}: unknown section")
        elif _KNOWN[key] is not None:
            if not isinstance(value, dict):
                problems.append(f"{key}: expected a mapping")
                continue
            problems.extend(f"{key}.{k}: unknown field" for k in value if k not in _KNOWN[key])

    d = DEFAULT_CONFIG

    def quantity(dotted, kind, default, check=None, what="> 0"):
        raw = _get(tree, dotted)
        if raw is None:
            return default
        try:
            value = parse_quantity(raw, kind)
        except ValueError as exc:
            problems.append(f"{dotted}: {exc}")
            return default
        if check is not None and not check(value):
            problems.append(f"{dotted}: must be {what}, got {raw!r}")
            return default
        return value

    def integer(dotted, default, minimum):
        raw = _get(tree, dotted)
        if raw is None:
            return default
        if isinstance(raw, bool) or not isinstance(raw, int) or raw < minimum:
            problems.append(f"{dotted}: must be an integer >= {minimum}, got {raw!r}")
            return default
        return raw

    def number(dotted, default, check, what):
        raw = _get(tree, dotted)
        if raw is None:
            return default
        if isinstance(raw, bool) or not isinstance(raw, (int, float)) or not check(raw):
            problems.append(f"{dotted}: must be {what}, got {raw!r}")
            return default
        return float(raw)

    positive = lambda v: v > 0
    region = Region(
        quantity("region.width", "length", d.region.width, positive),
        quantity("region.height", "length", d.region.height, positive),
    )

    layout_file = _get(tree, "layout.file")
    if layout_file is not None:
        if not isinstance(layout_file, str):
            problems.append(f"layout.file: expected a path, got {layout_file!r}")
            layout_file = None
        elif base_dir is not None and not Path(layout_file).is_absolute():
            layout_file = str((base_dir / layout_file).resolve())
    counts = _get(tree, "layout.counts", list(d.bs_counts))
    if (not isinstance(counts, (list, tuple)) or len(counts) != 2
            or not all(isinstance(n, int) and not isinstance(n, bool) and n >= 0 for n in counts)):
        problems.append(f"layout.counts: expected two integers >= 0, got {counts!r}")
        counts = d.bs_counts
    mode = _get(tree, "layout.mode", d.layout_mode)
    if mode not in ("uniform", "perturbed-grid"):
        problems.append(f"layout.mode: expected 'uniform' or 'perturbed-grid', got {mode!r}")
        mode = d.layout_mode
    layout_seed = integer("layout.seed", d.layout_seed, 0)

    ops_raw = tree.get("operators")
    bandwidth, subchannels, users = list(d.bandwidth), list(d.subchannels), list(d.users_per_cell)
    if ops_raw is not None:
        if not isinstance(ops_raw, list) or len(ops_raw) != 2:
            problems.append("operators: expected a list of two operator mappings")
            ops_raw = []
        for i, op in enumerate(ops_raw):
            prefix = f"operators[{i}]"
            if not isinstance(op, dict):
                problems.append(f"{prefix}: expected a mapping")
                continue
            problems.extend(f"{prefix}.{k}: unknown field" for k in op if k not in _OPERATOR_KEYS)
            if "bandwidth" in op:
                bandwidth[i] = _op_quantity(op, "bandwidth", "frequency", bandwidth[i], prefix, problems)
            if "subchannels" in op:
                c = op["subchannels"]
                if isinstance(c, bool) or not isinstance(c, int) or c < 0:
                    problems.append(f"{prefix}.subchannels: must be an integer >= 0, got {c!r}")
                else:
                    subchannels[i] = c
            if "users_per_cell" in op:
                u = op["users_per_cell"]
                if isinstance(u, bool) or not isinstance(u, (int, float)) or not u > 0:
                    problems.append(f"{prefix}.users_per_cell: must be > 0, got {u!r}")
                else:
                    users[i] = float(u)

    tx_power = quantity("radio.tx_power", "power", d.radio.tx_power, positive)
    noise = quantity("radio.noise_density", "psd", d.radio.noise_density, lambda v: v >= 0, ">= 0")
    alpha = number("radio.path_loss_exponent", d.radio.path_loss_exponent, lambda v: v > 2, "> 2")

    slots = integer("ofdma.slots", d.slots, 1)
    frames = integer("ofdma.frames", d.frames, 1)
    runs = integer("ofdma.runs", d.runs, 1)

    model = _get(tree, "channel.path_loss_model", d.path_loss_model)
    if model not in PATH_LOSS_MODELS:
        problems.append(f"channel.path_loss_model: expected one of {PATH_LOSS_MODELS}, got {model!r}")
        model = d.path_loss_model
    shadowing = quantity("channel.shadowing", "decibel", d.shadowing_db, lambda v: v >= 0, ">= 0")
    min_distance = quantity("channel.min_distance", "length", d.min_distance, positive)
    literal = _get(tree, "channel.literal_interference", d.literal_interference)
    if not isinstance(literal, bool):
        problems.append(f"channel.literal_interference: expected true/false, got {literal!r}")
        literal = d.literal_interference
    eps = quantity("scheduler.eps", "rate", d.eps, positive)

    strategy = tree.get("strategy", d.strategy.value)
    try:
        strategy = Strategy.parse(strategy)
    except ValueError as exc:
        problems.append(f"strategy: {exc}")
        strategy = d.strategy
    seed = tree.get("seed", d.seed)
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        problems.append(f"seed: must be an integer >= 0, got {seed!r}")
        seed = d.seed

    if problems:
        raise ConfigError(problems)
    try:
        return ScenarioConfig(
            region=region, layout_file=layout_file, bs_counts=tuple(counts), layout_mode=mode,
            layout_seed=layout_seed, users_per_cell=tuple(users), bandwidth=tuple(bandwidth),
            subchannels=tuple(subchannels), slots=slots, frames=frames, runs=runs,
            strategy=strategy, seed=seed, radio=RadioParams(tx_power, noise, alpha),
            path_loss_model=model, shadowing_db=shadowing, eps=eps, min_distance=min_distance,
            literal_interference=literal,
        )
    except ValueError as exc:
        raise ConfigError([str(exc)]) from None


def _op_quantity(op, key, kind, default, prefix, problems):
    try:
        value = parse_quantity(op[key], kind)
    except ValueError as exc:
        problems.append(f"{prefix}.{key}: {exc}")
        return default
    if value < 0:
        problems.append(f"{prefix}.{key}: must be >= 0, got {op[key]!r}")
        return default
    return value


def load_config(path) -> ScenarioConfig:
    path = Path(path)
    try:
        tree = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError([f"{path}: not valid YAML ({exc})"]) from None
    return config_from_dict(tree, base_dir=path.parent)


def config_to_dict(config: ScenarioConfig) -> dict:
    """Inverse of :func:`config_from_dict`; linear units, exact float reprs."""
    q = lambda v, unit: f"{float(v)!r} {unit}"
    tree = {
        "region": {"width": q(config.region.width, "m"), "height": q(config.region.height, "m")},
        "layout": {"counts": list(config.bs_counts), "mode": config.layout_mode,
                   "seed": config.layout_seed},
        "operators": [
            {"bandwidth": q(w, "Hz"), "subchannels": c, "users_per_cell": float(u)}
            for w, c, u in zip(config.bandwidth, config.subchannels, config.users_per_cell)
        ],
        "radio": {"tx_power": q(config.radio.tx_power, "W"),
                  "noise_density": q(config.radio.noise_density, "W/Hz"),
                  "path_loss_exponent": float(config.radio.path_loss_exponent)},
        "ofdma": {"slots": config.slots, "frames": config.frames, "runs": config.runs},
        "channel": {"path_loss_model": config.path_loss_model,
                    "shadowing": q(config.shadowing_db, "dB"),
                    "min_distance": q(config.min_distance, "m"),
                    "literal_interference": config.literal_interference},
        "scheduler": {"eps": q(config.eps, "bit/s")},
        "strategy": config.strategy.value,
        "seed": config.seed,
    }
    if config.layout_file is not None:
        tree["layout"]["file"] = config.layout_file
    return tree


def dump_config(config: ScenarioConfig) -> str:
    return yaml.safe_dump(config_to_dict(config), sort_keys=False)
