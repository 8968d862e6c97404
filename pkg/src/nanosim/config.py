"""Experiment configuration: schema, defaults, validation, presets.

Configs are flat JSON objects with a `scenario` discriminator. Validation
is strict: unknown fields and type mismatches are hard errors naming the
offending field, so a typo can never silently fall back to a default.
"""

from __future__ import annotations

import json

SCHEMA_VERSION = 1


class ConfigError(Exception):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


def _is_float(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool)


_KIND_CHECKS = {
    "int": lambda v: isinstance(v, int) and not isinstance(v, bool),
    "float": _is_float,
    "bool": lambda v: isinstance(v, bool),
    "str": lambda v: isinstance(v, str),
    "list_float": lambda v: isinstance(v, list) and all(_is_float(x) for x in v),
    "list_str": lambda v: isinstance(v, list) and all(isinstance(x, str) for x in v),
    "list_bool": lambda v: isinstance(v, list) and all(isinstance(x, bool) for x in v),
}

_COMMON = {
    "schema": ("int", SCHEMA_VERSION),
    "scenario": ("str", None),
    "seed": ("int", 1),
}

# Per-scenario field specs: name -> (kind, default). Service times and the
# timeout-baseline RTO are calibration constants (see scenarios.py).
SCENARIO_FIELDS = {
    "loopback_latency": {
        "payload_bytes": ("int", 8),
        "link_ns": ("float", 43.0),
    },
    "core_throughput": {
        "msg_bytes": ("int", 1024),
        "window_us": ("float", 20.0),
    },
    "sched_hw_vs_timer": {
        "service_ns": ("float", 500.0),
        "timer_period_us": ("float", 5.0),
        "high_frac": ("float", 0.15),
        "modes": ("list_str", ["hw", "timer"]),
        "loads": ("list_float", [0.2, 0.5, 0.8, 0.96]),
        "num_requests": ("int", 20000),
        "link_ns": ("float", 43.0),
        "drain_slack_us": ("float", 3000.0),
        "derive_seeds": ("bool", True),
    },
    "bounded_mpt": {
        "service_ns": ("float", 500.0),
        "long_service_us": ("float", 5.0),
        "misbehave_every": ("int", 100),
        "wb_frac": ("float", 0.4),
        "x_us": ("float", 1.0),
        "sticky_downgrade": ("bool", True),
        "bounding": ("list_bool", [True, False]),
        "loads_mrps": ("list_float", [0.5, 1.0, 1.5, 1.9]),
        "num_requests": ("int", 20000),
        "property_requests": ("int", 200),
        "link_ns": ("float", 43.0),
        "drain_slack_us": ("float", 3000.0),
        "derive_seeds": ("bool", True),
    },
    "core_selection": {
        "cores": ("int", 4),
        "service_ns": ("float", 500.0),
        "long_service_us": ("float", 5.0),
        "p_long": ("float", 0.005),
        "jbsq_n": ("int", 2),
        "policies": ("list_str", ["rss", "jbsq", "jbsq_pre"]),
        "loads": ("list_float", [0.2, 0.4, 0.6, 0.8, 0.9]),
        "pre_extra_loads": ("list_float", [0.98]),
        "num_requests": ("int", 20000),
        "link_ns": ("float", 43.0),
        "drain_slack_us": ("float", 3000.0),
        "derive_seeds": ("bool", True),
    },
    "incast_ndp": {
        "clients": ("int", 80),
        "msg_bytes": ("int", 1024),
        "queue_cap_pkts": ("int", 74),
        "trimming": ("bool", True),
        "rto_us": ("float", 12.0),
        "link_ns": ("float", 750.0),
        "rate_gbps": ("float", 200.0),
        "run_limit_us": ("float", 100.0),
    },
    "mica_kv": {
        "cores": ("int", 4),
        "policies": ("list_str", ["jbsq", "static"]),
        "loads": ("list_float", [0.05, 0.2, 0.4, 0.6]),
        "read_ns": ("float", 414.0),
        "write_ns": ("float", 414.0),
        "value_bytes": ("int", 512),
        "pairs_per_core": ("int", 10000),
        "jbsq_n": ("int", 2),
        "num_requests": ("int", 20000),
        "link_ns": ("float", 43.0),
        "drain_slack_us": ("float", 3000.0),
        "derive_seeds": ("bool", True),
    },
    "chain_replication": {
        "rate_rps": ("float", 50000.0),
        "num_requests": ("int", 20000),
        "client_compute_ns": ("float", 130.0),
        "write_service_ns": ("float", 194.0),
        "read_service_ns": ("float", 194.0),
        "value_bytes": ("int", 64),
        "pairs": ("int", 10000),
        "read_frac": ("float", 0.0),
        "link_ns": ("float", 43.0),
        "drain_slack_us": ("float", 3000.0),
    },
}

_ENUM_FIELDS = {
    ("sched_hw_vs_timer", "modes"): {"hw", "timer"},
    ("core_selection", "policies"): {"rss", "jbsq", "jbsq_pre"},
    ("mica_kv", "policies"): {"jbsq", "static"},
}

_POSITIVE_FIELDS = {
    "payload_bytes", "msg_bytes", "window_us", "service_ns", "num_requests",
    "clients", "queue_cap_pkts", "rto_us", "rate_gbps", "run_limit_us",
    "cores", "read_ns", "write_ns", "value_bytes", "pairs_per_core", "pairs",
    "rate_rps", "client_compute_ns", "jbsq_n", "misbehave_every", "x_us",
    "timer_period_us", "property_requests", "long_service_us",
}

# The paper's evaluation subsections, one preset each.
PRESETS = {
    "loopback_latency": "wire-to-wire and internal loopback latency of one 72B packet",
    "core_throughput": "single-core RX/TX throughput (1KB messages) and NIC packet rate",
    "sched_hw_vs_timer": "hardware vs timer-driven thread scheduling, tail latency vs load",
    "bounded_mpt": "bounded message-processing time with a misbehaving thread",
    "core_selection": "RSS vs JBSQ vs JBSQ-PRE on a bimodal workload",
    "incast_ndp": "80-to-1 incast through the trimming switch, NDP on/off",
    "mica_kv": "MICA-style key-value store, JBSQ vs static core assignment",
    "chain_replication": "3-way chain-replicated writes over a zero-latency switch",
}

SWEEP_FIELD = {
    "sched_hw_vs_timer": "loads",
    "bounded_mpt": "loads_mrps",
    "core_selection": "loads",
    "mica_kv": "loads",
}


def validate(raw: dict) -> dict:
    if not isinstance(raw, dict):
        raise ConfigError("<root>", "config must be a JSON object")
    scenario = raw.get("scenario")
    if scenario is None:
        raise ConfigError("scenario", "missing required field")
    if scenario not in SCENARIO_FIELDS:
        raise ConfigError("scenario", f"unknown scenario {scenario!r}; "
                          f"one of {sorted(SCENARIO_FIELDS)}")
    fields = dict(_COMMON)
    fields.update(SCENARIO_FIELDS[scenario])

    cfg = {}
    for name, (kind, default) in fields.items():
        if name in raw:
            value = raw[name]
            if kind == "float" and isinstance(value, int) and not isinstance(value, bool):
                value = float(value)
            if not _KIND_CHECKS[kind](value):
                raise ConfigError(name, f"expected {kind}, got {value!r}")
            cfg[name] = value
        elif default is not None or name == "scenario":
            cfg[name] = raw.get(name, default)
        else:
            raise ConfigError(name, "missing required field")
    cfg["scenario"] = scenario

    for name in raw:
        if name not in fields:
            raise ConfigError(name, f"unknown field for scenario {scenario!r}")

    if cfg["schema"] != SCHEMA_VERSION:
        raise ConfigError("schema", f"unsupported schema version {cfg['schema']}")
    for name in _POSITIVE_FIELDS:
        if name in cfg and cfg[name] <= 0:
            raise ConfigError(name, "must be positive")
    for (scen, name), allowed in _ENUM_FIELDS.items():
        if scen == scenario:
            for v in cfg[name]:
                if v not in allowed:
                    raise ConfigError(name, f"{v!r} not in {sorted(allowed)}")
    if scenario == "core_selection" and not 0 <= cfg["p_long"] <= 1:
        raise ConfigError("p_long", "must be a probability")
    if scenario == "chain_replication" and not 0 <= cfg["read_frac"] <= 1:
        raise ConfigError("read_frac", "must be a probability")
    return cfg


def preset_config(name: str) -> dict:
    if name not in PRESETS:
        raise ConfigError("preset", f"unknown preset {name!r}; one of {sorted(PRESETS)}")
    return validate({"scenario": name})


def load_config_file(path: str) -> dict:
    with open(path) as f:
        try:
            raw = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigError(path, f"malformed JSON: {e}") from e
    return validate(raw)


def parse_set_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(cfg: dict, pairs: list[str]) -> dict:
    raw = dict(cfg)
    for pair in pairs:
        if "=" not in pair:
            raise ConfigError(pair, "override must look like field=value")
        key, _, value = pair.partition("=")
        raw[key] = parse_set_value(value)
    return validate(raw)
