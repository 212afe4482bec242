"""TOML configuration files for the command line.

Sections: ``[system]``, ``[geometry]``, ``[nodes]``, ``[channels]``,
``[channel_means]``, ``[solver]`` and ``[sweep]``; all optional, defaults
are the reference scenario. Power-like fields take either a ``_dbm`` or a
``_watt`` suffix (``P_PT_dbm = 43``, ``sigma2_watt = 5.97e-17``) and are
converted to watts here, once.

When ``[channels]`` gives no gains, they are drawn from ``[channel_means]``
with the run's seed.
"""

from __future__ import annotations

import sys
from dataclasses import fields

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import ConfigError
from .model import ChannelGains, Geometry, Instance, NodeParams, SystemParams, dbm_to_watt
from .montecarlo import ChannelMeans, SweepConfig, trial_channels
from .recovery import SolverSettings

POWER_FIELDS = ("sigma2", "P_PT", "P_AP")
SECTIONS = ("system", "geometry", "nodes", "channels", "channel_means", "solver", "sweep")


def load_config(path):
    """Parse a TOML file into a plain dict; syntax errors keep their line number."""
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return parse_config(data)


def parse_config(data):
    unknown = set(data) - set(SECTIONS)
    if unknown:
        raise ConfigError(f"unknown section(s) {sorted(unknown)}", field=sorted(unknown)[0])
    for name in SECTIONS:
        if name in data and not isinstance(data[name], dict):
            raise ConfigError("expected a table", field=name)
    return {name: dict(data.get(name, {})) for name in SECTIONS}


def _number(section, key, value):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"expected a number, got {value!r}", field=f"{section}.{key}")
    if not np.isfinite(value):
        raise ConfigError("must be finite", field=f"{section}.{key}")
    return float(value)


def _numbers(section, key, value, M):
    """Scalar broadcast to length M, or a list of exactly M numbers."""
    if isinstance(value, list):
        if len(value) != M:
            raise ConfigError(f"expected {M} values, got {len(value)}", field=f"{section}.{key}")
        return np.array([_number(section, key, v) for v in value])
    return np.full(M, _number(section, key, value))


def _check_keys(section, table, allowed):
    extra = set(table) - set(allowed)
    if extra:
        key = sorted(extra)[0]
        raise ConfigError("unknown key", field=f"{section}.{key}")


def system_from_config(cfg, alpha=None):
    table = cfg["system"]
    names = [f.name for f in fields(SystemParams)]
    allowed = [n for n in names if n not in POWER_FIELDS]
    allowed += [f"{p}_{u}" for p in POWER_FIELDS for u in ("dbm", "watt")]
    _check_keys("system", table, allowed)
    kwargs = {}
    for key, value in table.items():
        if key.endswith("_dbm"):
            name = key[:-4]
            if f"{name}_watt" in table:
                raise ConfigError("give either _dbm or _watt, not both", field=f"system.{key}")
            kwargs[name] = dbm_to_watt(_number("system", key, value))
        elif key.endswith("_watt"):
            kwargs[key[:-5]] = _number("system", key, value)
        else:
            kwargs[key] = _number("system", key, value)
    if alpha is not None:
        kwargs["alpha"] = alpha
    try:
        return SystemParams(**kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc), field="system") from exc


def _node_count(cfg, M=None):
    if M is not None:
        return int(M)
    value = cfg["nodes"].get("M", 20)
    if isinstance(value, bool) or not isinstance(value, int) or value < 1:
        raise ConfigError(f"expected a positive integer, got {value!r}", field="nodes.M")
    return value


def nodes_from_config(cfg, M=None, energy=None):
    table = cfg["nodes"]
    _check_keys("nodes", table, ("M", "C", "f", "w", "E"))
    M = _node_count(cfg, M)
    vals = {k: _numbers("nodes", k, table.get(k, d), M)
            for k, d in (("C", 1e4), ("f", 1e10), ("w", 1e-28), ("E", 1.0))}
    if energy is not None:
        vals["E"] = np.full(M, float(energy))
    try:
        return NodeParams(**vals)
    except ValueError as exc:
        raise ConfigError(str(exc), field="nodes") from exc


def geometry_from_config(cfg, M=None, d_pt_ap=None):
    table = cfg["geometry"]
    _check_keys("geometry", table, ("d_pt_pr", "d_pt_ap", "d_ap_pr", "d_iot"))
    M = _node_count(cfg, M)
    d_pt_pr = _number("geometry", "d_pt_pr", table.get("d_pt_pr", 100.0))
    if d_pt_ap is None:
        d_pt_ap = _number("geometry", "d_pt_ap", table.get("d_pt_ap", 50.0))
    d_ap_pr = table.get("d_ap_pr")
    d_ap_pr = d_pt_pr - d_pt_ap if d_ap_pr is None else _number("geometry", "d_ap_pr", d_ap_pr)
    d_iot = _numbers("geometry", "d_iot", table.get("d_iot", 10.0), M)
    try:
        return Geometry(d_pt_pr, d_pt_ap, d_ap_pr, d_iot)
    except ValueError as exc:
        raise ConfigError(str(exc), field="geometry") from exc


def means_from_config(cfg):
    table = cfg["channel_means"]
    _check_keys("channel_means", table, ("pt_pr", "pt_ap", "ap_pr", "iot"))
    kwargs = {k: _number("channel_means", k, v) for k, v in table.items()}
    try:
        return ChannelMeans(**kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc), field="channel_means") from exc


def channels_from_config(cfg, M=None, seed=0):
    table = cfg["channels"]
    keys = ("g_pt_pr", "g_pt_ap", "g_ap_pr", "g_iot")
    _check_keys("channels", table, keys)
    M = _node_count(cfg, M)
    if not table:
        return trial_channels(seed, 0, means_from_config(cfg), M)
    missing = [k for k in keys if k not in table]
    if missing:
        raise ConfigError("missing channel gain", field=f"channels.{missing[0]}")
    try:
        return ChannelGains(
            _number("channels", "g_pt_pr", table["g_pt_pr"]),
            _number("channels", "g_pt_ap", table["g_pt_ap"]),
            _number("channels", "g_ap_pr", table["g_ap_pr"]),
            _numbers("channels", "g_iot", table["g_iot"], M),
        )
    except ValueError as exc:
        raise ConfigError(str(exc), field="channels") from exc


def instance_from_config(cfg, seed=0, M=None):
    return Instance(
        system_from_config(cfg),
        geometry_from_config(cfg, M),
        nodes_from_config(cfg, M),
        channels_from_config(cfg, M, seed),
    )


def settings_from_config(cfg, tolerance=None, max_iterations=None):
    table = cfg["solver"]
    _check_keys("solver", table, ("tolerance", "max_iterations"))
    tol = tolerance if tolerance is not None else table.get("tolerance", 1e-6)
    its = max_iterations if max_iterations is not None else table.get("max_iterations")
    tol = _number("solver", "tolerance", tol)
    if its is not None and (isinstance(its, bool) or not isinstance(its, int)):
        raise ConfigError(f"expected an integer, got {its!r}", field="solver.max_iterations")
    try:
        return SolverSettings(tolerance=tol, max_iterations=its)
    except ValueError as exc:
        raise ConfigError(str(exc), field="solver") from exc


def sweep_from_config(cfg, seed=None, trials=None, tolerance=None, max_iterations=None):
    table = cfg["sweep"]
    _check_keys("sweep", table, ("alpha_grid", "trials", "seed", "placements",
                                 "energy_levels", "baseline"))
    nodes = nodes_from_config(cfg)
    geo = cfg["geometry"]
    settings = settings_from_config(cfg, tolerance, max_iterations)
    trials = table.get("trials", 200) if trials is None else trials
    seed = table.get("seed", 0) if seed is None else seed
    for key, value in (("trials", trials), ("seed", seed)):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"expected an integer, got {value!r}", field=f"sweep.{key}")
    kwargs = dict(
        system=system_from_config(cfg),
        M=nodes.M,
        d_pt_pr=_number("geometry", "d_pt_pr", geo.get("d_pt_pr", 100.0)),
        d_iot=_number("geometry", "d_iot", geo.get("d_iot", 10.0)),
        C=float(nodes.C[0]), f=float(nodes.f[0]), w=float(nodes.w[0]),
        trials=trials, seed=seed,
        channel_means=means_from_config(cfg),
        tolerance=settings.tolerance, max_iterations=settings.max_iterations,
    )
    for key in ("alpha_grid", "placements", "energy_levels"):
        if key in table:
            if not isinstance(table[key], list):
                raise ConfigError("expected a list", field=f"sweep.{key}")
            kwargs[key] = [_number("sweep", key, v) for v in table[key]]
    if "baseline" in table:
        kwargs["baseline"] = bool(table["baseline"])
    if "energy_levels" not in table and "E" in cfg["nodes"]:
        kwargs["energy_levels"] = [float(nodes.E[0])]
    try:
        return SweepConfig(**kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc), field="sweep") from exc
