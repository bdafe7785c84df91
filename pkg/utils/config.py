"""
Scenario and sweep configuration

Documents are TOML whose keys are the dotted names below, written either flat
(`grid.n_blocks = 200`) or as tables (`[grid]` then `n_blocks = 200`). A
document with an `[axes]` table is a sweep; every axis maps a key (or several
keys joined with `+`) to the list of values to sweep.
"""
import dataclasses
import itertools
import logging
import re
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from models.results import Tolerance, ToleranceProfile
from models.scenario import (
    GridShape,
    SelectionPolicy,
    SimConfig,
    SweepSpec,
    TopologyKind,
    TopologySpec,
)
from utils.errors import ConfigError, ConfigParseError, ConfigValidationError

logger = logging.getLogger(__name__)

# key -> (section attribute on SimConfig or None, field name, type)
SCENARIO_KEYS = {
    "grid.n_blocks": ("grid", "n_blocks", int),
    "grid.blocks_per_subframe": ("grid", "blocks_per_subframe", int),
    "grid.period_ms": ("grid", "period_ms", float),
    "topology.kind": ("topology", "kind", TopologyKind),
    "topology.n_vehicles": ("topology", "n_vehicles", int),
    "topology.density_per_km": ("topology", "density_per_km", float),
    "topology.road_length_m": ("topology", "road_length_m", float),
    "topology.range_m": ("topology", "range_m", float),
    "topology.edge_margin_m": ("topology", "edge_margin_m", float),
    "protocol.sps_periods": (None, "sps_periods", int),
    "protocol.resel_prob": (None, "resel_prob", float),
    "protocol.policy": (None, "policy", SelectionPolicy),
    "protocol.half_duplex": (None, "half_duplex", bool),
    "run.duration_s": (None, "duration_s", float),
    "run.warmup_s": (None, "warmup_s", float),
    "run.replications": (None, "replications", int),
    "run.master_seed": (None, "master_seed", int),
    "run.location_bins": (None, "location_bins", int),
}

SWEEP_KEYS = {"sweep.max_points": int}

COMPARE_KEYS = {
    "compare.tolerance_abs": ("collision", "absolute"),
    "compare.tolerance_rel": ("collision", "relative"),
    "compare.per_tolerance_abs": ("per", "absolute"),
    "compare.per_tolerance_rel": ("per", "relative"),
    "compare.delay_tolerance_abs_ms": ("delay_ms", "absolute"),
    "compare.delay_tolerance_rel": ("delay_ms", "relative"),
}

AXIS_PREFIX = "axes."


def flatten(document, prefix=""):
    """Nested TOML tables to a flat {dotted key: value} mapping"""
    flat = {}
    for key, value in document.items():
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            flat.update(flatten(value, f"{name}."))
        else:
            flat[name] = value
    return flat


def parse_text(text):
    try:
        return flatten(tomllib.loads(text))
    except tomllib.TOMLDecodeError as exc:
        line = getattr(exc, "lineno", None)
        if line is None:
            match = re.search(r"line (\d+)", str(exc))
            line = int(match.group(1)) if match else None
        raise ConfigParseError(f"cannot parse configuration: {exc}", line=line) from exc


def coerce(key, value, kind):
    """Value of `key` converted to `kind`; raises ConfigError with the key name"""
    if kind is bool:
        if isinstance(value, bool):
            return value
        if isinstance(value, str) and value.lower() in ("true", "false"):
            return value.lower() == "true"
    elif kind is int:
        if isinstance(value, int) and not isinstance(value, bool):
            return value
        if isinstance(value, float) and value.is_integer():
            return int(value)
    elif kind is float:
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            return float(value)
    elif isinstance(kind, type) and issubclass(kind, (TopologyKind, SelectionPolicy)):
        try:
            return kind(value)
        except ValueError:
            allowed = ", ".join(member.value for member in kind)
            raise ConfigError(f"key '{key}': expected one of {allowed}, got {value!r}") from None
    raise ConfigError(f"key '{key}': expected {kind.__name__}, got {value!r}")


def parse_override(assignment):
    """'key=value' from the command line; the value is a TOML scalar or a bare string"""
    key, sep, raw = assignment.partition("=")
    key, raw = key.strip(), raw.strip()
    if not sep or not key:
        raise ConfigParseError(f"override must look like key=value, got {assignment!r}")
    try:
        value = tomllib.loads(f"value = {raw}")["value"]
    except tomllib.TOMLDecodeError:
        value = raw
    return key, value


def config_to_flat(config: SimConfig):
    """SimConfig back to its dotted keys (unset optional values are omitted)"""
    flat = {}
    for key, (section, name, _) in SCENARIO_KEYS.items():
        owner = getattr(config, section) if section else config
        value = getattr(owner, name)
        if value is not None:
            flat[key] = value
    return flat


def build_config(flat, base=None, validate=True):
    """SimConfig from dotted keys layered over `base` (defaults when None)

    With validate=False only key names and value types are checked; sweeps
    validate every point instead, so an axis may supply a required key.
    """
    issues = []
    values = config_to_flat(base) if base is not None else {}
    for key, value in flat.items():
        if key not in SCENARIO_KEYS:
            issues.append(f"unknown key '{key}'")
            continue
        try:
            values[key] = coerce(key, value, SCENARIO_KEYS[key][2])
        except ConfigError as exc:
            issues.append(str(exc))
    if issues:
        raise ConfigValidationError(issues)

    sections = {"grid": {}, "topology": {}, None: {}}
    for key, value in values.items():
        section, name, _ = SCENARIO_KEYS[key]
        sections[section][name] = value
    config = SimConfig(
        grid=GridShape(**sections["grid"]),
        topology=TopologySpec(**sections["topology"]),
        **sections[None],
    )
    problems = config.problems() if validate else []
    if problems:
        raise ConfigValidationError(problems)
    return config


def apply_overrides(config: SimConfig, overrides):
    """Copy of `config` with dotted-key overrides applied and revalidated"""
    return build_config(dict(overrides), base=config)


def _parse_axes(flat, issues):
    axes = []
    for key, values in flat.items():
        names = tuple(name.strip() for name in key[len(AXIS_PREFIX):].split("+"))
        unknown = [name for name in names if name not in SCENARIO_KEYS]
        if unknown:
            issues.extend(f"axis names unknown key '{name}'" for name in unknown)
            continue
        if not isinstance(values, list) or not values:
            issues.append(f"axis '{key}' must list at least one value")
            continue
        converted = []
        for value in values:
            entry = value if len(names) > 1 else [value]
            if not isinstance(entry, list) or len(entry) != len(names):
                issues.append(f"axis '{key}': value {value!r} must have {len(names)} entries")
                break
            try:
                converted.append(tuple(
                    coerce(name, item, SCENARIO_KEYS[name][2]) for name, item in zip(names, entry)
                ))
            except ConfigError as exc:
                issues.append(str(exc))
                break
        else:
            axes.append((names, tuple(converted)))
    return tuple(axes)


def _parse_tolerances(flat, issues):
    defaults = ToleranceProfile()
    profile = {"collision": defaults.collision, "per": defaults.per, "delay_ms": defaults.delay_ms}
    for key, value in flat.items():
        metric, field = COMPARE_KEYS[key]
        try:
            number = coerce(key, value, float)
        except ConfigError as exc:
            issues.append(str(exc))
            continue
        if number < 0:
            issues.append(f"key '{key}' must be >= 0, got {number}")
            continue
        profile[metric] = dataclasses.replace(profile[metric], **{field: number})
    return ToleranceProfile(**profile)


def parse_document(flat, overrides=None):
    """SimConfig, or SweepSpec when the document has axes, sweep or compare keys"""
    scenario, axes, sweep, compare, issues = {}, {}, {}, {}, []
    for key, value in flat.items():
        if key.startswith(AXIS_PREFIX):
            axes[key] = value
        elif key in SWEEP_KEYS:
            sweep[key] = value
        elif key in COMPARE_KEYS:
            compare[key] = value
        else:
            scenario[key] = value
    scenario.update(overrides or {})

    try:
        base = build_config(scenario, validate=not axes)
    except ConfigValidationError as exc:
        issues.extend(exc.issues)
        base = None
    parsed_axes = _parse_axes(axes, issues)
    tolerances = _parse_tolerances(compare, issues)
    max_points = 10_000
    if "sweep.max_points" in sweep:
        try:
            max_points = coerce("sweep.max_points", sweep["sweep.max_points"], int)
        except ConfigError as exc:
            issues.append(str(exc))
    if issues:
        raise ConfigValidationError(issues)

    if not (axes or sweep or compare):
        return base
    spec = SweepSpec(base=base, axes=parsed_axes, max_points=max_points, tolerances=tolerances)
    validate_sweep(spec)
    return spec


def sweep_points(spec: SweepSpec):
    """(point, config) pairs in cartesian order; point is a tuple of (key, value)"""
    value_lists = [values for _, values in spec.axes]
    for combination in itertools.product(*value_lists):
        point = tuple(
            (name, value)
            for (names, _), values in zip(spec.axes, combination)
            for name, value in zip(names, values)
        )
        yield point, apply_overrides(spec.base, dict(point))


def validate_sweep(spec: SweepSpec):
    """Check the point cap and the validity of every point, collecting all issues"""
    if spec.n_points > spec.max_points:
        raise ConfigValidationError(
            [f"sweep has {spec.n_points} points, above sweep.max_points ({spec.max_points})"]
        )
    issues = []
    value_lists = [values for _, values in spec.axes]
    for combination in itertools.product(*value_lists):
        point = {
            name: value
            for (names, _), values in zip(spec.axes, combination)
            for name, value in zip(names, values)
        }
        try:
            apply_overrides(spec.base, point)
        except ConfigValidationError as exc:
            issues.extend(f"point {point}: {issue}" for issue in exc.issues)
    if issues:
        raise ConfigValidationError(issues)
    return spec


def load_config(source, overrides=None):
    """
    Load a scenario or sweep from a path or from TOML text

    Args:
        source: path to a TOML file, or the TOML text itself
        overrides: optional {dotted key: value} applied on top of the file

    Returns:
        SimConfig for a plain scenario, SweepSpec for a sweep document
    """
    if isinstance(source, Path) or (isinstance(source, str) and "\n" not in source
                                    and "=" not in source):
        path = Path(source)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read configuration '{path}': {exc}") from exc
        logger.info("Loading configuration from %s", path)
    else:
        text = source
    return parse_document(parse_text(text), overrides)


def load_sweep(source, overrides=None):
    """Like load_config, but always returns a SweepSpec (one point for a plain scenario)"""
    loaded = load_config(source, overrides)
    if isinstance(loaded, SimConfig):
        return SweepSpec(base=loaded)
    return loaded


def tolerance_with(profile: ToleranceProfile, absolute=None, relative=None):
    """Override the probability tolerances (collision and PER) from the command line"""
    def patch(tolerance: Tolerance):
        return Tolerance(
            absolute=tolerance.absolute if absolute is None else absolute,
            relative=tolerance.relative if relative is None else relative,
        )
    return ToleranceProfile(collision=patch(profile.collision), per=patch(profile.per),
                            delay_ms=profile.delay_ms)
