"""Declarative scenario configuration: a flat, sectioned key=value format.

The format is INI-shaped so the published 3x3 channel matrices can be typed
by hand: gains are listed row-major per channel, other matrices row-major
(user, channel).  Floats are written with 17 significant digits so a
serialized scenario parses back bit-identically.  Unknown sections or keys
are rejected.
"""

from __future__ import annotations

import configparser
import io
import re
from dataclasses import dataclass

import numpy as np

from iwfsim.algorithms import Algorithm, StepSizeSchedule
from iwfsim.experiments import CANNED_SCENARIOS, Scenario, random_weak_network
from iwfsim.network import NetworkModel, PowerProfile
from iwfsim.noise import KINDS as NOISE_KINDS
from iwfsim.noise import NoiseModel


class ConfigError(ValueError):
    """Malformed or inconsistent scenario configuration."""


_NETWORK_KEYS = {"users", "channels", "generator", "seed", "mask",
                 "noise_floors", "budgets", "masks"}
_NOISE_KEYS = {"kind", "ier_db", "variance", "decay_exponent", "scale", "seed"}
_ALGO_KEYS = {"list"}
_RUN_KEYS = {"name", "max_iters", "tolerance", "window", "start", "reference",
             "decimation", "seed"}
_OUTPUT_KEYS = {"dir"}
_GAIN_KEY = re.compile(r"^gains_channel_(\d+)$")


@dataclass
class RunSettings:
    """Detector and storage settings carried next to a scenario."""

    tolerance: float = 1e-6
    window: int | None = None
    decimation: int = 1


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _fmt_row(values) -> str:
    return " ".join(_fmt(v) for v in np.asarray(values, dtype=float).ravel())


def _parse_floats(text: str, expected: int, label: str) -> np.ndarray:
    try:
        values = np.array([float(tok) for tok in text.split()])
    except ValueError as exc:
        raise ConfigError(f"{label}: {exc}") from None
    if values.size != expected:
        raise ConfigError(f"{label}: expected {expected} values, got {values.size}")
    return values


def parse_algorithm(spec: str) -> Algorithm:
    """Parse one algorithm spec: ``iwf``, ``riwf(lambda=0.4)``,
    ``aiwf(schedule=harmonic)`` or
    ``aiwf(schedule=power_decay, gamma=0.8, scale=1, offset=1)``."""
    spec = spec.strip()
    m = re.fullmatch(r"(\w+)\s*(?:\((.*)\))?", spec)
    if not m:
        raise ConfigError(f"cannot parse algorithm spec {spec!r}")
    name, argtext = m.group(1), m.group(2) or ""
    args = {}
    for piece in filter(None, (p.strip() for p in argtext.split(","))):
        if "=" not in piece:
            raise ConfigError(f"algorithm argument {piece!r} must look like key=value")
        key, val = (s.strip() for s in piece.split("=", 1))
        args[key] = val
    if name == "iwf":
        if args:
            raise ConfigError("iwf takes no arguments")
        return Algorithm.iwf()
    if name == "riwf":
        unknown = set(args) - {"lambda"}
        if unknown:
            raise ConfigError(f"unknown riwf arguments: {sorted(unknown)}")
        try:
            return Algorithm.riwf(float(args.get("lambda", 0.5)))
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    if name == "aiwf":
        unknown = set(args) - {"schedule", "gamma", "scale", "offset"}
        if unknown:
            raise ConfigError(f"unknown aiwf arguments: {sorted(unknown)}")
        kind = args.get("schedule", "harmonic")
        try:
            if kind == "harmonic":
                schedule = StepSizeSchedule.harmonic()
            elif kind == "power_decay":
                schedule = StepSizeSchedule.power_decay(
                    gamma=float(args.get("gamma", 0.75)),
                    scale=float(args.get("scale", 1.0)),
                    offset=float(args.get("offset", 1.0)),
                )
            else:
                raise ConfigError(f"unknown schedule {kind!r} for aiwf")
            return Algorithm.aiwf(schedule)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    raise ConfigError(f"unknown algorithm tag {name!r}")


def algorithm_to_spec(algo: Algorithm) -> str:
    if algo.kind == "iwf":
        return "iwf"
    if algo.kind == "riwf":
        return f"riwf(lambda={_fmt(algo.lam)})"
    sched = algo.schedule
    if sched.kind == "harmonic":
        return "aiwf(schedule=harmonic)"
    return (
        f"aiwf(schedule=power_decay, gamma={_fmt(sched.gamma)}, "
        f"scale={_fmt(sched.scale)}, offset={_fmt(sched.offset)})"
    )


def _check_keys(section: str, present, allowed) -> None:
    unknown = set(present) - allowed
    if unknown:
        raise ConfigError(f"unknown keys in [{section}]: {sorted(unknown)}")


def _parse_network(cp: configparser.ConfigParser) -> NetworkModel:
    if not cp.has_section("network"):
        raise ConfigError("missing [network] section")
    sec = cp["network"]
    keys = set(sec.keys())
    gain_keys = {k for k in keys if _GAIN_KEY.match(k)}
    _check_keys("network", keys - gain_keys, _NETWORK_KEYS)
    try:
        n = int(sec["users"])
        k = int(sec["channels"])
    except KeyError as exc:
        raise ConfigError(f"[network] missing key {exc}") from None
    except ValueError as exc:
        raise ConfigError(f"[network]: {exc}") from None
    if sec.get("generator"):
        if sec["generator"] != "random_weak":
            raise ConfigError(f"unknown network generator {sec['generator']!r}")
        if gain_keys or "noise_floors" in keys or "budgets" in keys or "masks" in keys:
            raise ConfigError("generator networks must not list inline gains")
        seed = int(sec.get("seed", "0"))
        mask = float(sec.get("mask", "inf"))
        return random_weak_network(n, k, seed=seed, power_mask=mask)
    stray = {"seed", "mask"} & keys
    if stray:
        raise ConfigError(f"keys {sorted(stray)} are only valid with a generator network")
    expected = {f"gains_channel_{c + 1}" for c in range(k)}
    if gain_keys != expected:
        raise ConfigError(
            f"expected gain keys {sorted(expected)}, got {sorted(gain_keys)}"
        )
    gain = np.empty((n, n, k))
    for c in range(k):
        gain[:, :, c] = _parse_floats(
            sec[f"gains_channel_{c + 1}"], n * n, f"gains_channel_{c + 1}"
        ).reshape(n, n)
    if "noise_floors" not in keys or "budgets" not in keys:
        raise ConfigError("[network] requires noise_floors and budgets")
    noise_floor = _parse_floats(sec["noise_floors"], n * k, "noise_floors").reshape(n, k)
    budgets = _parse_floats(sec["budgets"], n, "budgets")
    mask_text = sec.get("masks", "inf").split()
    if len(mask_text) == 1:
        masks = np.full((n, k), float(mask_text[0]))
    else:
        masks = _parse_floats(sec["masks"], n * k, "masks").reshape(n, k)
    try:
        return NetworkModel(
            gain=gain, noise_floor=noise_floor, power_budget=budgets, power_mask=masks
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _parse_noise(cp: configparser.ConfigParser, n: int, k: int) -> NoiseModel:
    if not cp.has_section("noise"):
        return NoiseModel(kind="none")
    sec = cp["noise"]
    _check_keys("noise", sec.keys(), _NOISE_KEYS)
    kind = sec.get("kind", "none")
    if kind not in NOISE_KINDS:
        raise ConfigError(f"unknown noise kind {kind!r}")
    kwargs = {"kind": kind, "seed": int(sec.get("seed", "0"))}
    if "ier_db" in sec:
        kwargs["ier_db"] = float(sec["ier_db"])
    if "variance" in sec:
        tokens = sec["variance"].split()
        if len(tokens) == 1:
            kwargs["variance"] = np.full((n, k), float(tokens[0]))
        else:
            kwargs["variance"] = _parse_floats(sec["variance"], n * k, "variance").reshape(n, k)
    if "decay_exponent" in sec:
        kwargs["decay_exponent"] = float(sec["decay_exponent"])
    if "scale" in sec:
        kwargs["scale"] = float(sec["scale"])
    try:
        return NoiseModel(**kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _parse_profile(text: str, n: int, k: int, label: str) -> PowerProfile | None:
    text = text.strip()
    if text in ("default", "none", ""):
        return None
    return PowerProfile(_parse_floats(text, n * k, label).reshape(n, k))


def parse_config(text: str) -> tuple[Scenario, RunSettings, str | None]:
    """Parse a scenario config document.

    Returns the scenario, the run settings, and the configured output
    directory (None when unset).
    """
    cp = configparser.ConfigParser(
        interpolation=None, inline_comment_prefixes=(";", "#")
    )
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    known_sections = {"network", "noise", "algorithms", "run", "output"}
    unknown = set(cp.sections()) - known_sections
    if unknown:
        raise ConfigError(f"unknown sections: {sorted(unknown)}")

    network = _parse_network(cp)
    n, k = network.num_users, network.num_channels
    noise = _parse_noise(cp, n, k)

    algorithms: tuple[Algorithm, ...] = (Algorithm.iwf(),)
    if cp.has_section("algorithms"):
        _check_keys("algorithms", cp["algorithms"].keys(), _ALGO_KEYS)
        listed = cp["algorithms"].get("list", "iwf")
        specs = _split_algo_list(listed)
        algorithms = tuple(parse_algorithm(s) for s in specs)

    name = "scenario"
    max_iters = 5000
    seed = noise.seed
    start = reference = None
    settings = RunSettings()
    if cp.has_section("run"):
        sec = cp["run"]
        _check_keys("run", sec.keys(), _RUN_KEYS)
        name = sec.get("name", name)
        max_iters = int(sec.get("max_iters", str(max_iters)))
        seed = int(sec.get("seed", str(seed)))
        start = _parse_profile(sec.get("start", "default"), n, k, "start")
        reference = _parse_profile(sec.get("reference", "none"), n, k, "reference")
        settings.tolerance = float(sec.get("tolerance", str(settings.tolerance)))
        if sec.get("window"):
            settings.window = int(sec["window"])
        settings.decimation = int(sec.get("decimation", "1"))

    out_dir = None
    if cp.has_section("output"):
        _check_keys("output", cp["output"].keys(), _OUTPUT_KEYS)
        out_dir = cp["output"].get("dir") or None

    scenario = Scenario(
        name=name,
        network=network,
        noise=noise,
        algorithms=algorithms,
        max_iters=max_iters,
        seed=seed,
        start=start,
        reference=reference,
    )
    return scenario, settings, out_dir


def _split_algo_list(text: str) -> list[str]:
    """Split on commas that are not inside parentheses."""
    parts, depth, cur = [], 0, []
    for ch in text:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        if ch == "," and depth == 0:
            parts.append("".join(cur))
            cur = []
        else:
            cur.append(ch)
    parts.append("".join(cur))
    return [p.strip() for p in parts if p.strip()]


def scenario_to_config(
    scenario: Scenario, settings: RunSettings | None = None, out_dir: str | None = None
) -> str:
    """Serialize a scenario (network inline) to config text."""
    settings = settings or RunSettings()
    net = scenario.network
    n, k = net.num_users, net.num_channels
    buf = io.StringIO()
    buf.write("[network]\n")
    buf.write(f"users = {n}\n")
    buf.write(f"channels = {k}\n")
    for c in range(k):
        buf.write(f"gains_channel_{c + 1} = {_fmt_row(net.gain[:, :, c])}\n")
    buf.write(f"noise_floors = {_fmt_row(net.noise_floor)}\n")
    buf.write(f"budgets = {_fmt_row(net.power_budget)}\n")
    mask = net.power_mask
    if np.all(mask == mask.flat[0]):
        buf.write(f"masks = {_fmt(mask.flat[0])}\n")
    else:
        buf.write(f"masks = {_fmt_row(mask)}\n")

    noise = scenario.noise
    buf.write("\n[noise]\n")
    buf.write(f"kind = {noise.kind}\n")
    if noise.ier_db is not None:
        buf.write(f"ier_db = {_fmt(noise.ier_db)}\n")
    if noise.variance is not None:
        buf.write(f"variance = {_fmt_row(noise.variance)}\n")
    if noise.decay_exponent is not None:
        buf.write(f"decay_exponent = {_fmt(noise.decay_exponent)}\n")
    if noise.kind in ("diminishing", "summable"):
        buf.write(f"scale = {_fmt(noise.scale)}\n")
    buf.write(f"seed = {noise.seed}\n")

    buf.write("\n[algorithms]\n")
    buf.write("list = " + ", ".join(algorithm_to_spec(a) for a in scenario.algorithms) + "\n")

    buf.write("\n[run]\n")
    buf.write(f"name = {scenario.name}\n")
    buf.write(f"max_iters = {scenario.max_iters}\n")
    buf.write(f"seed = {scenario.seed}\n")
    if scenario.start is not None:
        buf.write(f"start = {_fmt_row(scenario.start.values)}\n")
    if scenario.reference is not None:
        buf.write(f"reference = {_fmt_row(scenario.reference.values)}\n")
    buf.write(f"tolerance = {_fmt(settings.tolerance)}\n")
    if settings.window is not None:
        buf.write(f"window = {settings.window}\n")
    buf.write(f"decimation = {settings.decimation}\n")

    if out_dir:
        buf.write("\n[output]\n")
        buf.write(f"dir = {out_dir}\n")
    return buf.getvalue()


# The averaged iteration approaches its limit sublinearly on the strong
# scenarios, so their canned detector tolerance is looser than the default.
CANNED_SETTINGS = {
    "strong-a": RunSettings(tolerance=1e-5),
    "strong-b": RunSettings(tolerance=1e-5),
}


def load_scenario(name_or_path: str) -> tuple[Scenario, RunSettings, str | None]:
    """Resolve a canned scenario name or read a config file."""
    if name_or_path in CANNED_SCENARIOS:
        settings = CANNED_SETTINGS.get(name_or_path, RunSettings())
        return CANNED_SCENARIOS[name_or_path](), settings, None
    try:
        with open(name_or_path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(
            f"{name_or_path!r} is neither a canned scenario "
            f"({', '.join(sorted(CANNED_SCENARIOS))}) nor a readable config file: {exc}"
        ) from None
    return parse_config(text)
