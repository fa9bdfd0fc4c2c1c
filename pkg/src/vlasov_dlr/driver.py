"""Run configuration, scenario presets, the main time loop, and file output."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np

from . import __version__
from .basis import build_fixed_basis
from .diagnostics import (
    DiagnosticsRecord,
    InvariantBaseline,
    baseline_record,
    csv_header,
    csv_row,
)
from .field import solve_field
from .grids import SpatialGrid, VelocityGrid
from .stabilizer import build_stabilizer
from .state import (
    LowRankState,
    ScenarioParams,
    charge_density,
    initial_state,
    invariants,
    save_snapshot,
)
from .truncation import RankPolicy, step_and_truncate


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending key."""


class BlowUpError(RuntimeError):
    """A diagnostic went non-finite; carries the last good time."""

    def __init__(self, t_last_good: float):
        super().__init__(f"non-finite diagnostics; last good time t={t_last_good!r}")
        self.t_last_good = t_last_good


POLICY_TOKENS = {
    "fixed": "fixed",
    "solution": "solution_error",
    "efield": "electric_energy_error",
    "energy": "total_energy_error",
}


@dataclass(frozen=True)
class SimulationConfig:
    scenario: str = "linear_landau"
    family: str = "landau"
    alpha: float = 1e-2
    k: float = 0.5
    vbar: float = 0.0
    length: float = 4.0 * math.pi
    vmin: float = -6.0
    vmax: float = 6.0
    nx: int = 128
    nv: int = 128
    dt: float = 1e-3
    t_end: float = 50.0
    r: int = 10
    m: int = 3
    policy: str = "fixed"
    theta_schedule: tuple[tuple[float, float], ...] = ((0.0, 1e-9),)
    r_floor: int = 10
    r_max: int | None = None
    sample_every: int = 10
    out_dir: str = "."
    snapshot_times: tuple[float, ...] = ()
    stabilize: bool = True
    seed: int = 0

    def validate(self) -> None:
        if self.dt <= 0:
            raise ConfigError("dt: must be positive")
        if self.t_end <= 0:
            raise ConfigError("t_end: must be positive")
        if self.m < 0 or self.m > 3:
            raise ConfigError("m: must be in 0..3")
        if self.r < max(self.m, 1):
            raise ConfigError(f"r: must be at least max(m, 1) = {max(self.m, 1)}")
        if self.nx < 4 or self.nv < 4:
            raise ConfigError("nx/nv: grids need at least 4 points")
        if self.sample_every < 1:
            raise ConfigError("sample_every: must be >= 1")
        if self.policy not in POLICY_TOKENS:
            raise ConfigError(f"policy: unknown token {self.policy!r}")
        if self.r_floor <= self.m:
            raise ConfigError("r_floor: must exceed m")
        if self.family not in ("landau", "two_stream"):
            raise ConfigError(f"family: unknown token {self.family!r}")


PRESETS: dict[str, dict] = {
    "linear_landau": dict(
        scenario="linear_landau",
        family="landau",
        alpha=1e-2,
        k=0.5,
        length=4.0 * math.pi,
        vmin=-6.0,
        vmax=6.0,
        nx=128,
        nv=128,
        dt=1e-3,
        t_end=50.0,
        r=10,
        m=3,
    ),
    "nonlinear_landau": dict(
        scenario="nonlinear_landau",
        family="landau",
        alpha=0.5,
        k=0.5,
        length=4.0 * math.pi,
        vmin=-6.0,
        vmax=6.0,
        nx=128,
        nv=128,
        dt=1e-3,
        t_end=50.0,
        r=25,
        m=3,
    ),
    "two_stream": dict(
        scenario="two_stream",
        family="two_stream",
        alpha=1e-3,
        k=0.2,
        vbar=2.4,
        length=10.0 * math.pi,
        vmin=-7.0,
        vmax=7.0,
        nx=128,
        nv=128,
        dt=1e-3,
        t_end=50.0,
        r=10,
        m=3,
    ),
}


def parse_theta_schedule(text: str) -> tuple[tuple[float, float], ...]:
    """Parse 't0:x0,t1:x1,...' into a piecewise-constant schedule."""
    segments = []
    for chunk in text.split(","):
        chunk = chunk.strip()
        if not chunk:
            continue
        try:
            t_str, theta_str = chunk.split(":")
            segments.append((float(t_str), float(theta_str)))
        except ValueError as exc:
            raise ConfigError(f"theta_schedule: cannot parse segment {chunk!r}") from exc
    if not segments:
        raise ConfigError("theta_schedule: empty")
    return tuple(segments)


def _parse_bool_free_int(key):
    def parse(text: str):
        try:
            return int(text)
        except ValueError as exc:
            raise ConfigError(f"{key}: expected an integer, got {text!r}") from exc

    return parse


def _parse_float(key):
    def parse(text: str):
        try:
            return float(text)
        except ValueError as exc:
            raise ConfigError(f"{key}: expected a number, got {text!r}") from exc

    return parse


def _parse_snapshot_times(text: str) -> tuple[float, ...]:
    if not text.strip():
        return ()
    try:
        return tuple(float(tok) for tok in text.split(",") if tok.strip())
    except ValueError as exc:
        raise ConfigError(f"snapshot_times: expected comma-separated numbers") from exc


def _parse_bool(key):
    def parse(text: str):
        token = text.strip().lower()
        if token in ("true", "yes", "on", "1"):
            return True
        if token in ("false", "no", "off", "0"):
            return False
        raise ConfigError(f"{key}: expected a boolean, got {text!r}")

    return parse


def _parse_r_max(text: str):
    if text.strip().lower() in ("none", ""):
        return None
    return _parse_bool_free_int("r_max")(text)


_KEY_PARSERS = {
    "scenario": str,
    "family": str,
    "alpha": _parse_float("alpha"),
    "k": _parse_float("k"),
    "vbar": _parse_float("vbar"),
    "length": _parse_float("length"),
    "vmin": _parse_float("vmin"),
    "vmax": _parse_float("vmax"),
    "nx": _parse_bool_free_int("nx"),
    "nv": _parse_bool_free_int("nv"),
    "dt": _parse_float("dt"),
    "t_end": _parse_float("t_end"),
    "r": _parse_bool_free_int("r"),
    "m": _parse_bool_free_int("m"),
    "policy": str,
    "theta": _parse_float("theta"),
    "theta_schedule": parse_theta_schedule,
    "r_floor": _parse_bool_free_int("r_floor"),
    "r_max": _parse_r_max,
    "sample_every": _parse_bool_free_int("sample_every"),
    "out_dir": str,
    "snapshot_times": _parse_snapshot_times,
    "stabilize": _parse_bool("stabilize"),
    "seed": _parse_bool_free_int("seed"),
}


def read_config_file(path: str | Path) -> dict:
    """Flat `key = value` file with # comments; unknown keys are rejected."""
    raw: dict = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
        key, value = (part.strip() for part in stripped.split("=", 1))
        if key not in _KEY_PARSERS:
            raise ConfigError(f"{key}: unknown configuration key")
        raw[key] = _KEY_PARSERS[key](value)
    return raw


def parse_config(
    preset: str | None = None,
    config_file: str | Path | None = None,
    overrides: dict | None = None,
) -> SimulationConfig:
    """Resolve preset defaults, file values, and explicit overrides (in that
    order of increasing precedence)."""
    values: dict = {}
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(
                f"preset: unknown name {preset!r} (choose from {sorted(PRESETS)})"
            )
        values.update(PRESETS[preset])
    if config_file is not None:
        values.update(read_config_file(config_file))
    if overrides:
        known = set(_KEY_PARSERS)
        for key in overrides:
            if key not in known:
                raise ConfigError(f"{key}: unknown configuration key")
        values.update({k: v for k, v in overrides.items() if v is not None})
    if "theta" in values:
        theta = values.pop("theta")
        if theta is not None:
            values["theta_schedule"] = ((0.0, float(theta)),)
    if values.get("scenario") == "custom" and "family" not in values:
        raise ConfigError("family: required for the custom scenario")
    valid_fields = {f.name for f in fields(SimulationConfig)}
    unknown = set(values) - valid_fields
    if unknown:
        raise ConfigError(f"{sorted(unknown)[0]}: unknown configuration key")
    cfg = SimulationConfig(**values)
    cfg.validate()
    return cfg


@dataclass
class RunResult:
    status: int
    message: str
    csv_path: Path | None
    manifest_path: Path | None
    records: list[DiagnosticsRecord]
    final_state: LowRankState | None
    background: float
    saturated_steps: int
    wall_seconds: float


def make_policy(config: SimulationConfig) -> RankPolicy:
    return RankPolicy(
        kind=POLICY_TOKENS[config.policy],
        theta_schedule=config.theta_schedule,
        r_fixed=config.r,
        r_floor=config.r_floor,
        r_max=config.r_max,
    )


def _manifest_text(
    config: SimulationConfig,
    background: float,
    status: int,
    message: str,
    records: list[DiagnosticsRecord],
    saturated: int,
    wall: float,
) -> str:
    lines = [f"vlasov-dlr {__version__}", f"status = {status} ({message})"]
    for f in fields(SimulationConfig):
        value = getattr(config, f.name)
        if f.name == "theta_schedule":
            value = ",".join(f"{t}:{th}" for t, th in value)
        elif f.name == "snapshot_times":
            value = ",".join(str(t) for t in value)
        lines.append(f"{f.name} = {value}")
    lines.append(f"background = {background!r}")
    lines.append(f"saturated_steps = {saturated}")
    lines.append(f"wall_seconds = {wall:.3f}")
    if records:
        last = records[-1]
        lines.append(f"final_t = {last.t!r}")
        lines.append(f"final_mass_rel_err = {last.mass_rel_err!r}")
        lines.append(f"final_momentum_abs_err = {last.momentum_abs_err!r}")
        lines.append(f"final_energy_rel_err = {last.energy_rel_err!r}")
        lines.append(f"final_rank = {last.rank}")
    return "\n".join(lines) + "\n"


def run(config: SimulationConfig) -> RunResult:
    """Execute the configured simulation and write diagnostics.csv + manifest.txt.

    Returns status 0 on success, 1 on numerical blow-up (partial CSV kept).
    Deterministic: no randomness anywhere in the loop.
    """
    config.validate()
    t_start = time.perf_counter()
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / "diagnostics.csv"
    manifest_path = out_dir / "manifest.txt"

    xgrid = SpatialGrid(nx=config.nx, length=config.length)
    vgrid = VelocityGrid(nv=config.nv, vmin=config.vmin, vmax=config.vmax)
    basis = build_fixed_basis(vgrid, config.m)
    params = ScenarioParams(
        family=config.family, alpha=config.alpha, k=config.k, vbar=config.vbar
    )
    state = initial_state(params, config.r, basis, xgrid, vgrid)
    policy = make_policy(config)
    stabilizer = (
        build_stabilizer(xgrid, vgrid, config.dt, config.t_end)
        if config.stabilize
        else None
    )

    rho0 = charge_density(state)
    background = float(np.mean(rho0))
    enforce = config.m >= 1
    field0 = solve_field(xgrid, rho0, background, enforce_neutrality=enforce)
    totals0 = invariants(state, field0.E)
    baseline = InvariantBaseline(*totals0)

    n_steps = int(round(config.t_end / config.dt))
    snapshot_steps = {
        min(max(int(round(t / config.dt)), 0), n_steps): t for t in config.snapshot_times
    }

    records = [baseline_record(state, field0.E, baseline)]
    saturated = 0
    status, message = 0, "completed"
    with open(csv_path, "w") as handle:
        handle.write(csv_header() + "\n")
        handle.write(csv_row(records[0]) + "\n")
        if 0 in snapshot_steps:
            save_snapshot(state, out_dir / f"snapshot_t{state.t:g}.csv")
        try:
            for n in range(n_steps):
                is_sample = ((n + 1) % config.sample_every == 0) or (n + 1 == n_steps)
                result = step_and_truncate(
                    state,
                    policy,
                    config.dt,
                    background=background,
                    enforce_neutrality=enforce,
                    baseline=baseline,
                    with_record=is_sample,
                    t_next=(n + 1) * config.dt,
                    stabilizer=stabilizer,
                )
                state = result.state
                saturated += int(result.saturated)
                if result.record is not None:
                    if not result.record.is_finite():
                        raise BlowUpError(records[-1].t)
                    records.append(result.record)
                    handle.write(csv_row(result.record) + "\n")
                if (n + 1) in snapshot_steps:
                    save_snapshot(state, out_dir / f"snapshot_t{state.t:g}.csv")
        except BlowUpError as exc:
            status, message = 1, str(exc)

    wall = time.perf_counter() - t_start
    manifest_path.write_text(
        _manifest_text(config, background, status, message, records, saturated, wall)
    )
    return RunResult(
        status=status,
        message=message,
        csv_path=csv_path,
        manifest_path=manifest_path,
        records=records,
        final_state=state if status == 0 else None,
        background=background,
        saturated_steps=saturated,
        wall_seconds=wall,
    )
