"""Scenario configuration: TOML parsing, validation and canonical serialization.

Every key is documented in README.md.  Units: lengths in m, times in s,
velocities in m/s, densities normalized to [0, 1].
"""

import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import tomli_w

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .errors import ConfigError

INITIAL_KINDS = ("constant", "box", "bumps")
OBJECTIVE_KINDS = ("evacuation", "variance", "blend")
SPEED_LAWS = ("linear", "smooth_bump")
SOLVERS = ("direct", "cg")
SNAPSHOT_FORMATS = ("txt", "vtk")


@dataclass
class Door:
    side: str = "right"
    start: float = 0.0
    end: float = 1.0


@dataclass
class Geometry:
    lx: float = 4.0
    ly: float = 4.0
    nx: int = 16
    ny: int = 16
    doors: list = field(default_factory=lambda: [Door("right", 0.0, 4.0)])
    sealed_doors: bool = False


@dataclass
class Physics:
    eps: float = 0.02
    delta1: float = 0.5
    delta2: float = 0.2
    eta_out: float = 1.0
    speed_law: str = "linear"
    eps_h: float = 0.1


@dataclass
class Kernel:
    intensity: float = 1.0
    radius: float = 1.0


@dataclass
class Agents:
    positions: list = field(default_factory=list)
    controls: list = field(default_factory=list)
    controls_file: str = ""


@dataclass
class Time:
    T: float = 2.0
    n_steps: int = 40


@dataclass
class InitialDensity:
    kind: str = "constant"
    value: float = 0.0
    box: list = field(default_factory=lambda: [0.0, 0.0, 0.0, 0.0])
    centers: list = field(default_factory=list)
    radii: list = field(default_factory=list)
    amplitudes: list = field(default_factory=list)


@dataclass
class Objective:
    kind: str = "evacuation"
    c1: float = 1.0
    c2: float = 1.0
    alpha: float = 0.1
    blend: list = field(default_factory=lambda: [1.0, 1.0])
    mass_floor: float = 1e-10


@dataclass
class Optimizer:
    max_iters: int = 50
    armijo_c: float = 1e-4
    backtrack: float = 0.5
    initial_step: float = 1.0
    tol: float = 1e-4
    min_step: float = 1e-10
    growth: float = 2.0


@dataclass
class Numerics:
    linear_solver: str = "direct"
    tol: float = 1e-10


@dataclass
class Output:
    snapshot_every: int = 0
    snapshot_format: str = "txt"


@dataclass
class ScenarioConfig:
    geometry: Geometry = field(default_factory=Geometry)
    physics: Physics = field(default_factory=Physics)
    kernel: Kernel = field(default_factory=Kernel)
    agents: Agents = field(default_factory=Agents)
    time: Time = field(default_factory=Time)
    initial_density: InitialDensity = field(default_factory=InitialDensity)
    objective: Objective = field(default_factory=Objective)
    optimizer: Optimizer = field(default_factory=Optimizer)
    numerics: Numerics = field(default_factory=Numerics)
    output: Output = field(default_factory=Output)
    seed: int = 0

    @property
    def dt(self):
        return self.time.T / self.time.n_steps

    @property
    def n_agents(self):
        return len(self.agents.positions)


_SECTIONS = {
    "geometry": Geometry,
    "physics": Physics,
    "kernel": Kernel,
    "agents": Agents,
    "time": Time,
    "initial_density": InitialDensity,
    "objective": Objective,
    "optimizer": Optimizer,
    "numerics": Numerics,
    "output": Output,
}


def _is_number(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)


def _coerce(path, value, default, errors):
    """Coerce a TOML value to the type of the dataclass default."""
    if isinstance(default, bool):
        if isinstance(value, bool):
            return value
        errors.append(f"{path}: expected true or false, got {value!r}")
        return default
    elif isinstance(default, int):
        if isinstance(value, int) and not isinstance(value, bool):
            return value
        errors.append(f"{path}: expected an integer, got {value!r}")
        return default
    elif isinstance(default, float):
        if _is_number(value):
            return float(value)
        errors.append(f"{path}: expected a finite number, got {value!r}")
        return default
    elif isinstance(default, str):
        if isinstance(value, str):
            return value
        errors.append(f"{path}: expected a string, got {value!r}")
        return default
    elif isinstance(default, list):
        if isinstance(value, list):
            return value
        errors.append(f"{path}: expected an array, got {value!r}")
        return default
    errors.append(f"{path}: unsupported value {value!r}")
    return default


def _build_section(name, cls, raw, errors):
    obj = cls()
    if not isinstance(raw, dict):
        errors.append(f"{name}: expected a table")
        return obj
    names = {f.name for f in dataclasses.fields(cls)}
    for key, value in raw.items():
        path = f"{name}.{key}"
        if key not in names:
            errors.append(f"{path}: unknown key")
            continue
        if name == "geometry" and key == "doors":
            obj.doors = _build_doors(value, errors)
            continue
        setattr(obj, key, _coerce(path, value, getattr(obj, key), errors))
    return obj


def _build_doors(value, errors):
    if not isinstance(value, list):
        errors.append("geometry.doors: expected an array of tables")
        return []
    doors = []
    for k, raw in enumerate(value):
        d = _build_section(f"geometry.doors[{k}]", Door, raw, errors)
        doors.append(d)
    return doors


def from_dict(data):
    """Build and validate a ScenarioConfig; raises ConfigError listing every problem."""
    errors = []
    cfg = ScenarioConfig()
    for key, value in data.items():
        if key == "seed":
            cfg.seed = _coerce("seed", value, 0, errors)
        elif key in _SECTIONS:
            setattr(cfg, key, _build_section(key, _SECTIONS[key], value, errors))
        else:
            errors.append(f"{key}: unknown key")
    errors += validate(cfg, structural_errors=bool(errors))
    if errors:
        raise ConfigError(errors)
    return cfg


def _vectors(path, value, errors):
    try:
        arr = np.asarray(value, dtype=float)
    except (TypeError, ValueError):
        errors.append(f"{path}: expected a list of [x, y] pairs")
        return None
    if arr.size == 0:
        return np.zeros((0, 2))
    if arr.ndim != 2 or arr.shape[1] != 2 or not np.all(np.isfinite(arr)):
        errors.append(f"{path}: expected a list of finite [x, y] pairs")
        return None
    return arr


def validate(cfg, structural_errors=False):
    """Return a list of violated constraints (empty when valid)."""
    errors = []
    g, p, k, t = cfg.geometry, cfg.physics, cfg.kernel, cfg.time

    if g.nx < 2 or g.ny < 2:
        errors.append(f"geometry.nx/ny: need at least 2 cells per direction, got {g.nx}x{g.ny}")
    for name in ("lx", "ly"):
        if not getattr(g, name) > 0:
            errors.append(f"geometry.{name}: must be > 0")
    if not g.doors:
        errors.append("geometry.doors: at least one door is required "
                      "(the exit part of the boundary needs positive length)")
    for name, hint in (
        ("eps", "diffusion"),
        ("delta1", "Eikonal viscosity; regularization parameters must be positive"),
        ("delta2", "Eikonal floor; regularization parameters must be positive"),
        ("eta_out", "door outflow velocity"),
    ):
        if not getattr(p, name) > 0:
            errors.append(f"physics.{name}: must be > 0 ({hint}), got {getattr(p, name)}")
    if p.speed_law not in SPEED_LAWS:
        errors.append(f"physics.speed_law: must be one of {SPEED_LAWS}, got {p.speed_law!r}")
    if not 0 < p.eps_h < 0.5:
        errors.append(f"physics.eps_h: must lie in (0, 0.5), got {p.eps_h}")
    if not k.intensity > 0:
        errors.append("kernel.intensity: must be > 0 (kernel must be nonnegative and decreasing)")
    if not k.radius > 0:
        errors.append("kernel.radius: must be > 0")
    if not t.T > 0:
        errors.append("time.T: must be > 0")
    if t.n_steps < 1:
        errors.append("time.n_steps: must be >= 1")

    pos = _vectors("agents.positions", cfg.agents.positions, errors)
    if cfg.agents.controls:
        ctl = _vectors("agents.controls", cfg.agents.controls, errors)
        if ctl is not None and pos is not None:
            if ctl.shape[0] != pos.shape[0]:
                errors.append("agents.controls: need one control per agent")
            elif ctl.size and np.max(np.linalg.norm(ctl, axis=1)) > 1.0 + 1e-12:
                errors.append("agents.controls: controls must satisfy |u_i| <= 1")
    if cfg.agents.controls_file and cfg.agents.controls:
        errors.append("agents: give either controls or controls_file, not both")

    o = cfg.objective
    if o.kind not in OBJECTIVE_KINDS:
        errors.append(f"objective.kind: must be one of {OBJECTIVE_KINDS}, got {o.kind!r}")
    if not o.alpha > 0:
        errors.append(f"objective.alpha: control regularization must be > 0, got {o.alpha}")
    for name in ("c1", "c2"):
        if getattr(o, name) < 0:
            errors.append(f"objective.{name}: must be >= 0")
    if len(o.blend) != 2 or not all(_is_number(b) and b >= 0 for b in o.blend):
        errors.append("objective.blend: expected two nonnegative weights [evacuation, variance]")
    if not o.mass_floor > 0:
        errors.append("objective.mass_floor: must be > 0")

    op = cfg.optimizer
    if op.max_iters < 1:
        errors.append("optimizer.max_iters: must be >= 1")
    if not 0 < op.armijo_c < 1:
        errors.append("optimizer.armijo_c: must lie in (0, 1)")
    if not 0 < op.backtrack < 1:
        errors.append("optimizer.backtrack: must lie in (0, 1)")
    for name in ("initial_step", "tol", "min_step"):
        if not getattr(op, name) > 0:
            errors.append(f"optimizer.{name}: must be > 0")
    if not op.growth >= 1:
        errors.append("optimizer.growth: must be >= 1")

    if cfg.numerics.linear_solver not in SOLVERS:
        errors.append(f"numerics.linear_solver: must be one of {SOLVERS}")
    if not cfg.numerics.tol > 0:
        errors.append("numerics.tol: must be > 0")
    if cfg.output.snapshot_every < 0:
        errors.append("output.snapshot_every: must be >= 0")
    if cfg.output.snapshot_format not in SNAPSHOT_FORMATS:
        errors.append(f"output.snapshot_format: must be one of {SNAPSHOT_FORMATS}")

    d = cfg.initial_density
    if d.kind not in INITIAL_KINDS:
        errors.append(f"initial_density.kind: must be one of {INITIAL_KINDS}, got {d.kind!r}")
    elif d.kind == "box" and len(d.box) != 4:
        errors.append("initial_density.box: expected [xmin, xmax, ymin, ymax]")
    elif d.kind == "bumps" and not (len(d.centers) == len(d.radii) == len(d.amplitudes)):
        errors.append("initial_density: centers, radii and amplitudes must have equal length")

    if errors or structural_errors:
        return errors

    # checks that need the grid
    from .grid import build_grid

    try:
        grid = build_grid(g.nx, g.ny, g.lx, g.ly, [(dd.side, dd.start, dd.end) for dd in g.doors])
    except ConfigError as exc:
        return errors + exc.errors
    try:
        rho0 = initial_density(cfg, grid)
    except (TypeError, ValueError) as exc:
        return errors + [f"initial_density: {exc}"]
    lo, hi = float(rho0.min()), float(rho0.max())
    if lo < 0.0 or hi > 1.0:
        errors.append(f"initial_density: initial density must satisfy 0 <= rho0 <= 1, "
                      f"got range [{lo:.6g}, {hi:.6g}]")
    from .density import cfl_limit
    from .model import SpeedLaw

    limit = cfl_limit(grid, SpeedLaw(p.speed_law))
    if cfg.dt > limit * (1.0 + 1e-12):
        errors.append(f"time.n_steps: dt = {cfg.dt:.6g} exceeds the advective step limit "
                      f"{limit:.6g}; need n_steps >= {math.ceil(t.T / limit)}")
    return errors


def initial_density(cfg, grid):
    d = cfg.initial_density
    xx, yy = grid.cell_centers()
    if d.kind == "constant":
        return np.full(grid.shape, float(d.value))
    if d.kind == "box":
        x0, x1, y0, y1 = (float(v) for v in d.box)
        inside = (xx >= x0) & (xx <= x1) & (yy >= y0) & (yy <= y1)
        return np.where(inside, float(d.value), 0.0)
    rho = np.zeros(grid.shape)
    for c, r, a in zip(d.centers, d.radii, d.amplitudes):
        t2 = ((xx - float(c[0])) ** 2 + (yy - float(c[1])) ** 2) / float(r) ** 2
        inside = t2 < 1.0
        rho += np.where(inside, float(a) * np.exp(1.0 - 1.0 / np.where(inside, 1.0 - t2, 1.0)), 0.0)
    return rho


def to_dict(cfg):
    return dataclasses.asdict(cfg)


def dumps(cfg):
    """Canonical TOML text, keys in dataclass field order."""
    return tomli_w.dumps(to_dict(cfg))


def loads(text):
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError([f"syntax: {exc}"]) from exc
    return from_dict(data)


def parse_and_validate(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError([f"io: cannot read {path}: {exc}"]) from exc
    cfg = loads(text)
    if cfg.agents.controls_file:
        ctl = Path(cfg.agents.controls_file)
        if not ctl.is_absolute():
            cfg.agents.controls_file = str((path.parent / ctl).resolve())
    return cfg


def replace(cfg, **sections):
    """Copy of ``cfg`` with whole sections or fields swapped, e.g. time=Time(1.0, 20)."""
    new = from_dict(to_dict(cfg))
    for key, value in sections.items():
        setattr(new, key, value)
    return new
