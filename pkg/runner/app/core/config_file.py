"""
Run configuration: a flat key=value text format.

    # comment
    params.lambda = 2
    packet.p = 1
    run.seed = 7

One pair per line, `#` starts a comment, keys are namespaced by section.
Unknown keys are errors; missing keys take the defaults declared on the
section models below. Values are coerced by pydantic; a coercion failure
is reported as a ParseError on the offending line.
"""

import logging
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Dict, Optional, Tuple, Type, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from qfilter.errors import InvalidParameter, ParseError, UnknownKey
from qfilter.grid_sse import GridSpec
from qfilter.posterior import PhysParams, make_params

logger = logging.getLogger(__name__)

_SECTION_CONFIG = ConfigDict(extra="forbid", frozen=True, allow_inf_nan=False, populate_by_name=True)

# Short spellings accepted in config files
KEY_ALIASES = {"params.m": "params.mass"}


class ParamsSection(BaseModel):
    model_config = _SECTION_CONFIG

    mass: float = 1.0
    hbar: float = 1.0
    lambda_: float = Field(1.0, alias="lambda")
    dim: int = 1


class PacketSection(BaseModel):
    """Initial minimum-uncertainty packet; q and p apply to every component."""
    model_config = _SECTION_CONFIG

    q: float = 0.0
    p: float = 0.0
    sigma_q2: float = 1.0


class RunSection(BaseModel):
    model_config = _SECTION_CONFIG

    dt: float = 1e-4
    t_end: float = 5.0
    seed: int = 42
    n_traj: int = 1
    workers: Optional[int] = None      # None: QFILTER_WORKERS


class GridSection(BaseModel):
    """Lattice domain; without x_min/x_max the domain is sized automatically."""
    model_config = _SECTION_CONFIG

    x_min: Optional[float] = None
    x_max: Optional[float] = None
    n_points: int = 2048


class OutputsSection(BaseModel):
    model_config = _SECTION_CONFIG

    dir: Optional[str] = None          # None: QFILTER_OUTPUT_DIR
    every: int = 100                   # CSV row stride in steps; the last step is always written
    snapshot_every: int = 0            # grid snapshots every k steps, 0 = off
    emit_w: bool = False               # trajectory: also write the w route


SECTIONS: Dict[str, Type[BaseModel]] = {
    "params": ParamsSection,
    "packet": PacketSection,
    "run": RunSection,
    "grid": GridSection,
    "outputs": OutputsSection,
}


def _section_keys(model: Type[BaseModel]) -> Tuple[str, ...]:
    return tuple(info.alias or name for name, info in model.model_fields.items())


KNOWN_KEYS = {section: _section_keys(model) for section, model in SECTIONS.items()}


@dataclass(frozen=True)
class Config:
    params: PhysParams
    packet: PacketSection
    run: RunSection
    grid_section: GridSection
    outputs: OutputsSection

    @property
    def grid(self) -> Optional[GridSpec]:
        """Explicit lattice, or None when the domain should be sized automatically."""
        if self.grid_section.x_min is None:
            return None
        return GridSpec(self.grid_section.x_min, self.grid_section.x_max, self.grid_section.n_points)

    @property
    def n_steps(self) -> int:
        return int(round(self.run.t_end / self.run.dt))

    def snapshot(self) -> str:
        """Canonical key=value text of every resolved key."""
        lines = []
        sections = {
            "params": {"mass": self.params.m, "hbar": self.params.hbar, "lambda": self.params.lam, "dim": self.params.dim},
            "packet": self.packet.model_dump(),
            "run": self.run.model_dump(),
            "grid": self.grid_section.model_dump(),
            "outputs": self.outputs.model_dump(),
        }
        for section, values in sections.items():
            for key, value in values.items():
                lines.append(f"{section}.{key}={_format(value)}")
        return "\n".join(lines) + "\n"


def _format(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


# =============================================================================
# Parsing
# =============================================================================

def _split_lines(text: str) -> Dict[str, Dict[str, Tuple[str, int]]]:
    """section -> key -> (raw value, line number)"""
    raw: Dict[str, Dict[str, Tuple[str, int]]] = {section: {} for section in SECTIONS}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(lineno, f"expected key=value, got {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        key = KEY_ALIASES.get(key, key)
        section, _, name = key.partition(".")
        if section not in SECTIONS or name not in KNOWN_KEYS[section]:
            raise UnknownKey(key, lineno)
        if not value:
            raise ParseError(lineno, f"empty value for {key}")
        if name in raw[section]:
            raise ParseError(lineno, f"duplicate key {key} (first set on line {raw[section][name][1]})")
        raw[section][name] = (value, lineno)
    return raw


def _build_section(section: str, values: Dict[str, Tuple[str, int]]) -> BaseModel:
    model = SECTIONS[section]
    try:
        return model.model_validate({name: value for name, (value, _) in values.items()})
    except ValidationError as e:
        first = e.errors()[0]
        name = str(first["loc"][0]) if first["loc"] else ""
        lineno = values[name][1] if name in values else 0
        raise ParseError(lineno, f"{section}.{name}: {first['msg']}")


def _validate(packet: PacketSection, run: RunSection, grid: GridSection, outputs: OutputsSection) -> None:
    if not packet.sigma_q2 > 0:
        raise InvalidParameter("packet.sigma_q2", f"must be > 0, got {packet.sigma_q2}")
    if not run.dt > 0:
        raise InvalidParameter("run.dt", f"must be > 0, got {run.dt}")
    if not run.t_end >= 0:
        raise InvalidParameter("run.t_end", f"must be >= 0, got {run.t_end}")
    if run.seed < 0:
        raise InvalidParameter("run.seed", f"must be >= 0, got {run.seed}")
    if run.n_traj < 1:
        raise InvalidParameter("run.n_traj", f"must be >= 1, got {run.n_traj}")
    if run.workers is not None and run.workers < 1:
        raise InvalidParameter("run.workers", f"must be >= 1, got {run.workers}")
    if (grid.x_min is None) != (grid.x_max is None):
        raise InvalidParameter("grid.x_min", "grid.x_min and grid.x_max must be given together")
    if grid.x_min is not None:
        GridSpec(grid.x_min, grid.x_max, grid.n_points)
    if outputs.every < 1:
        raise InvalidParameter("outputs.every", f"must be >= 1, got {outputs.every}")
    if outputs.snapshot_every < 0:
        raise InvalidParameter("outputs.snapshot_every", f"must be >= 0, got {outputs.snapshot_every}")


def parse_config(text: str) -> Config:
    """
    Parse the flat key=value format.

    Raises:
        ParseError: malformed line or value (carries the line number)
        UnknownKey: key outside the documented set
        InvalidParameter: a value outside its domain
    """
    raw = _split_lines(text)
    sections = {section: _build_section(section, values) for section, values in raw.items()}
    params_section: ParamsSection = sections["params"]
    params = make_params(
        m=params_section.mass,
        hbar=params_section.hbar,
        lam=params_section.lambda_,
        dim=params_section.dim,
    )
    _validate(sections["packet"], sections["run"], sections["grid"], sections["outputs"])
    return Config(
        params=params,
        packet=sections["packet"],
        run=sections["run"],
        grid_section=sections["grid"],
        outputs=sections["outputs"],
    )


def load_config(path: Optional[Union[str, Path]]) -> Config:
    """Read and parse a config file; no path means all defaults."""
    if path is None:
        return parse_config("")
    text = Path(path).read_text()
    logger.info(f"Loaded config from {path}")
    return parse_config(text)


def with_seed(config: Config, seed: Optional[int]) -> Config:
    """Replace run.seed (the QFILTER_SEED override); None leaves the config unchanged."""
    if seed is None:
        return config
    if seed < 0:
        raise InvalidParameter("QFILTER_SEED", f"must be >= 0, got {seed}")
    logger.info(f"run.seed overridden by environment: {seed}")
    return replace(config, run=config.run.model_copy(update={"seed": int(seed)}))
