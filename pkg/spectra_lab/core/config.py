"""
Experiment configuration: YAML text validated by pydantic models
"""
import logging
from pathlib import Path
from typing import Callable, List, Literal, Optional, Tuple, Union

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from spectra_lab.core.exceptions import ConfigError
from spectra_lab.core.models import TaskName, content_hash
from spectra_lab.lattice.grid import GridSpec
from spectra_lab.lattice.potentials import MeasureSpec, PotentialSpec, Region, ZeroPotential

logger = logging.getLogger(__name__)


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


def _increasing(values: List[float], what: str) -> List[float]:
    if any(b <= a for a, b in zip(values, values[1:])):
        raise ValueError(f"{what} must be strictly increasing")
    return values


class GridConfig(_Section):
    lower: List[float]
    upper: List[float]
    nodes: Optional[List[int]] = None
    spacing: Optional[float] = Field(None, gt=0)

    @model_validator(mode="after")
    def _resolution(self) -> "GridConfig":
        if (self.nodes is None) == (self.spacing is None):
            raise ValueError("give exactly one of nodes or spacing")
        return self

    def to_spec(self) -> GridSpec:
        if self.spacing is not None:
            return GridSpec.from_spacing(self.lower, self.upper, self.spacing)
        return GridSpec(tuple(self.lower), tuple(self.upper), tuple(self.nodes))


class KineticConfig(_Section):
    """g(H0) in place of H0: t^s (fractional) or sqrt(t + m^2) - m (relativistic)"""

    kind: Literal["fractional", "relativistic"]
    s: float = Field(0.5, gt=0)
    mass: float = Field(1.0, ge=0)

    def function(self) -> Callable[[np.ndarray], np.ndarray]:
        if self.kind == "fractional":
            s = self.s
            return lambda t: np.power(np.clip(t, 0.0, None), s)
        m = self.mass
        return lambda t: np.sqrt(t + m * m) - m


class OperatorConfig(_Section):
    potential: PotentialSpec = Field(default_factory=ZeroPotential)
    negative: Optional[PotentialSpec] = None
    measures: List[MeasureSpec] = Field(default_factory=list)
    negative_measures: List[MeasureSpec] = Field(default_factory=list)
    kinetic: Optional[KineticConfig] = None
    klmn: Union[Literal["auto"], Tuple[float, float]] = "auto"


class SolverConfig(_Section):
    method: Literal["auto", "dense", "lanczos", "arpack"] = "auto"
    tol: float = Field(1e-8, gt=0)
    dense_budget: Optional[int] = Field(None, gt=0)
    workers: Optional[int] = Field(None, ge=1)


class SpectrumParams(_Section):
    count: int = Field(10, ge=1)


class ProbeParams(_Section):
    radii: List[float] = Field(default_factory=lambda: [6.0, 8.0, 10.0])
    spacing: Optional[float] = Field(None, gt=0)
    dim: Optional[int] = Field(None, ge=1, le=2)
    thresholds: List[float] = Field(default_factory=lambda: [20.0])
    cauchy_tol: float = Field(1e-4, gt=0)
    sublevel_heights: List[float] = Field(default_factory=list)

    @field_validator("radii")
    @classmethod
    def _radii(cls, v: List[float]) -> List[float]:
        if len(v) < 3:
            raise ValueError("≥ 3 radii required")
        if any(r <= 0 for r in v):
            raise ValueError("radii must be positive")
        return _increasing(v, "radii")


class AvSweepParams(_Section):
    """Av over G_n = box minus [-n, n]^d for each n"""

    lam: float = 4.0
    exclusion_radii: List[float] = Field(default_factory=lambda: [5.0, 10.0, 15.0, 20.0])
    beta_tol: float = Field(1e-12, gt=0)


class CapacityParams(_Section):
    regions: List[Region] = Field(default_factory=lambda: [Region(shape="box", lower=[-1.0], upper=[1.0])])


class MolchanovParams(_Section):
    window: float = Field(1.0, gt=0)
    stride: Optional[float] = Field(None, gt=0)
    tail_radii: List[float] = Field(default_factory=lambda: [0.0, 5.0, 10.0, 15.0])


class ThinProfileParams(_Section):
    levels: List[float] = Field(default_factory=lambda: [1.0])
    cube_side: float = Field(1.0, gt=0)
    tail_radii: Optional[List[float]] = None
    ball_radius: float = Field(1.0, gt=0)
    shift: float = Field(1.0, gt=0)


class StrichartzParams(_Section):
    p: float = Field(1.0, gt=0)
    samples: int = Field(50, ge=1)
    bound: float = Field(1.0, gt=0)


class SuperPoincareParams(_Section):
    r_values: List[float] = Field(default_factory=lambda: [float(r) for r in np.logspace(-2, 0, 9)])
    samples: int = Field(100, ge=1)
    times: List[float] = Field(default_factory=lambda: [0.01, 0.1, 1.0])

    @field_validator("r_values")
    @classmethod
    def _positive(cls, v: List[float]) -> List[float]:
        if any(r <= 0 for r in v):
            raise ValueError("r values must be positive")
        return v


class FormBoundParams(_Section):
    C_values: Optional[List[float]] = None


class StabilityParams(_Section):
    thresholds: List[float] = Field(default_factory=lambda: [5.0])


class OutputConfig(_Section):
    dir: str = "out"
    format: List[Literal["csv", "json"]] = Field(default_factory=lambda: ["csv", "json"])


_TASK_SECTIONS = {
    TaskName.SPECTRUM: "spectrum",
    TaskName.PROBE: "probe",
    TaskName.AV_SWEEP: "av_sweep",
    TaskName.CAPACITY: "capacity",
    TaskName.MOLCHANOV: "molchanov",
    TaskName.THIN_PROFILE: "thin_profile",
    TaskName.STRICHARTZ: "strichartz",
    TaskName.SUPER_POINCARE: "super_poincare",
    TaskName.FORM_BOUND: "form_bound",
    TaskName.STABILITY: "stability",
}


class ExperimentConfig(_Section):
    task: TaskName
    seed: int = 0
    grid: GridConfig
    operator: OperatorConfig = Field(default_factory=OperatorConfig)
    solver: SolverConfig = Field(default_factory=SolverConfig)
    output: OutputConfig = Field(default_factory=OutputConfig)

    spectrum: SpectrumParams = Field(default_factory=SpectrumParams)
    probe: ProbeParams = Field(default_factory=ProbeParams)
    av_sweep: AvSweepParams = Field(default_factory=AvSweepParams)
    capacity: CapacityParams = Field(default_factory=CapacityParams)
    molchanov: MolchanovParams = Field(default_factory=MolchanovParams)
    thin_profile: ThinProfileParams = Field(default_factory=ThinProfileParams)
    strichartz: StrichartzParams = Field(default_factory=StrichartzParams)
    super_poincare: SuperPoincareParams = Field(default_factory=SuperPoincareParams)
    form_bound: FormBoundParams = Field(default_factory=FormBoundParams)
    stability: StabilityParams = Field(default_factory=StabilityParams)

    @property
    def params(self) -> BaseModel:
        return getattr(self, _TASK_SECTIONS[self.task])

    def echo(self) -> dict:
        """Config with defaults filled, as written into every report"""
        return self.model_dump(mode="python")

    def digest(self) -> str:
        return content_hash(self.echo())


def _diagnostics(error: ValidationError) -> List[str]:
    lines = []
    for item in error.errors():
        loc = ".".join(str(part) for part in item["loc"]) or "<root>"
        lines.append(f"{loc}: {item['msg']}")
    return lines


def parse_config(text: str, task: Optional[str] = None) -> ExperimentConfig:
    """
    Parse YAML text into a validated ExperimentConfig. `task` (from the
    command line) fills a missing task key and must agree with a present one.
    """
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        where = f"line {mark.line + 1}: " if mark is not None else ""
        raise ConfigError("Config is not valid YAML", [f"{where}{getattr(e, 'problem', None) or e}"]) from e
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError("Config must be a mapping of sections", [f"<root>: got {type(data).__name__}"])

    if task is not None:
        if "task" in data and str(data["task"]) != task:
            raise ConfigError("Task mismatch", [f"task: file says {data['task']!r}, command line says {task!r}"])
        data = {**data, "task": task}

    try:
        config = ExperimentConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigError("Invalid experiment config", _diagnostics(e)) from e
    logger.debug(f"Parsed config for task {config.task.value}")
    return config


def load_config(path: Union[str, Path], task: Optional[str] = None) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ConfigError(f"Cannot read config {path}", [str(e)]) from e
    return parse_config(text, task)
