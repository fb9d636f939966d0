"""Pipeline configuration: one flat key-value file drives every stage.

Format: `key = value` lines, `#` comments, blank lines ignored.  Unknown
keys are rejected so typos fail fast.  Every run re-emits the resolved
configuration into its output manifest.
"""

from __future__ import annotations

from dataclasses import dataclass, field, asdict

from .design import GenConfig
from .model import PhysicalParams
from .solver import SolverConfig, BACKWARD_EULER


class ConfigError(ValueError):
    pass


@dataclass
class PipelineConfig:
    seed: int = 0
    workers: int = 1
    out_dir: str = "out"
    n_designs: int = 10
    branch_count_min: int = 5
    branch_count_max: int = 79
    width_min: int = 1
    width_max: int = 4
    length_min: int = 8
    length_max: int = 120
    j_min: float = 1e7
    j_max: float = 1e9
    dx: float = 1.0
    dt_initial: float = 1e4
    dt_max: float = 1e6
    dt_growth: float = 2.0
    integrator: str = BACKWARD_EULER
    linear_solver_tol: float = 1e-10
    D0: float = 7.8e-5
    Ea: float = 0.86
    B: float = 1e11
    Omega: float = 1.18e-29
    T: float = 373.0
    Zstar: float = 10.0
    rho: float = 2.25e-8
    sigma_T: float = 0.0
    t_metal: float = 0.2
    report_times: list[float] = field(default_factory=lambda: [float(y) for y in range(1, 11)])
    test_fraction: float = 0.15
    split_seed: int = 0

    def gen_config(self) -> GenConfig:
        return GenConfig(rng_seed=self.seed, n_designs=self.n_designs,
                         branch_count_range=(self.branch_count_min, self.branch_count_max),
                         width_range=(self.width_min, self.width_max),
                         segment_length_range=(self.length_min, self.length_max),
                         j_magnitude_range=(self.j_min, self.j_max))

    def solver_config(self) -> SolverConfig:
        return SolverConfig(dx=self.dx, dt_initial=self.dt_initial,
                            dt_max=self.dt_max, dt_growth=self.dt_growth,
                            time_integrator=self.integrator,
                            linear_solver_tol=self.linear_solver_tol)

    def physical_params(self) -> PhysicalParams:
        return PhysicalParams(D0=self.D0, Ea=self.Ea, B=self.B, Omega=self.Omega,
                              T=self.T, Zstar=self.Zstar, rho=self.rho,
                              sigma_T=self.sigma_T, t_metal=self.t_metal)

    def to_text(self) -> str:
        lines = ["# resolved emstress pipeline configuration"]
        for key, val in asdict(self).items():
            if isinstance(val, list):
                val = ",".join(f"{v:g}" for v in val)
            lines.append(f"{key} = {val}")
        return "\n".join(lines) + "\n"


_INT_KEYS = {"seed", "workers", "n_designs", "branch_count_min", "branch_count_max",
             "width_min", "width_max", "length_min", "length_max", "split_seed"}
_STR_KEYS = {"out_dir", "integrator"}
_LIST_KEYS = {"report_times"}


def parse_config_text(text: str, base: PipelineConfig | None = None) -> PipelineConfig:
    cfg = base or PipelineConfig()
    values = asdict(cfg)
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, val = (part.strip() for part in line.split("=", 1))
        if key not in values:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        try:
            if key in _STR_KEYS:
                values[key] = val
            elif key in _LIST_KEYS:
                values[key] = [float(v) for v in val.split(",") if v.strip()]
            elif key in _INT_KEYS:
                values[key] = int(val)
            else:
                values[key] = float(val)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key!r}: {val!r}") from exc
    out = PipelineConfig(**values)
    validate_config(out)
    return out


def load_config(path, base: PipelineConfig | None = None) -> PipelineConfig:
    try:
        with open(path) as f:
            text = f.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config_text(text, base)


def validate_config(cfg: PipelineConfig) -> None:
    if cfg.workers < 1:
        raise ConfigError("workers must be >= 1")
    if cfg.n_designs < 0:
        raise ConfigError("n_designs must be >= 0")
    if not 0 < cfg.test_fraction < 1:
        raise ConfigError("test_fraction must be in (0,1)")
    if sorted(cfg.report_times) != list(cfg.report_times) or \
            len(set(cfg.report_times)) != len(cfg.report_times):
        raise ConfigError("report_times must be strictly increasing")
    if any(t < 0 for t in cfg.report_times):
        raise ConfigError("report_times must be >= 0")
    try:
        cfg.gen_config().validate()
        cfg.solver_config().validate()
        cfg.physical_params().validate()
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
