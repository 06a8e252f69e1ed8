"""Pipeline configuration: one flat ``key = value`` file, overridable by flags.

Lines starting with ``#`` are comments. Tuples are written comma separated,
for example ``coarse_truncations = 150, 80``. Unknown keys are errors.
"""

import dataclasses
from dataclasses import dataclass, fields

from .camera import PRESETS


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class PipelineConfig:
    # field
    length: float = 105.0
    width: float = 68.0
    # feature database
    preset: str = "wc14-base"
    db_size: int = 50000
    seed: int = 0
    sigma: float = 4.0
    line_width: float = 2.0
    # registration
    k: int = 3
    refine: bool = True
    max_iterations: int = 50
    truncation: float = 30.0
    coarse_truncations: tuple = (150.0, 80.0)
    convergence_threshold: float = 1e-4
    damping: float = 0.5
    max_retries: int = 5
    polish_blur: float = 1.0
    optimal_residual: float = 1e-3
    # shots, filters, teams, evaluation
    tau: float = 0.35
    rho: float = 3.0
    zeta: float = 0.3
    n_cls: float = 0.2
    eps_lo: float = 0.01
    eps_hi: float = 0.5
    eps_step: float = 0.01
    sample_frames: int = 20
    q: float = 0.8
    mode: str = "best_q"

    def __post_init__(self):
        if self.preset not in PRESETS:
            raise ConfigError(f"unknown preset {self.preset!r}; choose from {', '.join(PRESETS)}")
        if not (90 <= self.length <= 120 and 45 <= self.width <= 90):
            raise ConfigError("field dimensions outside 90-120 x 45-90 m")
        if self.db_size < 1 or self.k < 1:
            raise ConfigError("db_size and k must be positive")
        if self.tau < 0 or self.rho < 0:
            raise ConfigError("tau and rho must be non-negative")
        if not 0 <= self.zeta < 1:
            raise ConfigError("zeta must lie in [0, 1)")
        if not 0 <= self.n_cls <= 0.5:
            raise ConfigError("n_cls must lie in [0, 0.5]")
        if not 0 < self.q <= 1:
            raise ConfigError("q must lie in (0, 1]")
        if self.mode not in ("mean", "median", "best_q"):
            raise ConfigError(f"unknown aggregation mode {self.mode!r}")
        if not 0 < self.eps_lo <= self.eps_hi or self.eps_step <= 0:
            raise ConfigError("bad epsilon grid")

    def override(self, **values):
        """Copy with every non-None value replaced."""
        return dataclasses.replace(self, **{k: v for k, v in values.items() if v is not None})


def _coerce(name, typ, text):
    text = text.strip()
    try:
        if typ is bool:
            if text.lower() not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(text)
            return text.lower() in ("true", "1", "yes")
        if typ is tuple:
            return tuple(float(t) for t in text.split(",") if t.strip())
        return typ(text)
    except ValueError as e:
        raise ConfigError(f"bad value for {name}: {text!r}") from e


def parse_config(text, base=PipelineConfig()):
    types = {f.name: type(f.default) for f in fields(PipelineConfig)}
    values = {}
    for n, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {n}: expected key = value")
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in types:
            raise ConfigError(f"line {n}: unknown key {key!r}")
        values[key] = _coerce(key, types[key], val)
    return dataclasses.replace(base, **values)


def load_config(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return parse_config(fh.read())
    except OSError as e:
        raise ConfigError(f"{path}: {e.strerror}") from e


def dump_config(cfg):
    lines = []
    for f in fields(cfg):
        v = getattr(cfg, f.name)
        if isinstance(v, tuple):
            v = ", ".join(repr(x) for x in v)
        elif isinstance(v, bool):
            v = "true" if v else "false"
        lines.append(f"{f.name} = {v}")
    return "\n".join(lines) + "\n"
