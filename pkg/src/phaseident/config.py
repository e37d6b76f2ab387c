"""Run configuration: a flat key=value document mapped onto a dataclass.

Unknown keys are rejected so config typos fail loudly.  The canonical text
rendering doubles as the config echo embedded in reports and as the input
to the config hash.
"""

from __future__ import annotations

import dataclasses
import hashlib
from dataclasses import dataclass


@dataclass
class RunConfig:
    input: str = ""                  # scenario name or grid file path
    noise_percent: float = 0.0
    seed: int = 0
    nx: int = 0                      # 0 keeps the scenario grid
    nt: int = 0
    downsample_x: int = 0            # 0 keeps the scenario setting
    n_p: int = 19
    beta: float = 10.0
    r_threshold: float = 5.0
    k_max: int = 8
    trim_threshold: float = 0.05
    m0: int = -1                     # -1 derives m0 from the patch height
    reg: float = 2.0
    n_basis: int = 26
    lam: float = 0.1
    levels: tuple = (0.8,)
    trials: int = 1
    denoise_window: int = 0          # 0 picks a window from the noise level
    denoise_window_t: int = -1       # -1 mirrors denoise_window, 0 disables
    denoise_order: int = 2           # polynomial order of the smoothing fit
    denoise_passes: int = 1
    output_dir: str = ""

    def validate(self) -> "RunConfig":
        if not self.input:
            raise ValueError("config requires an input scenario or file")
        if self.noise_percent < 0:
            raise ValueError("noise_percent must be nonnegative")
        if self.n_p < 1 or self.k_max < 1 or self.n_basis < 4:
            raise ValueError("n_p, k_max must be >= 1 and n_basis >= 4")
        if self.lam < 0 or self.reg <= 0:
            raise ValueError("lam must be >= 0 and reg > 0")
        if not all(0 < p < 1 for p in self.levels):
            raise ValueError("confidence levels must lie in (0, 1)")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.denoise_window not in (0, 1) and (
                self.denoise_window < 5 or self.denoise_window % 2 == 0):
            raise ValueError("denoise_window must be 0 (auto), 1 (off), "
                             "or an odd integer >= 5")
        if self.denoise_window_t not in (-1, 0) and (
                self.denoise_window_t < 5 or self.denoise_window_t % 2 == 0):
            raise ValueError("denoise_window_t must be -1 (mirror), 0 (off), "
                             "or an odd integer >= 5")
        if self.denoise_order < 2:
            raise ValueError("denoise_order must be >= 2")
        return self


def _render_value(value) -> str:
    if isinstance(value, tuple):
        return ",".join(repr(v) for v in value)
    return repr(value) if isinstance(value, str) else str(value)


def render_config(config: RunConfig) -> str:
    lines = []
    for f in dataclasses.fields(RunConfig):
        lines.append(f"{f.name} = {_render_value(getattr(config, f.name))}")
    return "\n".join(lines) + "\n"


def config_hash(config: RunConfig) -> str:
    return hashlib.sha256(render_config(config).encode()).hexdigest()[:16]


def _parse_value(name: str, text: str, current):
    text = text.strip()
    if isinstance(current, bool):
        if text.lower() in ("true", "1", "yes"):
            return True
        if text.lower() in ("false", "0", "no"):
            return False
        raise ValueError(f"{name}: expected a boolean, got {text!r}")
    if isinstance(current, int):
        return int(text)
    if isinstance(current, float):
        return float(text)
    if isinstance(current, tuple):
        return tuple(float(v) for v in text.split(",") if v.strip())
    return text.strip("\"'")


def parse_config(text: str) -> RunConfig:
    """Parse key = value lines; '#' starts a comment; unknown keys fail."""
    config = RunConfig()
    known = {f.name for f in dataclasses.fields(RunConfig)}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key = value")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in known:
            raise ValueError(f"line {lineno}: unknown config key {key!r}")
        setattr(config, key, _parse_value(key, value, getattr(config, key)))
    return config.validate()


def load_config(path) -> RunConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())
