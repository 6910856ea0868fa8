"""Line-oriented run configuration.

Grammar (one statement per line, ``#`` starts a comment)::

    key = value
    continue @block N
    flush "<prompt>" @block N
    prompt "<prompt>" @block N
    cut DELTA [forced] @block N

Prompts are double-quoted; ``\\"`` and ``\\\\`` escape a quote and a
backslash. Schedule lines must appear in nondecreasing block order.
"""

import dataclasses
import re
from dataclasses import dataclass, field
from typing import Optional

from .engine import RolloutCommand, latent_frame_count
from .errors import ConfigError
from .model import ModelConfig
from .rope import build_frequencies

_KEY_RE = re.compile(r"^([A-Za-z_][A-Za-z0-9_]*)\s*=\s*(.*)$")
_QUOTED = r'"((?:[^"\\]|\\.)*)"'
_SCHED_RE = {
    "continue": re.compile(r"^continue\s+@block\s+(\d+)$"),
    "flush": re.compile(r"^flush\s+" + _QUOTED + r"\s+@block\s+(\d+)$"),
    "prompt": re.compile(r"^prompt\s+" + _QUOTED + r"\s+@block\s+(\d+)$"),
    "cut": re.compile(r"^cut\s+(\d+)(\s+forced)?\s+@block\s+(\d+)$"),
}


@dataclass
class RunConfig:
    # model
    layers: int = 2
    heads: int = 2
    head_dim: int = 16
    grid_h: int = 4
    grid_w: int = 4
    latent_channels: int = 32
    f_limit: int = 21
    model_seed: int = 0
    rope_base: float = 10000.0
    rope_split: Optional[tuple] = None
    # rollout
    f0: int = 21
    capacity: int = 6
    mode: str = "fixed"
    n_blocks: int = 7
    cfg_scale: float = 3.0
    shift: float = 5.0
    n_steps: int = 4
    seed: int = 0
    capture_layer: Optional[int] = None
    prompt: str = ""
    force_cut: bool = False
    # horizon bookkeeping: f_limit must equal the latent count of one clip
    fps: int = 16
    clip_seconds: int = 5
    # probe head
    probe_pair: int = 2
    probe_strength: float = 2000.0
    out: Optional[str] = None
    schedule: list = field(default_factory=list)

    def model_config(self) -> ModelConfig:
        return ModelConfig(layers=self.layers, heads=self.heads, head_dim=self.head_dim,
                           grid=(self.grid_h, self.grid_w), latent_channels=self.latent_channels,
                           f_limit=self.f_limit, seed=self.model_seed, rope_base=self.rope_base,
                           rope_split=self.rope_split)

    def clip_latent_frames(self) -> int:
        return latent_frame_count(self.fps * self.clip_seconds + 1)

    def replace(self, **kw):
        return dataclasses.replace(self, **kw)

    def validate(self):
        if self.clip_latent_frames() != self.f_limit:
            raise ConfigError(f"f_limit={self.f_limit} but a {self.clip_seconds}s clip at {self.fps} FPS "
                              f"has {self.clip_latent_frames()} latent frames")
        if not 3 <= self.f0 <= self.f_limit:
            raise ConfigError(f"f0={self.f0} must lie in [3, f_limit={self.f_limit}]")
        if self.mode not in ("fixed", "unbounded"):
            raise ConfigError(f"mode must be fixed or unbounded, got {self.mode!r}")
        for name in ("capacity", "n_blocks", "n_steps", "layers", "heads"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.shift <= 0:
            raise ConfigError("shift must be positive")
        if self.capture_layer is not None and not 0 <= self.capture_layer < self.layers:
            raise ConfigError(f"capture_layer {self.capture_layer} outside 0..{self.layers - 1}")
        if any(a.at_block > b.at_block for a, b in zip(self.schedule, self.schedule[1:])):
            raise ConfigError("schedule is not sorted by block")
        try:
            self.model_config()
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        pairs_f = build_frequencies(self.head_dim, self.rope_split, self.rope_base).pairs_f
        if not 0 <= self.probe_pair < pairs_f:
            raise ConfigError(f"probe_pair {self.probe_pair} outside the {pairs_f} temporal pairs")
        if self.probe_strength <= 0:
            raise ConfigError("probe_strength must be positive")
        return self


_FIELDS = {f.name: f for f in dataclasses.fields(RunConfig) if f.name != "schedule"}


def _convert(key, raw, line):
    f = _FIELDS[key]
    default = f.default
    raw = raw.strip()
    try:
        if key == "rope_split":
            if raw in ("", "auto"):
                return None
            return tuple(int(p) for p in raw.split(","))
        if key == "capture_layer":
            return None if raw == "middle" else int(raw)
        if key in ("prompt", "out", "mode"):
            if raw.startswith('"'):
                m = re.fullmatch(_QUOTED, raw)
                if not m:
                    raise ValueError(f"unterminated string {raw!r}")
                return _unescape(m.group(1))
            if key == "out" and raw == "":
                return None
            return raw
        if isinstance(default, bool):
            if raw.lower() in ("true", "yes", "1"):
                return True
            if raw.lower() in ("false", "no", "0"):
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {exc}", line) from None
    raise ConfigError(f"cannot parse {key}", line)


def _unescape(s):
    return re.sub(r"\\(.)", r"\1", s)


def _escape(s):
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


def parse_schedule_line(text, line=None):
    for kind, rx in _SCHED_RE.items():
        m = rx.match(text)
        if not m:
            continue
        try:
            if kind == "continue":
                return RolloutCommand.cont(int(m.group(1)))
            if kind == "flush":
                return RolloutCommand.flush(_unescape(m.group(1)), int(m.group(2)))
            if kind == "prompt":
                return RolloutCommand.set_prompt(_unescape(m.group(1)), int(m.group(2)))
            return RolloutCommand.cut(int(m.group(1)), int(m.group(3)), forced=bool(m.group(2)))
        except ValueError as exc:
            raise ConfigError(str(exc), line) from None
    raise ConfigError(f"malformed statement: {text!r}", line)


def parse_config(text: str) -> RunConfig:
    values = {}
    schedule = []
    for n, raw in enumerate(text.splitlines(), start=1):
        s = raw.strip()
        if not s or s.startswith("#"):
            continue
        m = _KEY_RE.match(s)
        if m:
            key = m.group(1)
            if key not in _FIELDS:
                raise ConfigError(f"unknown key {key!r}", n)
            values[key] = _convert(key, m.group(2), n)
            continue
        cmd = parse_schedule_line(s, n)
        if schedule and cmd.at_block < schedule[-1].at_block:
            raise ConfigError(f"schedule not sorted: block {cmd.at_block} after {schedule[-1].at_block}", n)
        schedule.append(cmd)
    cfg = RunConfig(**values, schedule=schedule)
    return cfg.validate()


def format_command(cmd: RolloutCommand) -> str:
    at = f"@block {cmd.at_block}"
    if cmd.kind == "continue":
        return f"continue {at}"
    if cmd.kind == "flush":
        return f"flush {_escape(cmd.prompt)} {at}"
    if cmd.kind == "prompt":
        return f"prompt {_escape(cmd.prompt)} {at}"
    return f"cut {cmd.delta}{' forced' if cmd.forced else ''} {at}"


def format_config(cfg: RunConfig) -> str:
    lines = []
    for name in _FIELDS:
        v = getattr(cfg, name)
        if name == "rope_split":
            v = "auto" if v is None else ",".join(str(p) for p in v)
        elif name == "capture_layer":
            v = "middle" if v is None else v
        elif name == "out":
            if v is None:
                continue
            v = _escape(v)
        elif name == "prompt":
            v = _escape(v)
        elif isinstance(v, bool):
            v = "true" if v else "false"
        elif isinstance(v, float):
            v = repr(v)
        lines.append(f"{name} = {v}")
    lines.extend(format_command(c) for c in cfg.schedule)
    return "\n".join(lines) + "\n"
