"""Streaming block-causal diffusion rollout with relativistic RoPE coordinates."""

from .analysis import (FrameAttentionMap, band_mass, cut_disjointness, flush_redirection, flush_suppression,
                       frame_attention_map, rope_probe_map, sink_column_mass, trace_attention_map)
from .cache import FrameEntry, KvCache
from .config import RunConfig, format_config, parse_config
from .engine import Engine, RolloutCommand, RolloutTrace, build_engine, latent_frame_count, shifted_timesteps
from .errors import ConfigError, HorizonRangeError, IncompleteTraceError, ProtocolError, ShapeError
from .model import ModelConfig, PromptEmbedding, ToyDiT, cfg_velocity, prompt_embed
from .rope import Coord3, FrequencyTable, apply_rope3d, build_frequencies, rotate_1d, shift_rotation

__version__ = "0.1.0"
