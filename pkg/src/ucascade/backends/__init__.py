from .base import Capabilities, ConcurrencyLimited, ModelBackend, ModelOutput
from .remote import RemoteBackend, parse_score, render_score
from .replay import (
    LargeReplayBackend,
    ReplayDataset,
    SmallReplayBackend,
    replay_backends,
    write_replay,
)
from .synthetic import SyntheticBackend, synth_record, synthetic_dataset, synthetic_generate

__all__ = [
    "Capabilities", "ConcurrencyLimited", "ModelBackend", "ModelOutput",
    "RemoteBackend", "parse_score", "render_score",
    "LargeReplayBackend", "ReplayDataset", "SmallReplayBackend", "replay_backends", "write_replay",
    "SyntheticBackend", "synth_record", "synthetic_dataset", "synthetic_generate",
]
