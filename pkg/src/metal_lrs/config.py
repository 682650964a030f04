"""Run configuration shared by the CLI and the HTTP server.

Precedence: command-line flags > METAL_* environment variables > JSON config
file (--config). The CLI wires the file through click's default map, so the
dataclass only ever sees resolved values.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from datetime import date, timedelta
from pathlib import Path

from .errors import ValidationError
from .mining import DEFAULT_CANDIDATE_CAP, MinerParams


@dataclass
class RunConfig:
    store_path: str | None = None
    host: str = "127.0.0.1"
    port: int = 8771
    auth_token: str | None = None
    # miner
    min_group_size: int = 2
    min_support: float = 0.5
    max_sequence_length: int = 3
    max_context_size: int = 3
    session_gap_minutes: float = 30.0
    candidate_cap: int = DEFAULT_CANDIDATE_CAP
    # permutation tests
    permutations: int = 10_000
    seed: int = 0
    # learner context
    reference_date: date = field(default_factory=date.today)
    # recommendation flow
    min_confidence: float = 0.5
    lookback_days: int = 30

    def __post_init__(self) -> None:
        if isinstance(self.reference_date, str):
            self.reference_date = date.fromisoformat(self.reference_date)
        self.miner_params().validate()
        if self.permutations < 1:
            raise ValidationError("permutations", "must be >= 1")
        if not 0.0 < self.min_confidence <= 1.0:
            raise ValidationError("min_confidence", "must be in (0, 1]")
        if self.lookback_days < 1:
            raise ValidationError("lookback_days", "must be >= 1")
        if self.session_gap_minutes <= 0:
            raise ValidationError("session_gap_minutes", "must be > 0")

    def miner_params(self) -> MinerParams:
        return MinerParams(
            min_group_size=self.min_group_size,
            min_support=self.min_support,
            max_sequence_length=self.max_sequence_length,
            max_context_size=self.max_context_size,
            candidate_cap=self.candidate_cap,
        )

    def session_gap(self) -> timedelta:
        return timedelta(minutes=self.session_gap_minutes)

    def lookback(self) -> timedelta:
        return timedelta(days=self.lookback_days)


def load_config_file(path: str | Path) -> dict:
    """JSON config file: top-level keys mirror the CLI flag names."""
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(data, dict):
        raise ValidationError("config", f"config file {path} must hold a JSON object")
    return data
