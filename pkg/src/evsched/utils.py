"""Seeding, hashing, and small I/O helpers.

All randomness in a run flows from one integer seed through named
sub-streams so that reruns are byte-identical and the consumers
(data synthesis, session sampling, exploration noise, forecast noise,
parameter init, batch sampling) cannot perturb each other.
"""

from __future__ import annotations

import hashlib
import json

import numpy as np

# Spawn order is part of the on-disk reproducibility contract: never reorder.
STREAM_NAMES = (
    "data",      # synthetic price noise
    "session",   # arrival/departure/initial-SOC draws during training
    "policy",    # exploration noise and warmup actions
    "forecast",  # MPC price-forecast noise
    "init",      # network parameter initialisation
    "learn",     # replay-buffer batch indices and target-action noise
    "day",       # training-day selection
    "eval",      # evaluation-episode sessions
    "mpc",       # MPC departure-time prediction draws
)


def rng_streams(seed: int) -> dict[str, np.random.Generator]:
    """Return the named random sub-streams for ``seed``."""
    children = np.random.SeedSequence(seed).spawn(len(STREAM_NAMES))
    return {name: np.random.default_rng(child) for name, child in zip(STREAM_NAMES, children)}


def day_rng(seed: int, tag: str, day: int) -> np.random.Generator:
    """A generator tied to (seed, tag, day), for per-day reproducible draws.

    The tag string is hashed so distinct purposes ("eval-session",
    "eval-control") get unrelated streams for the same seed and day.
    """
    tag_entropy = int.from_bytes(hashlib.sha256(tag.encode("utf-8")).digest()[:8], "big")
    return np.random.default_rng(np.random.SeedSequence([int(seed), tag_entropy, int(day)]))


def sha256_hex(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def digest_text(text: str) -> str:
    return sha256_hex(text.encode("utf-8"))


def digest_json(obj) -> str:
    """Digest of a JSON-serialisable object, canonicalised."""
    return digest_text(json.dumps(obj, sort_keys=True, separators=(",", ":")))


def fmt_eur(x: float) -> str:
    """Money and energy amounts carry six decimals in files."""
    return f"{x + 0.0:.6f}"  # + 0.0 turns -0.0 into 0.0


def fmt_stat(x: float) -> str:
    """Compact, deterministic formatting for multipliers and losses."""
    return f"{x + 0.0:.8g}"


def write_csv(path, header: list[str], rows: list[list[str]]) -> None:
    """Write CSV with deterministic newlines and no locale dependence."""
    lines = [",".join(header)]
    lines.extend(",".join(row) for row in rows)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
