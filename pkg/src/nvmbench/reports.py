"""Result persistence: canonical JSON, RFC-4180 CSV and reproducibility metadata.

Every run's JSON payload carries a ``meta`` block with the seed, a hash of the
resolved configuration and the tool version; re-running with the same triple
reproduces the payload byte for byte except for the timestamp, which is
excluded from the hash.
"""

from __future__ import annotations

import csv
import hashlib
import json
from datetime import datetime, timezone

from . import __version__

TIMESTAMP_FIELD = "timestamp"


def format_au(value: float) -> str:
    """Arbitrary-unit display: 4 significant figures, scientific below 1e-3."""
    if value == 0:
        return "0"
    if abs(value) < 1e-3:
        return f"{value:.3e}"
    return f"{value:.4g}"


def canonical_json(payload: dict) -> str:
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def config_hash(config: dict) -> str:
    """Hash of the resolved run configuration (timestamp excluded)."""
    scrubbed = {k: v for k, v in config.items() if k != TIMESTAMP_FIELD}
    blob = json.dumps(scrubbed, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def make_meta(seed, config: dict) -> dict:
    return {
        "seed": seed,
        "config": config,
        "config_hash": config_hash(config),
        "version": __version__,
        TIMESTAMP_FIELD: datetime.now(timezone.utc).isoformat(),
    }


def strip_timestamp(payload: dict) -> dict:
    """Copy of a run payload with the volatile timestamp removed (for
    comparisons and hashing)."""
    out = json.loads(json.dumps(payload))
    if "meta" in out:
        out["meta"].pop(TIMESTAMP_FIELD, None)
    return out


def write_json(path, payload: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(canonical_json(payload))


def write_csv(path, header, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def experiment_filename(experiment: str, technology: str, seed, ext: str) -> str:
    return f"{experiment}_{technology}_{seed}.{ext}"
