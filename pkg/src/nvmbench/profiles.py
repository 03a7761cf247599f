"""Technology profiles: calibrated behavioral parameters for one memory chip.

A :class:`TechnologyProfile` bundles everything the device simulation needs to
reproduce a technology's externally observable behavior: the write-current
signature, write/read latency (including write-verify-write retries), the
endurance curve that drives raw bit flips, erase semantics and the chip's ECC.

Currents are expressed in arbitrary units (a.u.); only ratios between
technologies and between data patterns are meaningful. Latencies are integer
clock cycles at ``clock_hz``.

Profiles serialize to a documented JSON schema (``data/profile.schema.json``);
calibrated defaults for the six supported technologies ship under
``data/profiles/``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources

import jsonschema
import numpy as np
from scipy.special import expit

SCHEMA_VERSION = 1
PAGE_SIZE_BYTES = 64
DEFAULT_CLOCK_HZ = 1.5625e6


class ProfileError(ValueError):
    """Raised for structurally invalid or out-of-range profile parameters."""


class Technology(str, Enum):
    TOGGLE_MRAM = "toggle_mram"
    FERAM = "feram"
    CBRAM = "cbram"
    RERAM = "reram"
    FLASH = "flash"
    SRAM = "sram"

    @property
    def label(self) -> str:
        return {
            Technology.TOGGLE_MRAM: "Toggle MRAM",
            Technology.FERAM: "FeRAM",
            Technology.CBRAM: "CBRAM",
            Technology.RERAM: "ReRAM",
            Technology.FLASH: "Flash",
            Technology.SRAM: "SRAM",
        }[self]


@dataclass(frozen=True)
class LogisticCurve:
    """Saturating probability curve over per-bit wear.

    value(w) = p_max / (1 + exp(-steepness * (w - midpoint_cycles)))
    """

    p_max: float
    steepness: float
    midpoint_cycles: float

    def value(self, wear):
        wear = np.asarray(wear, dtype=np.float64)
        return self.p_max * expit(self.steepness * (wear - self.midpoint_cycles))

    def validate(self, name: str) -> None:
        if not (0.0 <= self.p_max < 1.0):
            raise ProfileError(f"{name}: p_max must be in [0, 1), got {self.p_max}")
        if self.steepness < 0.0:
            raise ProfileError(f"{name}: steepness must be >= 0, got {self.steepness}")


@dataclass(frozen=True)
class MramCurrent:
    """Toggle-MRAM write current: per-toggle cost depends on the bit's prior state.

    A write toggling k bits costs ``base + k*cost_toggle_from_zero`` plus, for
    each toggled bit that held a 1, a surcharge
    ``(cost_toggle_from_one - cost_toggle_from_zero) * deviation_decay**(k-1)``.
    The surcharge decay makes the gap between the all-ones-start and
    all-zeros-start patterns shrink as more bits toggle at once, while keeping
    the ones-start pattern strictly more expensive for every k.
    """

    kind = "mram"
    base: float
    cost_toggle_from_one: float
    cost_toggle_from_zero: float
    deviation_decay: float
    noise_sigma: float

    def validate(self) -> None:
        for n in ("base", "cost_toggle_from_one", "cost_toggle_from_zero", "noise_sigma"):
            if getattr(self, n) < 0:
                raise ProfileError(f"mram current: {n} must be >= 0")
        if not self.cost_toggle_from_one > self.cost_toggle_from_zero:
            raise ProfileError("mram current: cost_toggle_from_one must exceed cost_toggle_from_zero")
        if not (0.0 < self.deviation_decay < 1.0):
            raise ProfileError("mram current: deviation_decay must be in (0, 1)")

    def mean_pattern_current(self, k, toggles_from_one):
        """Noise-free current for k toggled bits, of which toggles_from_one held a 1."""
        k = np.asarray(k, dtype=np.float64)
        t1 = np.asarray(toggles_from_one, dtype=np.float64)
        surcharge = self.cost_toggle_from_one - self.cost_toggle_from_zero
        decay = np.where(k >= 1, self.deviation_decay ** np.maximum(k - 1, 0), 0.0)
        return self.base + k * self.cost_toggle_from_zero + t1 * surcharge * decay

    def expected_byte_write_current(self) -> float:
        # Uniform random (previous, new) byte pair: toggle count k ~ Bin(8, 1/2)
        # and, given k, half the toggles start from 1 on average. The closed
        # form below is E[T1 * decay^(k-1)] = 2 * ((1 + decay)/2)^7, computed by
        # repeated multiplication so the dyadic default stays exact.
        p = 1.0
        for _ in range(7):
            p *= (1.0 + self.deviation_decay) / 2.0
        surcharge = self.cost_toggle_from_one - self.cost_toggle_from_zero
        return self.base + 4.0 * self.cost_toggle_from_zero + 2.0 * surcharge * p


@dataclass(frozen=True)
class CbramCurrent:
    """CBRAM write current grows linearly with the number of bits toggled."""

    kind = "cbram"
    base: float
    slope_per_bit: float
    noise_sigma: float

    def validate(self) -> None:
        for n in ("base", "slope_per_bit", "noise_sigma"):
            if getattr(self, n) < 0:
                raise ProfileError(f"cbram current: {n} must be >= 0")

    def mean_pattern_current(self, k):
        return self.base + np.asarray(k, dtype=np.float64) * self.slope_per_bit

    def expected_byte_write_current(self) -> float:
        return self.base + 4.0 * self.slope_per_bit


@dataclass(frozen=True)
class FeramCurrent:
    """FeRAM write current is pattern-independent."""

    kind = "feram"
    constant: float
    noise_sigma: float

    def validate(self) -> None:
        if self.constant < 0 or self.noise_sigma < 0:
            raise ProfileError("feram current: parameters must be >= 0")

    def expected_byte_write_current(self) -> float:
        return self.constant


@dataclass(frozen=True)
class ReramCurrent:
    """ReRAM write current: a pattern-independent uniform draw per byte write."""

    kind = "reram"
    mean: float
    spread: float

    def validate(self) -> None:
        if self.mean < 0 or self.spread < 0:
            raise ProfileError("reram current: parameters must be >= 0")
        if self.spread > self.mean:
            raise ProfileError("reram current: spread must not exceed mean (currents stay positive)")

    def expected_byte_write_current(self) -> float:
        return self.mean


@dataclass(frozen=True)
class ConstantCurrent:
    """Fixed per-byte write current (Flash, SRAM)."""

    kind = "constant"
    byte_write: float

    def validate(self) -> None:
        if self.byte_write < 0:
            raise ProfileError("constant current: byte_write must be >= 0")

    def expected_byte_write_current(self) -> float:
        return self.byte_write


CURRENT_KINDS = {
    "mram": MramCurrent,
    "cbram": CbramCurrent,
    "feram": FeramCurrent,
    "reram": ReramCurrent,
    "constant": ConstantCurrent,
}


@dataclass(frozen=True)
class LatencyModel:
    """Write/read latency in clock cycles, with optional write-verify-write retries.

    When ``wvw_enabled``, each write draws an attempt count from a geometric
    process whose per-attempt failure probability is ``retry_prob`` evaluated at
    the byte's mean wear, capped at ``max_attempts``. Every extra attempt adds
    ``wvw_attempt_cycles`` and re-drives the write current.
    """

    base_write_cycles: int
    read_cycles: int
    wvw_enabled: bool = False
    retry_prob: LogisticCurve | None = None
    wvw_attempt_cycles: int = 0
    max_attempts: int = 1

    def validate(self) -> None:
        if self.base_write_cycles <= 0 or self.read_cycles <= 0:
            raise ProfileError("latency: base_write_cycles and read_cycles must be positive")
        if self.wvw_enabled:
            if self.retry_prob is None:
                raise ProfileError("latency: wvw_enabled requires retry_prob parameters")
            if self.max_attempts < 1 or self.wvw_attempt_cycles < 0:
                raise ProfileError("latency: invalid WvW attempt parameters")
            self.retry_prob.validate("latency.retry_prob")


@dataclass(frozen=True)
class EnduranceModel:
    """Rated endurance plus the raw per-bit flip probability curve over wear."""

    rated_cycles: int
    flip_prob: LogisticCurve

    def validate(self) -> None:
        if self.rated_cycles <= 0:
            raise ProfileError("endurance: rated_cycles must be positive")
        self.flip_prob.validate("endurance.flip_prob")


@dataclass(frozen=True)
class EraseModel:
    erase_before_write: bool = False
    erase_current: float = 0.0
    erase_latency_cycles: int = 0

    def validate(self, technology: Technology) -> None:
        if self.erase_current < 0 or self.erase_latency_cycles < 0:
            raise ProfileError("erase: costs must be >= 0")
        if self.erase_before_write and technology is not Technology.FLASH:
            raise ProfileError("erase: erase_before_write is only valid for flash")


@dataclass(frozen=True)
class EccConfig:
    """Single-error-correcting code applied per stored codeword (one byte,
    plus the spare flag bit when an encoder writes one)."""

    enabled: bool = False


@dataclass(frozen=True)
class TechnologyProfile:
    technology: Technology
    current: MramCurrent | CbramCurrent | FeramCurrent | ReramCurrent | ConstantCurrent
    latency: LatencyModel
    endurance: EnduranceModel
    erase: EraseModel = field(default_factory=EraseModel)
    ecc: EccConfig = field(default_factory=EccConfig)
    page_size_bytes: int = PAGE_SIZE_BYTES
    clock_hz: float = DEFAULT_CLOCK_HZ
    volatile: bool = False

    def validate(self) -> "TechnologyProfile":
        if self.page_size_bytes != PAGE_SIZE_BYTES:
            raise ProfileError(f"page_size_bytes must be {PAGE_SIZE_BYTES}")
        if not (self.clock_hz > 0 and math.isfinite(self.clock_hz)):
            raise ProfileError("clock_hz must be a positive finite frequency")
        self.current.validate()
        self.latency.validate()
        self.endurance.validate()
        self.erase.validate(self.technology)
        return self

    def expected_byte_write_current(self) -> float:
        """Mean byte-write current for uniform random data on a pristine chip
        (single write attempt, erase cost excluded)."""
        return self.current.expected_byte_write_current()

    def cycles_to_seconds(self, cycles) -> float:
        return float(cycles) / self.clock_hz

    # -- JSON round trip -----------------------------------------------------

    def to_json_dict(self) -> dict:
        cur: dict = {"kind": self.current.kind}
        for key in self.current.__dataclass_fields__:
            cur[key] = getattr(self.current, key)
        lat = {
            "base_write_cycles": self.latency.base_write_cycles,
            "read_cycles": self.latency.read_cycles,
            "wvw_enabled": self.latency.wvw_enabled,
            "wvw_retry_prob": _curve_to_json(self.latency.retry_prob),
            "wvw_attempt_cycles": self.latency.wvw_attempt_cycles,
            "max_attempts": self.latency.max_attempts,
        }
        return {
            "schema_version": SCHEMA_VERSION,
            "technology": self.technology.value,
            "page_size_bytes": self.page_size_bytes,
            "clock_hz": self.clock_hz,
            "current_model": cur,
            "latency_model": lat,
            "endurance_model": {
                "rated_cycles": self.endurance.rated_cycles,
                "raw_flip_prob": _curve_to_json(self.endurance.flip_prob),
            },
            "erase_model": {
                "erase_before_write": self.erase.erase_before_write,
                "erase_current": self.erase.erase_current,
                "erase_latency_cycles": self.erase.erase_latency_cycles,
            },
            "ecc": {"enabled": self.ecc.enabled},
            "volatile": self.volatile,
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "TechnologyProfile":
        try:
            jsonschema.validate(doc, _schema())
        except jsonschema.ValidationError as exc:
            raise ProfileError(f"profile document rejected by schema: {exc.message}") from exc
        if doc["schema_version"] != SCHEMA_VERSION:
            raise ProfileError(f"unsupported profile schema_version {doc['schema_version']}")
        cur_doc = dict(doc["current_model"])
        current_cls = CURRENT_KINDS[cur_doc.pop("kind")]
        lat_doc = doc["latency_model"]
        profile = cls(
            technology=Technology(doc["technology"]),
            page_size_bytes=doc["page_size_bytes"],
            clock_hz=doc["clock_hz"],
            current=current_cls(**cur_doc),
            latency=LatencyModel(
                base_write_cycles=lat_doc["base_write_cycles"],
                read_cycles=lat_doc["read_cycles"],
                wvw_enabled=lat_doc["wvw_enabled"],
                retry_prob=_curve_from_json(lat_doc.get("wvw_retry_prob")),
                wvw_attempt_cycles=lat_doc["wvw_attempt_cycles"],
                max_attempts=lat_doc["max_attempts"],
            ),
            endurance=EnduranceModel(
                rated_cycles=doc["endurance_model"]["rated_cycles"],
                flip_prob=_curve_from_json(doc["endurance_model"]["raw_flip_prob"]),
            ),
            erase=EraseModel(**doc["erase_model"]),
            ecc=EccConfig(**doc["ecc"]),
            volatile=doc.get("volatile", False),
        )
        return profile.validate()

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def _curve_to_json(curve: LogisticCurve | None):
    if curve is None:
        return None
    return {
        "p_max": curve.p_max,
        "steepness": curve.steepness,
        "midpoint_cycles": curve.midpoint_cycles,
    }


def _curve_from_json(doc):
    if doc is None:
        return None
    return LogisticCurve(**doc)


_SCHEMA_CACHE: dict | None = None


def _schema() -> dict:
    global _SCHEMA_CACHE
    if _SCHEMA_CACHE is None:
        text = resources.files("nvmbench.data").joinpath("profile.schema.json").read_text("utf-8")
        _SCHEMA_CACHE = json.loads(text)
    return _SCHEMA_CACHE


def load_profile(path) -> TechnologyProfile:
    with open(path, encoding="utf-8") as fh:
        return TechnologyProfile.from_json_dict(json.load(fh))


def default_profile(technology: Technology | str) -> TechnologyProfile:
    technology = Technology(technology)
    text = (
        resources.files("nvmbench.data")
        .joinpath(f"profiles/{technology.value}.json")
        .read_text("utf-8")
    )
    return TechnologyProfile.from_json_dict(json.loads(text))


def load_default_profiles() -> list[TechnologyProfile]:
    """The six bundled technologies, in the conventional report order."""
    order = [
        Technology.TOGGLE_MRAM,
        Technology.FERAM,
        Technology.CBRAM,
        Technology.RERAM,
        Technology.FLASH,
        Technology.SRAM,
    ]
    return [default_profile(t) for t in order]
