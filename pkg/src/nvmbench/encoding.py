"""Write-encoding strategies that trade logic for cell wear.

Flip-N-Write stores either the data byte or its complement, tagged by a flag
bit kept in the byte's spare cell. Each write picks whichever option toggles
fewer cells (counting the flag itself); ties keep the current flag so the
flag cell wears as little as possible. Decoding is exact: flag 1 means the
stored byte is inverted.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import device as dev
from .bits import POPCOUNT, hamming8


@dataclass(frozen=True)
class FnwWord:
    """Stored (data, flag) pair; ``flag`` is 0 or 1."""

    data: int
    flag: int

    def __post_init__(self):
        if not 0 <= self.data <= 0xFF:
            raise ValueError(f"data must be a byte, got {self.data!r}")
        if self.flag not in (0, 1):
            raise ValueError(f"flag must be 0 or 1, got {self.flag!r}")


def fnw_choose(stored_data: np.ndarray, stored_flags: np.ndarray, new_data: np.ndarray):
    """Vectorized Flip-N-Write choice for a span of bytes.

    Returns (encoded_bytes, new_flags) minimizing per-byte toggles, flag cell
    included. With nine codeword bits the two option costs always differ, so
    the tie rule (keep the current flag) never has to fire, but the strict
    comparison implements it anyway.
    """
    h = POPCOUNT[stored_data ^ new_data]
    cost_plain = h + (stored_flags != 0)
    cost_inverted = (8 - h) + (stored_flags != 1)
    invert = cost_inverted < cost_plain
    encoded = np.where(invert, ~new_data, new_data).astype(np.uint8)
    return encoded, invert.astype(np.uint8)


def fnw_encode(stored: FnwWord, new_data: int) -> FnwWord:
    """Choose the cheaper of writing ``new_data`` (flag 0) or its complement
    (flag 1) against the currently stored word."""
    if not 0 <= new_data <= 0xFF:
        raise ValueError(f"new_data must be a byte, got {new_data!r}")
    enc, flag = fnw_choose(
        np.array([stored.data], dtype=np.uint8),
        np.array([stored.flag], dtype=np.uint8),
        np.array([new_data], dtype=np.uint8),
    )
    return FnwWord(data=int(enc[0]), flag=int(flag[0]))


def fnw_decode(word: FnwWord) -> int:
    """Recover the logical byte: identity for flag 0, complement for flag 1."""
    return word.data ^ 0xFF if word.flag else word.data


def fnw_decode_span(data: np.ndarray, flags: np.ndarray) -> np.ndarray:
    return np.where(flags == 1, ~data, data).astype(np.uint8)


def toggle_cost(stored: int, new: int) -> int:
    """Cells toggled by writing ``new`` over ``stored`` (Hamming distance)."""
    return hamming8(stored, new)


class FnwEncoder:
    """Marker strategy passed to the endurance experiment: every byte write
    goes through Flip-N-Write against the actual cell state."""

    name = "fnw"
    codeword_bits = 9

    def encode_span(self, stored_data, stored_flags, new_data):
        return fnw_choose(stored_data, stored_flags, new_data)

    def decode_span(self, data, flags):
        return fnw_decode_span(data, flags)

    def write_page(self, device: dev.DeviceInstance, page_index: int, data: np.ndarray):
        """One encoded page write against the device's current cell state."""
        page_size = device.profile.page_size_bytes
        span = slice(page_index * page_size, (page_index + 1) * page_size)
        encoded, flags = fnw_choose(device.memory[span], device.flags[span], data)
        return dev.write_page(device, page_index, encoded, flags=flags)

    def read_page(self, device: dev.DeviceInstance, page_index: int) -> np.ndarray:
        page_size = device.profile.page_size_bytes
        raw = dev.read_span(device, page_index * page_size, page_size)
        return self.decode_span(raw, device.flags[page_index * page_size:(page_index + 1) * page_size])


# ---------------------------------------------------------------------------
# Paired endurance study
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SeedFactors:
    seed: int
    baseline_total: int
    fnw_total: int
    baseline_2bit: int
    fnw_2bit: int
    factor_total: float
    factor_2bit: float


@dataclass
class FnwComparison:
    technology: str
    cycles: int
    seeds: tuple[int, ...]
    baseline: "characterization.ErrorHistogram"
    fnw: "characterization.ErrorHistogram"
    per_seed: list[SeedFactors]
    reduction_factor_total: float
    reduction_factor_2bit: float

    def to_json_dict(self) -> dict:
        return {
            "technology": self.technology,
            "cycles": self.cycles,
            "seeds": list(self.seeds),
            "baseline": self.baseline.to_json_dict(),
            "fnw": self.fnw.to_json_dict(),
            "per_seed": [
                {
                    "seed": f.seed,
                    "baseline_total": f.baseline_total,
                    "fnw_total": f.fnw_total,
                    "baseline_2bit": f.baseline_2bit,
                    "fnw_2bit": f.fnw_2bit,
                    "factor_total": f.factor_total,
                    "factor_2bit": f.factor_2bit,
                }
                for f in self.per_seed
            ],
            "reduction_factor_total": self.reduction_factor_total,
            "reduction_factor_2bit": self.reduction_factor_2bit,
        }


def reduction_factor(baseline_count: int, fnw_count: int) -> float:
    """baseline/FNW count ratio; infinity when FNW eliminates all errors the
    baseline still sees, and 1 when neither run errs."""
    if fnw_count == 0:
        return 1.0 if baseline_count == 0 else float("inf")
    return baseline_count / fnw_count


def _geometric_mean(values) -> float:
    values = list(values)
    if any(np.isinf(v) for v in values):
        return float("inf")
    return float(np.exp(np.mean(np.log(values))))


def compare_endurance(profile, cycles: int = 200_000, seeds=(1,), page_index: int = 0) -> FnwComparison:
    """Paired endurance runs with and without Flip-N-Write.

    For each seed, two fresh devices share the seed (hence the same random
    data stream); one writes plainly, the other through FNW. Reduction
    factors are per-seed count ratios summarized by geometric mean; the
    returned histograms aggregate all seeds.
    """
    from . import characterization

    seeds = tuple(int(s) for s in seeds)
    if not seeds:
        raise ValueError("at least one seed required")
    page_size = profile.page_size_bytes
    base_hist = np.zeros((page_size, 9), dtype=np.int64)
    fnw_hist = np.zeros((page_size, 9), dtype=np.int64)
    per_seed = []
    encoder = FnwEncoder()
    for seed in seeds:
        base = characterization.run_endurance(
            dev.create_device(profile, seed=seed), cycles=cycles, page_index=page_index)
        enc = characterization.run_endurance(
            dev.create_device(profile, seed=seed), cycles=cycles, encoder=encoder, page_index=page_index)
        base_hist += base.per_byte
        fnw_hist += enc.per_byte
        per_seed.append(SeedFactors(
            seed=seed,
            baseline_total=base.total_errors,
            fnw_total=enc.total_errors,
            baseline_2bit=int(base.counts[2]),
            fnw_2bit=int(enc.counts[2]),
            factor_total=reduction_factor(base.total_errors, enc.total_errors),
            factor_2bit=reduction_factor(int(base.counts[2]), int(enc.counts[2])),
        ))
    technology = profile.technology.value
    return FnwComparison(
        technology=technology,
        cycles=cycles,
        seeds=seeds,
        baseline=characterization.ErrorHistogram(
            technology=technology, cycles=cycles, page_index=page_index, encoder=None, per_byte=base_hist),
        fnw=characterization.ErrorHistogram(
            technology=technology, cycles=cycles, page_index=page_index, encoder=encoder.name, per_byte=fnw_hist),
        per_seed=per_seed,
        reduction_factor_total=_geometric_mean(f.factor_total for f in per_seed),
        reduction_factor_2bit=_geometric_mean(f.factor_2bit for f in per_seed),
    )
