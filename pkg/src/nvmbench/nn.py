"""Integer feed-forward network with device-backed weight storage.

The network is fixed at 768 -> 7 -> 1: a 16x16 RGB image feeds 768 input
neurons (one per byte), seven hidden neurons feed one output neuron. Weights
and biases are 8-bit signed integers; activations are 8-bit unsigned and the
step activation emits 0 or 255. The pre-activation sum always fits a 32-bit
signed accumulator (|sum| <= 768*255*128 + 127 = 25,067,647).

For inference the 5391 parameter bytes are read from the simulated chip into
a zero-cost staging buffer (the FPGA block-RAM analog); only the chip reads
are charged latency.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import device as dev
from .device import DeviceInstance, StateError
from .profiles import TechnologyProfile

INPUT_NEURONS = 768
HIDDEN_NEURONS = 7
PARAM_BYTES = HIDDEN_NEURONS * (INPUT_NEURONS + 1) + (HIDDEN_NEURONS + 1)  # 5391
MAC_COUNT = HIDDEN_NEURONS * INPUT_NEURONS + HIDDEN_NEURONS  # 5383
ACCUMULATOR_BOUND = INPUT_NEURONS * 255 * 128 + 127  # 25,067,647

PARAMS_LAYOUT_VERSION = 1
_NOTES_KEY = "nn_params"


def activation(x: int) -> int:
    """Step activation: 0 for negative pre-activation, 255 otherwise."""
    return 0 if x < 0 else 255


def neuron_forward(activations, weights, bias: int) -> int:
    """One neuron: activation(sum(a_j * w_j) + b) in exact integer arithmetic."""
    a = np.asarray(activations)
    w = np.asarray(weights)
    if a.ndim != 1 or w.ndim != 1 or len(a) != len(w):
        raise ValueError(f"activations and weights must be equal-length vectors, got {a.shape} and {w.shape}")
    if len(a) > INPUT_NEURONS:
        raise ValueError(f"at most {INPUT_NEURONS} inputs per neuron, got {len(a)}")
    total = int(np.dot(a.astype(np.int64), w.astype(np.int64))) + int(bias)
    return activation(total)


@dataclass(frozen=True)
class NNParameters:
    """Trained weights/biases. Canonical byte layout: hidden weights row-major
    by neuron, hidden biases, output weights, output bias (two's complement)."""

    hidden_weights: np.ndarray  # (7, 768) int8
    hidden_biases: np.ndarray   # (7,) int8
    output_weights: np.ndarray  # (7,) int8
    output_bias: int

    def __post_init__(self):
        hw = np.asarray(self.hidden_weights, dtype=np.int8)
        hb = np.asarray(self.hidden_biases, dtype=np.int8)
        ow = np.asarray(self.output_weights, dtype=np.int8)
        if hw.shape != (HIDDEN_NEURONS, INPUT_NEURONS):
            raise ValueError(f"hidden_weights must be {(HIDDEN_NEURONS, INPUT_NEURONS)}, got {hw.shape}")
        if hb.shape != (HIDDEN_NEURONS,) or ow.shape != (HIDDEN_NEURONS,):
            raise ValueError("hidden_biases and output_weights must have 7 entries")
        if not -128 <= int(self.output_bias) <= 127:
            raise ValueError(f"output_bias out of int8 range: {self.output_bias}")
        object.__setattr__(self, "hidden_weights", hw)
        object.__setattr__(self, "hidden_biases", hb)
        object.__setattr__(self, "output_weights", ow)
        object.__setattr__(self, "output_bias", int(self.output_bias))

    def to_bytes(self) -> bytes:
        blob = np.concatenate([
            self.hidden_weights.reshape(-1),
            self.hidden_biases,
            self.output_weights,
            np.array([self.output_bias], dtype=np.int8),
        ])
        return blob.astype(np.int8).tobytes()

    @classmethod
    def from_bytes(cls, blob: bytes) -> "NNParameters":
        if len(blob) != PARAM_BYTES:
            raise ValueError(f"parameter blob must be {PARAM_BYTES} bytes, got {len(blob)}")
        flat = np.frombuffer(blob, dtype=np.int8)
        n = HIDDEN_NEURONS * INPUT_NEURONS
        return cls(
            hidden_weights=flat[:n].reshape(HIDDEN_NEURONS, INPUT_NEURONS).copy(),
            hidden_biases=flat[n:n + HIDDEN_NEURONS].copy(),
            output_weights=flat[n + HIDDEN_NEURONS:n + 2 * HIDDEN_NEURONS].copy(),
            output_bias=int(flat[-1]),
        )

    @classmethod
    def zeros(cls) -> "NNParameters":
        return cls(
            hidden_weights=np.zeros((HIDDEN_NEURONS, INPUT_NEURONS), dtype=np.int8),
            hidden_biases=np.zeros(HIDDEN_NEURONS, dtype=np.int8),
            output_weights=np.zeros(HIDDEN_NEURONS, dtype=np.int8),
            output_bias=0,
        )

    def save(self, path) -> None:
        """Raw 5391-byte binary plus a JSON sidecar describing the layout."""
        path = str(path)
        with open(path, "wb") as fh:
            fh.write(self.to_bytes())
        sidecar = {
            "layout_version": PARAMS_LAYOUT_VERSION,
            "total_bytes": PARAM_BYTES,
            "dtype": "int8",
            "sections": [
                {"name": "hidden_weights", "shape": [HIDDEN_NEURONS, INPUT_NEURONS]},
                {"name": "hidden_biases", "shape": [HIDDEN_NEURONS]},
                {"name": "output_weights", "shape": [HIDDEN_NEURONS]},
                {"name": "output_bias", "shape": [1]},
            ],
        }
        with open(path + ".json", "w", encoding="utf-8") as fh:
            json.dump(sidecar, fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "NNParameters":
        with open(path, "rb") as fh:
            return cls.from_bytes(fh.read())


def validate_image(image) -> np.ndarray:
    pixels = np.asarray(image, dtype=np.uint8) if not isinstance(image, (bytes, bytearray)) \
        else np.frombuffer(bytes(image), dtype=np.uint8)
    if pixels.shape != (INPUT_NEURONS,):
        raise ValueError(f"image must be exactly {INPUT_NEURONS} bytes, got shape {pixels.shape}")
    return pixels


# ---------------------------------------------------------------------------
# Device-backed storage
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TransferReport:
    byte_writes: int = 0
    byte_reads: int = 0
    latency_cycles: int = 0
    current_au: float = 0.0


def store_parameters(device: DeviceInstance, params: NNParameters, base_addr: int = 0) -> TransferReport:
    """Serialize the parameters onto the chip via byte writes.

    Full pages go through page writes (identical to sequential byte writes);
    erase-before-write chips pay their erase cost on first touch of each page.
    """
    if base_addr < 0 or base_addr + PARAM_BYTES > device.size_bytes:
        raise dev.AddressError(
            f"device of {device.size_bytes} bytes cannot hold {PARAM_BYTES} parameter bytes at {base_addr}")
    blob = np.frombuffer(params.to_bytes(), dtype=np.uint8)
    page_size = device.profile.page_size_bytes
    latency = 0
    current = 0.0
    pos = 0
    while pos < PARAM_BYTES:
        n = min(page_size - (base_addr + pos) % page_size, PARAM_BYTES - pos)
        out = dev.write_span(device, base_addr + pos, blob[pos:pos + n])
        latency += out.latency_cycles
        current += out.current
        pos += n
    device.notes[_NOTES_KEY] = {"base_addr": base_addr, "byte_count": PARAM_BYTES}
    return TransferReport(byte_writes=PARAM_BYTES, latency_cycles=latency, current_au=current)


def load_parameters(device: DeviceInstance, base_addr: int | None = None) -> tuple[NNParameters, TransferReport]:
    """Read the parameter bytes back from the chip (one read per byte)."""
    if base_addr is None:
        stored = device.notes.get(_NOTES_KEY)
        if stored is None:
            raise StateError("no parameters stored on this device")
        base_addr = stored["base_addr"]
    raw = dev.read_span(device, base_addr, PARAM_BYTES)
    report = TransferReport(
        byte_reads=PARAM_BYTES,
        latency_cycles=PARAM_BYTES * device.profile.latency.read_cycles,
        current_au=0.0,
    )
    return NNParameters.from_bytes(raw.tobytes()), report


# ---------------------------------------------------------------------------
# Inference
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ComputeReport:
    mac_count: int
    cycles: int


@dataclass(frozen=True)
class InferenceReport:
    prediction: int
    hidden_activations: tuple[int, ...]
    weight_load: TransferReport
    compute: ComputeReport


def forward(params: NNParameters, pixels: np.ndarray) -> tuple[int, tuple[int, ...]]:
    """Pure network evaluation; exact integer arithmetic throughout."""
    hidden = tuple(
        neuron_forward(pixels, params.hidden_weights[j], int(params.hidden_biases[j]))
        for j in range(HIDDEN_NEURONS)
    )
    out = neuron_forward(np.array(hidden, dtype=np.int64), params.output_weights, params.output_bias)
    return out, hidden


def infer(device: DeviceInstance, image, mac_cycles: int = 1, activation_cycles: int = 1) -> InferenceReport:
    """Load the stored weights into the staging buffer, then classify.

    The compute cost model is one cycle per multiply-accumulate plus one per
    activation; the staging buffer itself is free, so per-technology cost
    differences come entirely from the chip reads.
    """
    pixels = validate_image(image)
    params, load_report = load_parameters(device)
    prediction, hidden = forward(params, pixels)
    compute = ComputeReport(
        mac_count=MAC_COUNT,
        cycles=MAC_COUNT * mac_cycles + (HIDDEN_NEURONS + 1) * activation_cycles,
    )
    return InferenceReport(
        prediction=prediction,
        hidden_activations=hidden,
        weight_load=load_report,
        compute=compute,
    )


def predict_batch(params: NNParameters, images: np.ndarray) -> np.ndarray:
    """Vectorized predictions for an (n, 768) uint8 image matrix.

    Uses float64 matrix products, which are exact for these integer ranges
    (all intermediates stay far below 2**53); matches :func:`forward` bit for
    bit on every input.
    """
    a = np.asarray(images, dtype=np.float64)
    if a.ndim != 2 or a.shape[1] != INPUT_NEURONS:
        raise ValueError(f"images must be (n, {INPUT_NEURONS}), got {a.shape}")
    pre_h = a @ params.hidden_weights.astype(np.float64).T + params.hidden_biases.astype(np.float64)
    hidden = np.where(pre_h < 0.0, 0.0, 255.0)
    pre_o = hidden @ params.output_weights.astype(np.float64) + float(params.output_bias)
    return np.where(pre_o < 0.0, 0, 255).astype(np.int64)


# ---------------------------------------------------------------------------
# Cross-technology benchmark
# ---------------------------------------------------------------------------

BENCH_COLUMNS = (
    "weights_write_latency",
    "nn_application_latency",
    "erase_current",
    "byte_write_current",
)


@dataclass
class BenchmarkRow:
    technology: str
    label: str
    volatile: bool
    raw: dict
    normalized: dict


@dataclass
class BenchmarkTable:
    rows: list[BenchmarkRow]

    def to_json_dict(self) -> dict:
        return {
            "columns": list(BENCH_COLUMNS),
            "rows": [
                {
                    "technology": r.technology,
                    "label": r.label,
                    "volatile": r.volatile,
                    "raw": r.raw,
                    "normalized": r.normalized,
                }
                for r in self.rows
            ],
            "notes": self.notes(),
        }

    def notes(self) -> list[str]:
        notes = []
        if any(r.volatile for r in self.rows):
            vol = ", ".join(r.label for r in self.rows if r.volatile)
            notes.append(f"{vol}: volatile; weights must be reloaded on every power cycle.")
        return notes

    def normalized_column(self, column: str) -> dict:
        return {r.technology: r.normalized[column] for r in self.rows}

    def to_text(self) -> str:
        from .reports import format_au
        headers = ["Memory Type", "Weights Write", "NN Application", "Avg Erase", "Avg Byte Write"]
        body = [
            [r.label] + [format_au(r.normalized[c]) for c in BENCH_COLUMNS]
            for r in self.rows
        ]
        widths = [max(len(h), *(len(row[i]) for row in body)) for i, h in enumerate(headers)]
        lines = [
            "  ".join(h.ljust(widths[i]) for i, h in enumerate(headers)),
            "  ".join("-" * w for w in widths),
        ]
        lines += ["  ".join(c.ljust(widths[i]) for i, c in enumerate(row)) for row in body]
        lines += [f"note: {n}" for n in self.notes()]
        return "\n".join(lines)


def _normalize(values: dict) -> dict:
    top = max(values.values())
    out = {}
    for key, v in values.items():
        if v == top:
            out[key] = 1.0  # exact self-normalization, even for all-zero columns
        else:
            out[key] = v / top
    return out


def benchmark_technologies(profiles, params: NNParameters, image, seed: int = 0,
                           mac_cycles: int = 1, activation_cycles: int = 1) -> BenchmarkTable:
    """Per-technology weights-write/NN-application latency and erase/byte-write
    current, each column normalized to its own maximum.

    Latency columns come from running the parameter upload and an inference on
    a fresh chip per technology. Current columns report the model's calibrated
    averages: the pristine expected byte-write current for uniform random data
    and the per-erase current (zero for technologies without erase).
    """
    profiles = list(profiles)
    if not profiles:
        raise ValueError("at least one profile required")
    pixels = validate_image(image)
    raw: dict[str, dict[str, float]] = {c: {} for c in BENCH_COLUMNS}
    rows = []
    for profile in profiles:
        tech = profile.technology.value
        device = dev.create_device(profile, seed=seed)
        store = store_parameters(device, params)
        report = infer(device, pixels, mac_cycles=mac_cycles, activation_cycles=activation_cycles)
        raw["weights_write_latency"][tech] = float(store.latency_cycles)
        raw["nn_application_latency"][tech] = float(report.weight_load.latency_cycles + report.compute.cycles)
        raw["erase_current"][tech] = profile.erase.erase_current
        raw["byte_write_current"][tech] = profile.expected_byte_write_current()
    normalized = {c: _normalize(raw[c]) for c in BENCH_COLUMNS}
    for profile in profiles:
        tech = profile.technology.value
        rows.append(BenchmarkRow(
            technology=tech,
            label=profile.technology.label,
            volatile=profile.volatile,
            raw={c: raw[c][tech] for c in BENCH_COLUMNS},
            normalized={c: normalized[c][tech] for c in BENCH_COLUMNS},
        ))
    return BenchmarkTable(rows=rows)
