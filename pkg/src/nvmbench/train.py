"""Differential-evolution training for the integer network.

Classic DE/rand/1/bin over a flat real-valued genome of length 5391. The
genome is quantized at every fitness evaluation (round half away from zero,
clamp to [-128, 127]) and scored as classification accuracy with error-free
in-memory inference, so evolution works in a continuous space while the
phenotype is always a valid integer network.

The bundled dataset generator produces two balanced-contrast image classes:
one class is bright on the left half of the frame and dark on the right, the
other is mirrored, with Gaussian pixel noise. Both classes have the same
total brightness, which keeps random integer step neurons from saturating
into constant classifiers (a plain bright-vs-dark blob pair is untrainable
here: with int8 biases no threshold can reach the whole-image sum). A
brightness-labeled variant is available for experiments that want it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .nn import (
    HIDDEN_NEURONS,
    INPUT_NEURONS,
    NNParameters,
    PARAM_BYTES,
    predict_batch,
)

IMAGE_SIDE = 16
CHANNELS = 3


class DatasetError(ValueError):
    """Degenerate dataset (too small or single-class)."""


@dataclass(frozen=True)
class DEConfig:
    population_size: int = 40
    differential_weight: float = 0.7
    crossover_rate: float = 0.9
    generations: int = 300
    seed: int = 1
    target_accuracy: float | None = None

    def validate(self) -> "DEConfig":
        if self.population_size < 4:
            raise ValueError("population_size must be >= 4")
        if not 0.0 < self.differential_weight <= 2.0:
            raise ValueError("differential_weight must be in (0, 2]")
        if not 0.0 <= self.crossover_rate <= 1.0:
            raise ValueError("crossover_rate must be in [0, 1]")
        if self.generations < 0:
            raise ValueError("generations must be >= 0")
        if self.target_accuracy is not None and not 0.0 <= self.target_accuracy <= 1.0:
            raise ValueError("target_accuracy must be in [0, 1]")
        return self


@dataclass
class Dataset:
    images: np.ndarray  # (n, 768) uint8
    labels: np.ndarray  # (n,) uint8, values in {0, 255}
    generator: dict = field(default_factory=dict)

    def __post_init__(self):
        self.images = np.ascontiguousarray(self.images, dtype=np.uint8)
        self.labels = np.ascontiguousarray(self.labels, dtype=np.uint8)
        if self.images.ndim != 2 or self.images.shape[1] != INPUT_NEURONS:
            raise DatasetError(f"images must be (n, {INPUT_NEURONS}), got {self.images.shape}")
        if self.labels.shape != (len(self.images),):
            raise DatasetError("labels must match images")
        if not set(np.unique(self.labels)) <= {0, 255}:
            raise DatasetError("labels must be 0 or 255")
        if len(self.images) < 2 or len(set(np.unique(self.labels))) < 2:
            raise DatasetError("need at least 2 samples covering both labels")

    def __len__(self) -> int:
        return len(self.images)


def _left_mask() -> np.ndarray:
    """Boolean mask over the 768 pixel bytes for the left 8 columns."""
    idx = np.arange(INPUT_NEURONS)
    col = (idx // CHANNELS) % IMAGE_SIDE
    return col < IMAGE_SIDE // 2


def make_contrast_dataset(count: int = 209, dark: float = 70.0, bright: float = 185.0,
                          noise_sigma: float = 80.0, seed: int = 7) -> Dataset:
    """Two mirrored left/right contrast classes with Gaussian pixel noise.

    Label 255: bright left half, dark right half; label 0: mirrored.
    """
    if count < 2:
        raise DatasetError("count must be >= 2")
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    left = _left_mask()
    n_pos = count // 2 + count % 2
    labels = np.array([255] * n_pos + [0] * (count - n_pos), dtype=np.uint8)
    mean_pos = np.where(left, bright, dark)
    mean_neg = np.where(left, dark, bright)
    images = np.empty((count, INPUT_NEURONS), dtype=np.uint8)
    for i, label in enumerate(labels):
        mu = mean_pos if label == 255 else mean_neg
        pix = mu + rng.standard_normal(INPUT_NEURONS) * noise_sigma
        images[i] = np.clip(np.rint(pix), 0, 255).astype(np.uint8)
    return Dataset(images=images, labels=labels, generator={
        "kind": "contrast",
        "count": count,
        "dark": dark,
        "bright": bright,
        "noise_sigma": noise_sigma,
        "seed": seed,
    })


def make_brightness_dataset(count: int = 209, dark: float = 70.0, bright: float = 185.0,
                            noise_sigma: float = 20.0, seed: int = 7) -> Dataset:
    """Uniformly bright images labeled 255 versus uniformly dark labeled 0."""
    if count < 2:
        raise DatasetError("count must be >= 2")
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    n_pos = count // 2 + count % 2
    labels = np.array([255] * n_pos + [0] * (count - n_pos), dtype=np.uint8)
    images = np.empty((count, INPUT_NEURONS), dtype=np.uint8)
    for i, label in enumerate(labels):
        mu = bright if label == 255 else dark
        pix = mu + rng.standard_normal(INPUT_NEURONS) * noise_sigma
        images[i] = np.clip(np.rint(pix), 0, 255).astype(np.uint8)
    return Dataset(images=images, labels=labels, generator={
        "kind": "brightness",
        "count": count,
        "dark": dark,
        "bright": bright,
        "noise_sigma": noise_sigma,
        "seed": seed,
    })


# ---------------------------------------------------------------------------
# Genome handling
# ---------------------------------------------------------------------------

def quantize_genome(genome: np.ndarray) -> np.ndarray:
    """Round half away from zero, clamp to int8 range. Idempotent."""
    g = np.asarray(genome, dtype=np.float64)
    rounded = np.sign(g) * np.floor(np.abs(g) + 0.5)
    return np.clip(rounded, -128, 127).astype(np.int8)


def genome_to_params(genome: np.ndarray) -> NNParameters:
    q = quantize_genome(genome)
    if q.shape != (PARAM_BYTES,):
        raise ValueError(f"genome must have {PARAM_BYTES} entries, got {q.shape}")
    n = HIDDEN_NEURONS * INPUT_NEURONS
    return NNParameters(
        hidden_weights=q[:n].reshape(HIDDEN_NEURONS, INPUT_NEURONS),
        hidden_biases=q[n:n + HIDDEN_NEURONS],
        output_weights=q[n + HIDDEN_NEURONS:n + 2 * HIDDEN_NEURONS],
        output_bias=int(q[-1]),
    )


def evaluate(params: NNParameters, dataset: Dataset) -> float:
    """Fraction of samples classified correctly (error-free inference)."""
    predictions = predict_batch(params, dataset.images)
    return float(np.mean(predictions == dataset.labels.astype(np.int64)))


# ---------------------------------------------------------------------------
# DE/rand/1/bin
# ---------------------------------------------------------------------------

@dataclass
class TrainResult:
    best: NNParameters
    accuracy: float
    history: list[float]
    generations_run: int
    config: DEConfig


def de_train(dataset: Dataset, config: DEConfig = DEConfig()) -> TrainResult:
    """Evolve the genome population; returns the best quantized individual.

    ``history[0]`` is the best initial fitness, followed by one entry per
    generation; it is non-decreasing because selection never discards a
    better target. Fitness evaluations within a generation are independent
    (safe to parallelize); selection applies in index order.
    """
    config.validate()
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(config.seed)))
    np_, dim = config.population_size, PARAM_BYTES
    population = rng.uniform(-128.0, 127.0, size=(np_, dim))
    fitness = np.array([evaluate(genome_to_params(population[i]), dataset) for i in range(np_)])
    history = [float(fitness.max())]
    generations_run = 0
    f, cr = config.differential_weight, config.crossover_rate
    for _ in range(config.generations):
        if config.target_accuracy is not None and history[-1] >= config.target_accuracy:
            break
        for i in range(np_):
            r1, r2, r3 = _pick_distinct(rng, np_, i)
            mutant = population[r1] + f * (population[r2] - population[r3])
            cross = rng.random(dim) < cr
            cross[rng.integers(dim)] = True
            trial = np.where(cross, mutant, population[i])
            trial_fit = evaluate(genome_to_params(trial), dataset)
            if trial_fit >= fitness[i]:
                population[i] = trial
                fitness[i] = trial_fit
        history.append(float(fitness.max()))
        generations_run += 1
    best_idx = int(np.argmax(fitness))  # ties resolve to the lowest index
    best = genome_to_params(population[best_idx])
    return TrainResult(
        best=best,
        accuracy=float(fitness[best_idx]),
        history=history,
        generations_run=generations_run,
        config=config,
    )


def _pick_distinct(rng: np.random.Generator, n: int, exclude: int) -> tuple[int, int, int]:
    """Three distinct population indices, all different from ``exclude``."""
    picks = []
    while len(picks) < 3:
        c = int(rng.integers(n))
        if c != exclude and c not in picks:
            picks.append(c)
    return picks[0], picks[1], picks[2]
