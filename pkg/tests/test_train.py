import numpy as np
import pytest

from nvmbench.nn import HIDDEN_NEURONS, INPUT_NEURONS, NNParameters, PARAM_BYTES
from nvmbench.train import (
    DEConfig,
    Dataset,
    DatasetError,
    de_train,
    evaluate,
    genome_to_params,
    make_brightness_dataset,
    make_contrast_dataset,
    quantize_genome,
)

from conftest import rng


# -- quantization ------------------------------------------------------------

def test_quantize_rounds_half_away_from_zero():
    g = np.array([0.5, -0.5, 1.5, -1.5, 2.4, -2.4, 0.49, -0.49])
    assert quantize_genome(g).tolist() == [1, -1, 2, -2, 2, -2, 0, 0]


def test_quantize_clamps_to_int8():
    g = np.array([-500.0, -128.4, 127.5, 4000.0])
    assert quantize_genome(g).tolist() == [-128, -128, 127, 127]


def test_quantize_idempotent():
    g = rng(0).uniform(-200, 200, PARAM_BYTES)
    once = quantize_genome(g)
    twice = quantize_genome(once.astype(np.float64))
    assert np.array_equal(once, twice)


def test_genome_to_params_layout():
    genome = np.arange(PARAM_BYTES, dtype=np.float64) % 7 - 3
    params = genome_to_params(genome)
    assert params.hidden_weights.shape == (HIDDEN_NEURONS, INPUT_NEURONS)
    assert params.to_bytes() == quantize_genome(genome).astype(np.int8).tobytes()


# -- datasets ----------------------------------------------------------------

def test_contrast_dataset_shape_and_balance():
    ds = make_contrast_dataset(count=209, seed=3)
    assert len(ds) == 209
    assert ds.images.shape == (209, INPUT_NEURONS)
    labels = ds.labels.tolist()
    assert labels.count(255) == 105 and labels.count(0) == 104


def test_contrast_classes_have_equal_total_brightness():
    ds = make_contrast_dataset(count=100, noise_sigma=0.0, seed=1)
    bright_sum = ds.images[ds.labels == 255].sum(axis=1).mean()
    dark_sum = ds.images[ds.labels == 0].sum(axis=1).mean()
    assert bright_sum == pytest.approx(dark_sum, rel=1e-9)


def test_dataset_rejects_single_class():
    images = np.zeros((4, INPUT_NEURONS), dtype=np.uint8)
    with pytest.raises(DatasetError):
        Dataset(images=images, labels=np.zeros(4, dtype=np.uint8))


def test_dataset_rejects_bad_labels():
    images = np.zeros((2, INPUT_NEURONS), dtype=np.uint8)
    with pytest.raises(DatasetError):
        Dataset(images=images, labels=np.array([0, 7], dtype=np.uint8))


def test_dataset_generator_metadata_recorded():
    ds = make_contrast_dataset(count=10, seed=5)
    assert ds.generator["kind"] == "contrast"
    assert ds.generator["seed"] == 5


# -- evaluate ----------------------------------------------------------------

def test_constant_classifier_scores_majority_rate():
    ds = make_brightness_dataset(count=200, seed=1)  # exactly balanced
    always_255 = NNParameters.zeros()  # pre-activation 0 everywhere -> 255
    assert evaluate(always_255, ds) == 0.5


def test_evaluate_matches_per_sample_oracle():
    from nvmbench.nn import forward
    ds = make_contrast_dataset(count=40, seed=2)
    r = rng(3)
    params = genome_to_params(r.uniform(-128, 127, PARAM_BYTES))
    correct = sum(forward(params, img)[0] == int(label) for img, label in zip(ds.images, ds.labels))
    assert evaluate(params, ds) == correct / len(ds)


def test_handbuilt_threshold_weights_achieve_perfect_accuracy():
    # Zero-noise bright/dark blobs; a single hidden neuron thresholds one
    # pixel against the int8 bias and the output layer passes it through.
    ds = make_brightness_dataset(count=60, dark=70, bright=185, noise_sigma=0.0, seed=4)
    hw = np.zeros((HIDDEN_NEURONS, INPUT_NEURONS), dtype=np.int8)
    hw[0, 0] = 1                      # read pixel 0 (value 70 or 185)
    hb = np.array([-128, 0, 0, 0, 0, 0, 0], dtype=np.int8)
    ow = np.array([1, 0, 0, 0, 0, 0, 0], dtype=np.int8)
    params = NNParameters(hidden_weights=hw, hidden_biases=hb, output_weights=ow, output_bias=-1)
    # dark: 70-128 < 0 -> hidden 0 -> output -1 < 0 -> 0
    # bright: 185-128 >= 0 -> hidden 255 -> output 254 >= 0 -> 255
    assert evaluate(params, ds) == 1.0


# -- DE training -------------------------------------------------------------

def test_config_validation():
    with pytest.raises(ValueError):
        DEConfig(population_size=3).validate()
    with pytest.raises(ValueError):
        DEConfig(differential_weight=0.0).validate()
    with pytest.raises(ValueError):
        DEConfig(differential_weight=2.5).validate()
    with pytest.raises(ValueError):
        DEConfig(crossover_rate=1.2).validate()
    with pytest.raises(ValueError):
        DEConfig(generations=-1).validate()


def test_zero_generations_returns_best_initial(profiles):
    ds = make_brightness_dataset(count=80, seed=6)
    config = DEConfig(population_size=12, generations=0, seed=2)
    result = de_train(ds, config)
    assert result.generations_run == 0
    assert len(result.history) == 1
    assert result.history[0] == result.accuracy
    # at least the better constant classifier is available among 12 randoms
    assert result.accuracy >= 0.5


def test_training_is_deterministic():
    ds = make_contrast_dataset(count=60, seed=8)
    config = DEConfig(population_size=10, generations=8, seed=5)
    r1 = de_train(ds, config)
    r2 = de_train(ds, config)
    assert r1.best.to_bytes() == r2.best.to_bytes()
    assert r1.history == r2.history


def test_history_nondecreasing_and_best_dominates_initials():
    ds = make_contrast_dataset(count=80, seed=9)
    config = DEConfig(population_size=10, generations=15, seed=3)
    result = de_train(ds, config)
    assert len(result.history) == 16
    assert all(a <= b for a, b in zip(result.history, result.history[1:]))
    assert result.accuracy >= result.history[0]
    assert result.accuracy == result.history[-1]


def test_training_improves_on_easy_data():
    ds = make_contrast_dataset(count=80, noise_sigma=60.0, seed=10)
    config = DEConfig(population_size=16, generations=40, seed=4)
    result = de_train(ds, config)
    assert result.accuracy >= 0.9
    assert result.accuracy >= result.history[0]


def test_evolved_parameters_lie_in_int8_range():
    ds = make_contrast_dataset(count=40, seed=11)
    result = de_train(ds, DEConfig(population_size=8, generations=5, seed=1))
    blob = np.frombuffer(result.best.to_bytes(), dtype=np.int8)
    assert blob.min() >= -128 and blob.max() <= 127


def test_target_accuracy_stops_early():
    ds = make_contrast_dataset(count=60, noise_sigma=0.0, seed=12)
    config = DEConfig(population_size=16, generations=500, seed=2, target_accuracy=0.9)
    result = de_train(ds, config)
    assert result.accuracy >= 0.9
    assert result.generations_run < 500
