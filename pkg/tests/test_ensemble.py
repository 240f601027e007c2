"""Ensemble strategy tests.

The brute-force oracle works on integer probability grids (all values are
sixteenths), where float64 arithmetic is exact, so implementation and
oracle must agree bit for bit. The acceptance suite widens this sweep; the
versions here pin behaviour per strategy.
"""

import random

import numpy as np
import pytest

from smearkit.ensemble import (
    EnsembleConfig,
    majority_vote,
    parse_predictions_csv,
    predictions_to_csv,
    result_scores_matrix,
    run_ensemble,
    sum_of_probabilities,
    weighted_sum,
)
from smearkit.errors import DataError
from smearkit.predict_io import ModelBundle, ProbabilityMatrix

DENOM = 16


def bundle_from_rows(per_model_rows, classes=None, ids=None):
    n_samples = len(per_model_rows[0])
    m = len(per_model_rows[0][0])
    classes = classes or tuple(f"c{j}" for j in range(m))
    ids = ids or tuple(f"s{i}" for i in range(n_samples))
    return ModelBundle(tuple(
        ProbabilityMatrix(f"model_{k}", classes, ids, np.array(rows, dtype=np.float64))
        for k, rows in enumerate(per_model_rows)
    ))


def random_grid_bundle(gen, n_models, m, n_samples):
    """Bundle whose probabilities are integer multiples of 1/16."""
    grids = []
    for _ in range(n_models):
        grid = []
        for _ in range(n_samples):
            cuts = sorted(gen.randrange(DENOM + 1) for _ in range(m - 1))
            parts = [b - a for a, b in zip([0] + cuts, cuts + [DENOM])]
            grid.append(parts)
        grids.append(grid)
    bundle = bundle_from_rows([[[p / DENOM for p in row] for row in grid]
                               for grid in grids])
    return grids, bundle


def int_argmax(values):
    best = max(values)
    return values.index(best), sum(1 for v in values if v == best) > 1


def oracle_sum(grids):
    """Exact integer sum-of-probabilities predictions and tie flags."""
    n_samples, m = len(grids[0]), len(grids[0][0])
    preds, ties = [], []
    for i in range(n_samples):
        sums = [sum(grid[i][j] for grid in grids) for j in range(m)]
        p, t = int_argmax(sums)
        preds.append(p)
        ties.append(t)
    return preds, ties


def oracle_majority(grids):
    """Exact integer majority vote with the summed-probability fallback."""
    n_samples, m = len(grids[0]), len(grids[0][0])
    preds, ties = [], []
    for i in range(n_samples):
        votes = [0] * m
        for grid in grids:
            pick, _ = int_argmax(grid[i])
            votes[pick] += 1
        top = max(votes)
        tied = [j for j in range(m) if votes[j] == top]
        if len(tied) == 1:
            preds.append(tied[0])
            ties.append(False)
            continue
        sums = [sum(grid[i][j] for grid in grids) for j in tied]
        best = max(sums)
        preds.append(tied[sums.index(best)])
        ties.append(True)
    return preds, ties


def test_three_model_probability_sums_golden():
    bundle = bundle_from_rows([
        [[0.6, 0.3, 0.1]],
        [[0.4, 0.4, 0.2]],
        [[0.3, 0.4, 0.3]],
    ])
    result = sum_of_probabilities(bundle)
    np.testing.assert_allclose(result.raw_sums[0], [1.3, 1.1, 0.6],
                               rtol=0, atol=1e-12)
    np.testing.assert_allclose(result.normalized[0],
                               [13 / 30, 11 / 30, 6 / 30], rtol=0, atol=1e-12)
    assert result.predictions[0] == 0
    assert result.predicted_labels == ["c0"]
    assert not result.ties[0]


def test_sum_matches_integer_oracle():
    gen = random.Random(404)
    for _ in range(300):
        n_models = gen.randrange(1, 5)
        m = gen.randrange(2, 6)
        n_samples = gen.randrange(1, 8)
        grids, bundle = random_grid_bundle(gen, n_models, m, n_samples)
        result = sum_of_probabilities(bundle)
        exp_preds, exp_ties = oracle_sum(grids)
        assert result.predictions.tolist() == exp_preds
        assert result.ties.tolist() == exp_ties


def test_majority_matches_integer_oracle():
    gen = random.Random(405)
    for _ in range(300):
        n_models = gen.randrange(1, 5)
        m = gen.randrange(2, 6)
        n_samples = gen.randrange(1, 8)
        grids, bundle = random_grid_bundle(gen, n_models, m, n_samples)
        result = majority_vote(bundle)
        exp_preds, exp_ties = oracle_majority(grids)
        assert result.predictions.tolist() == exp_preds
        assert result.ties.tolist() == exp_ties


def test_majority_clear_winner():
    bundle = bundle_from_rows([
        [[0.8, 0.1, 0.1]],
        [[0.7, 0.2, 0.1]],
        [[0.1, 0.8, 0.1]],
    ])
    result = majority_vote(bundle)
    assert result.predictions[0] == 0
    assert result.raw_sums[0].tolist() == [2.0, 1.0, 0.0]
    assert result.normalized[0].tolist() == [2 / 3, 1 / 3, 0.0]
    assert not result.ties[0]


def test_majority_vote_tie_falls_back_to_sums():
    # One vote each; class 1 holds the larger probability mass among the
    # tied classes, so the fallback picks it.
    bundle = bundle_from_rows([
        [[0.5, 0.25, 0.25]],
        [[0.125, 0.625, 0.25]],
    ])
    result = majority_vote(bundle)
    assert result.ties[0]
    assert result.predictions[0] == 1


def test_majority_fallback_restricted_to_tied_classes():
    # Class 2 has the largest sum overall but no votes; the fallback may
    # only consider the vote-tied classes 0 and 1.
    bundle = bundle_from_rows([
        [[0.5, 0.0625, 0.4375]],
        [[0.0625, 0.5, 0.4375]],
    ])
    result = majority_vote(bundle)
    assert result.ties[0]
    assert result.predictions[0] == 0  # sums: 0.5625 vs 0.5625 -> lowest index


def test_exact_tie_takes_lowest_index():
    bundle = bundle_from_rows([[[0.5, 0.5]]])
    result = sum_of_probabilities(bundle)
    assert result.predictions[0] == 0
    assert result.ties[0]


def test_weighted_equal_weights_match_plain_sum():
    gen = random.Random(406)
    grids, bundle = random_grid_bundle(gen, 3, 4, 10)
    plain = sum_of_probabilities(bundle)
    weighted = weighted_sum(bundle, [1.0, 1.0, 1.0])
    assert weighted.predictions.tolist() == plain.predictions.tolist()
    np.testing.assert_array_equal(weighted.raw_sums, plain.raw_sums)


def test_weighted_matches_integer_oracle():
    gen = random.Random(407)
    for _ in range(200):
        n_models = gen.randrange(1, 5)
        m = gen.randrange(2, 5)
        grids, bundle = random_grid_bundle(gen, n_models, m, 6)
        weights = [gen.randrange(0, 4) for _ in range(n_models)]
        if sum(weights) == 0:
            weights[0] = 1
        result = weighted_sum(bundle, [float(w) for w in weights])
        for i in range(6):
            sums = [sum(w * grid[i][j] for w, grid in zip(weights, grids))
                    for j in range(m)]
            exp, _ = int_argmax(sums)
            assert result.predictions[i] == exp


def test_single_model_passthrough_argmax():
    gen = random.Random(408)
    grids, bundle = random_grid_bundle(gen, 1, 4, 25)
    result = sum_of_probabilities(bundle)
    for i, row in enumerate(grids[0]):
        exp, _ = int_argmax(row)
        assert result.predictions[i] == exp
        np.testing.assert_allclose(result.normalized[i],
                                   np.array(row) / DENOM, rtol=0, atol=1e-15)


def test_normalization_never_changes_argmax():
    gen = random.Random(409)
    numpy_gen = np.random.Generator(np.random.Philox(409))
    for _ in range(1000):
        n_models = gen.randrange(1, 5)
        raw = numpy_gen.random((6, 3))
        rows = raw / raw.sum(axis=1, keepdims=True)
        bundle = bundle_from_rows([rows.tolist() for _ in range(n_models)])
        result = sum_of_probabilities(bundle)
        assert np.array_equal(np.argmax(result.raw_sums, axis=1),
                              result.predictions)
        assert np.array_equal(np.argmax(result.normalized, axis=1),
                              result.predictions)
        assert result.normalized.sum(axis=1) == pytest.approx(1.0, abs=1e-12)


def test_weight_validation():
    bundle = bundle_from_rows([[[0.5, 0.5]], [[0.25, 0.75]]])
    with pytest.raises(ValueError):
        weighted_sum(bundle, [1.0])
    with pytest.raises(ValueError):
        weighted_sum(bundle, [1.0, -1.0])
    with pytest.raises(ValueError):
        weighted_sum(bundle, [0.0, 0.0])


def test_config_validation_and_dispatch():
    with pytest.raises(ValueError):
        EnsembleConfig(strategy="averaging")
    with pytest.raises(ValueError):
        EnsembleConfig(strategy="weighted_sum")
    bundle = bundle_from_rows([[[0.25, 0.75]], [[0.75, 0.25]]])
    assert run_ensemble(bundle, EnsembleConfig()).strategy == "sum_of_probabilities"
    weighted = run_ensemble(bundle, EnsembleConfig("weighted_sum", (2.0, 1.0)))
    assert weighted.strategy == "weighted_sum"
    assert weighted.predictions[0] == 1
    assert run_ensemble(bundle, EnsembleConfig("majority_vote")).strategy == "majority_vote"


def test_result_scores_matrix_is_valid_probability_matrix():
    bundle = bundle_from_rows([[[0.5, 0.25, 0.25], [0.125, 0.25, 0.625]]])
    pm = result_scores_matrix(sum_of_probabilities(bundle))
    assert pm.model_name == "ensemble_sum_of_probabilities"
    assert pm.sample_ids == ("s0", "s1")
    assert pm.rows.sum(axis=1) == pytest.approx(1.0, abs=1e-12)


def test_predictions_csv_round_trip(tmp_path):
    bundle = bundle_from_rows([[[0.5, 0.5], [0.25, 0.75]]],
                              classes=("neg", "pos"), ids=("a", "b"))
    result = sum_of_probabilities(bundle)
    text = predictions_to_csv(result)
    assert text.splitlines()[0] == "sample_id,predicted_label,tie_flag"
    rows = parse_predictions_csv(text)
    assert rows == [("a", "neg", True), ("b", "pos", False)]
    p = tmp_path / "preds.csv"
    p.write_text(text)
    assert parse_predictions_csv(p) == rows


def test_parse_predictions_errors():
    with pytest.raises(DataError):
        parse_predictions_csv("wrong,header,x\na,b,0\n")
    with pytest.raises(DataError):
        parse_predictions_csv("sample_id,predicted_label,tie_flag\na,b,maybe\n")
    with pytest.raises(DataError):
        parse_predictions_csv("sample_id,predicted_label,tie_flag\na,b,0\na,c,0\n")
    with pytest.raises(DataError):
        parse_predictions_csv("sample_id,predicted_label,tie_flag\n")
    with pytest.raises(DataError):
        parse_predictions_csv("sample_id,predicted_label,tie_flag\na,b\n")
