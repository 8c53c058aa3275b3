import json
import logging
import math
import os
import tempfile
from io import StringIO
from pathlib import Path

import numpy as np
from django.conf import settings
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase, TestCase, override_settings, tag
from hypothesis import given
from hypothesis import settings as hypothesis_settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from .architectures import (
    Architecture,
    Model,
    ModelConfig,
    build_model,
    count_parameters,
    head_parameter_count,
    score_batch,
    score_encoded,
    score_pair,
    table_formula,
)
from .bench import fit_slopes, run_bench
from .bm25 import bm25_run, bm25_score, index_corpus, sample_negatives, top_hits
from .checkpoints import check_vocabulary_coverage, load_checkpoint, save_checkpoint
from .config import DEFAULT_OUTPUT_DIR, build_manifest, load_config_file, parse_config_text
from .constants import PAD_ID, STOPWORDS, UNK_ID
from .data import (
    QADataset,
    QAInstance,
    Vocabulary,
    build_cqa_dataset,
    build_vocabulary,
    compute_idf,
    dataset_statistics,
    encode_and_pad,
    encode_dataset,
    filter_by_length,
    load_dataset,
    load_pretrained_embeddings,
    overlap_features,
    write_dataset,
)
from .evaluation import (
    average_precision,
    build_run,
    evaluate_run,
    mean_average_precision,
    mean_reciprocal_rank,
    precision_at_1,
    random_guess_run,
    read_qrels,
    read_run_file,
    reciprocal_rank,
    write_qrels,
    write_run_file,
)
from .exceptions import (
    CheckpointError,
    ConfigError,
    ContractError,
    DataFormatError,
    DimensionError,
    EmptyRunError,
    NumericError,
    UnknownDocumentError,
    VocabularyError,
)
from .gradcheck import finite_difference_check, gradient_check
from .holo import (
    CompositionBackend,
    approximate_inverse,
    circular_convolution,
    circular_correlation,
    compose,
    correlate,
    correlation_backward,
    zero_pad,
)
from .layers import (
    EmbeddingTable,
    HoloHeadParams,
    NtnParams,
    bilinear_similarity,
    embed,
    holographic_head,
    init_head_params,
    init_lstm_params,
    init_ntn_params,
    lstm_forward,
    lstm_parameter_count,
    ntn_score,
    softmax2,
)
from .models import TrainingRun
from .runs import mark_run_failed, record_epoch, start_training_run
from .synthetic import make_synthetic_corpus
from .tensor import (
    Tape,
    Tensor,
    add,
    backward,
    clamp,
    concat_cols,
    constant,
    dot,
    exp,
    log,
    matmul,
    mul,
    parameter,
    reshape,
    row_sum,
    sigmoid,
    softmax_rows,
    stack_rows,
    take_column,
    take_row,
    tanh,
)
from .tensor import sum as tensor_sum
from .trainer import (
    OptimizerState,
    TrainConfig,
    adam_step,
    batch_loss,
    clip_gradients,
    evaluate_model,
    global_norm,
    loss,
    train,
    train_step,
)

logger = logging.getLogger(__name__)

GRAD_TOLERANCE = 1e-4
MIXED_LENGTHS = (1, 2, 3, 7, 8, 50, 64, 127, 512, 640)


def weighted_sum(tensor, weights):
    return tensor_sum(mul(tensor, constant(weights)))


def rebind(model, tensors):
    parts = {"q_lstm": {}, "a_lstm": {}, "head": {}}
    for name, tensor in tensors.items():
        prefix, local = name.split(".", 1)
        parts[prefix][local] = tensor
    return Model(
        model.config,
        model.embeddings,
        model.q_lstm.replace(parts["q_lstm"]),
        model.a_lstm.replace(parts["a_lstm"]),
        model.head.replace(parts["head"]),
    )


def small_corpus(seed=3, train_questions=12, dev_questions=6, test_questions=6, negatives=2):
    splits = make_synthetic_corpus(train_questions, dev_questions, test_questions, negatives=negatives, seed=seed)
    vocab = build_vocabulary(*splits.values())
    idf = compute_idf(splits["train"].documents())
    return splits, vocab, idf


def small_model(vocab, architecture="hdlstm", seed=7, **overrides):
    values = dict(
        architecture=architecture,
        embed_dim=4,
        lstm_dim=4,
        lstm_layers=1,
        use_overlap_feats=True,
        max_len_q=6,
        max_len_a=10,
        dropout_rate=0.0,
        precision="f64",
        seed=seed,
    )
    if architecture == "ntnlstm":
        values["ntn_slices"] = 2
    else:
        values["hidden_dim"] = 3
    values.update(overrides)
    embeddings = EmbeddingTable(np.random.default_rng(11).normal(0.0, 0.5, size=(len(vocab), 4)))
    return build_model(ModelConfig(**values), embeddings)


def encode_split(dataset, vocab, idf, model):
    config = model.config
    return encode_dataset(
        dataset,
        vocab,
        config.max_len_q,
        config.max_len_a,
        idf=idf,
        stopwords=STOPWORDS,
        with_features=config.use_overlap_feats,
    )


class TensorTapeTests(SimpleTestCase):
    def test_matmul_matches_hand_arithmetic_and_identity(self):
        product = matmul(Tensor([[1.0, 2.0], [3.0, 4.0]]), Tensor([[5.0], [6.0]]))
        np.testing.assert_array_equal(product.numpy(), [[17.0], [39.0]])

        b = np.random.default_rng(0).standard_normal((3, 2))
        np.testing.assert_array_equal(matmul(Tensor(np.eye(3)), Tensor(b)).numpy(), b)

    def test_matmul_matches_triple_loop(self):
        rng = np.random.default_rng(1)
        a = rng.standard_normal((3, 4))
        b = rng.standard_normal((4, 2))
        expected = np.zeros((3, 2))
        for i in range(3):
            for j in range(2):
                for k in range(4):
                    expected[i, j] += a[i, k] * b[k, j]
        np.testing.assert_allclose(matmul(Tensor(a), Tensor(b)).numpy(), expected, atol=1e-12)

    def test_matmul_shape_mismatch_names_both_shapes(self):
        with self.assertRaises(DimensionError) as raised:
            matmul(Tensor(np.ones((2, 2))), Tensor(np.ones((3, 1))))
        self.assertIn("(2, 2)", str(raised.exception))
        self.assertIn("(3, 1)", str(raised.exception))

    def test_pointwise_values(self):
        self.assertEqual(sigmoid(Tensor(0.0)).item(), 0.5)
        self.assertEqual(tanh(Tensor(0.0)).item(), 0.0)
        self.assertAlmostEqual(sigmoid(Tensor(1.0)).item(), 1.0 / (1.0 + math.exp(-1.0)), places=12)

    def test_add_broadcasts_only_a_row_bias(self):
        rows = Tensor(np.ones((2, 3)))
        np.testing.assert_array_equal(add(rows, Tensor([1.0, 2.0, 3.0])).numpy(), [[2, 3, 4], [2, 3, 4]])
        with self.assertRaises(DimensionError):
            add(rows, Tensor([1.0, 2.0]))
        with self.assertRaises(DimensionError):
            mul(rows, Tensor(np.ones((3, 2))))

    def test_tensor_values_are_read_only(self):
        tensor = Tensor([1.0, 2.0])
        with self.assertRaises(ValueError):
            tensor.data[0] = 5.0

    def test_gradient_of_sum_is_all_ones(self):
        x = parameter(np.arange(6.0).reshape(2, 3))
        with Tape():
            total = tensor_sum(x)
        backward(total)
        np.testing.assert_array_equal(x.grad, np.ones((2, 3)))

    def test_gradient_of_dot_with_itself_is_twice_the_input(self):
        x = parameter([1.0, 2.0])
        with Tape():
            total = dot(x, x)
        backward(total)
        np.testing.assert_array_equal(x.grad, [2.0, 4.0])

    def test_constants_never_receive_gradients(self):
        x = parameter([1.0, 2.0])
        fixed = constant([3.0, 4.0])
        with Tape():
            total = dot(x, fixed)
        backward(total)
        self.assertIsNone(fixed.grad)
        np.testing.assert_array_equal(x.grad, [3.0, 4.0])

    def test_second_backward_on_the_same_tape_is_rejected(self):
        x = parameter([1.0, 2.0])
        with Tape():
            total = dot(x, x)
        backward(total)
        with self.assertRaises(ContractError):
            backward(total)

    def test_backward_needs_a_scalar_recorded_loss(self):
        x = parameter([1.0, 2.0])
        with Tape():
            doubled = add(x, x)
        with self.assertRaises(ContractError):
            backward(doubled)
        with self.assertRaises(ContractError):
            backward(dot(x, x))

    def test_softmax_rejects_non_finite_logits(self):
        with self.assertRaises(NumericError):
            softmax_rows(Tensor([[np.nan, 0.0]]))

    def test_log_rejects_non_positive_input(self):
        with self.assertRaises(NumericError):
            log(Tensor([0.0, 1.0]))

    def test_every_primitive_matches_central_differences(self):
        rng = np.random.default_rng(2)
        matrix = rng.standard_normal((3, 4))
        weights = rng.standard_normal((3, 4))
        positive = rng.uniform(0.5, 2.0, size=(3, 4))
        cases = {
            "sigmoid": (lambda x: weighted_sum(sigmoid(x), weights), [matrix]),
            "tanh": (lambda x: weighted_sum(tanh(x), weights), [matrix]),
            "exp": (lambda x: weighted_sum(exp(x), weights), [matrix]),
            "log": (lambda x: weighted_sum(log(x), weights), [positive]),
            "clamp": (lambda x: weighted_sum(clamp(x, 0.1, 10.0), weights), [positive]),
            "softmax_rows": (lambda x: weighted_sum(softmax_rows(x), weights), [matrix]),
            "matmul": (lambda a, b: tensor_sum(matmul(a, b)), [matrix, rng.standard_normal((4, 2))]),
            "bias_add": (lambda a, b: weighted_sum(add(a, b), weights), [matrix, rng.standard_normal(4)]),
            "row_sum": (lambda x: tensor_sum(mul(row_sum(x), constant(weights[:, :1]))), [matrix]),
            "concat_cols": (
                lambda a, b: weighted_sum(concat_cols([a, b]), np.hstack([weights, weights[:, :1]])),
                [matrix, rng.standard_normal((3, 1))],
            ),
            "stack_rows": (
                lambda a, b: weighted_sum(stack_rows([a, b]), weights[:2]),
                [rng.standard_normal(4), rng.standard_normal(4)],
            ),
            "take_row": (lambda x: weighted_sum(take_row(x, 1), weights[:1]), [matrix]),
            "take_column": (lambda x: weighted_sum(take_column(x, 2), weights[:, 0]), [matrix]),
            "reshape": (lambda x: weighted_sum(reshape(x, (4, 3)), weights.reshape(4, 3)), [matrix]),
        }
        for name, (function, inputs) in cases.items():
            with self.subTest(primitive=name):
                self.assertLess(gradient_check(function, inputs), GRAD_TOLERANCE)

    def test_gradient_check_reference_points(self):
        self.assertLess(finite_difference_check(lambda x: tensor_sum(sigmoid(x)), np.zeros(5)), 1e-7)
        self.assertLess(finite_difference_check(tensor_sum, np.arange(4.0)), 1e-9)

    def test_gradient_check_rejects_non_deterministic_functions(self):
        calls = []

        def drifting(x):
            calls.append(1)
            return tensor_sum(mul(x, constant(np.full(x.shape, float(len(calls))))))

        with self.assertRaises(ContractError):
            gradient_check(drifting, [np.ones(3)])


class HolographicCompositionTests(SimpleTestCase):
    def test_correlation_examples(self):
        a = np.array([4.0, -1.0, 2.5, 7.0])
        e0 = np.eye(4)[0]
        np.testing.assert_allclose(circular_correlation(e0, a), a, atol=1e-12)
        np.testing.assert_allclose(circular_correlation([1.0, 2.0, 3.0], [4.0, 5.0, 6.0]), [32, 29, 29], atol=1e-10)

    def test_correlation_is_not_commutative(self):
        e0, e1, e3 = np.eye(4)[0], np.eye(4)[1], np.eye(4)[3]
        np.testing.assert_allclose(circular_correlation(e1, e0), e3, atol=1e-12)
        np.testing.assert_allclose(circular_correlation(e0, e1), e1, atol=1e-12)

    def test_convolution_examples(self):
        a = np.array([4.0, -1.0, 2.5])
        np.testing.assert_allclose(circular_convolution(np.eye(3)[0], a), a, atol=1e-12)
        np.testing.assert_allclose(circular_convolution([1.0, 2.0, 3.0], [4.0, 5.0, 6.0]), [31, 31, 28], atol=1e-10)

    def test_approximate_inverse_is_an_involution_that_turns_convolution_into_correlation(self):
        np.testing.assert_array_equal(approximate_inverse(np.array([1.0, 2.0, 3.0])), [1.0, 3.0, 2.0])
        np.testing.assert_allclose(circular_convolution([1.0, 3.0, 2.0], [4.0, 5.0, 6.0]), [32, 29, 29], atol=1e-10)
        v = np.random.default_rng(4).standard_normal(9)
        np.testing.assert_array_equal(approximate_inverse(approximate_inverse(v)), v)

    def test_fft_and_direct_backends_agree_on_mixed_lengths(self):
        rng = np.random.default_rng(5)
        for d in MIXED_LENGTHS:
            q = rng.standard_normal((100, d))
            a = rng.standard_normal((100, d))
            with self.subTest(d=d):
                fft = circular_correlation(q, a, CompositionBackend.FFT)
                direct = circular_correlation(q, a, CompositionBackend.DIRECT_SUM)
                self.assertEqual(fft.shape, (100, d))
                self.assertLess(float(np.max(np.abs(fft - direct))), 1e-10)
                np.testing.assert_allclose(fft[:, 0], np.einsum("bi,bi->b", q, a), rtol=0, atol=1e-10)
                np.testing.assert_allclose(fft, circular_convolution(approximate_inverse(q), a), rtol=0, atol=1e-10)
                for row in (0, 99):
                    np.testing.assert_allclose(
                        circular_correlation(q[row], a[row]), direct[row], rtol=0, atol=1e-10
                    )

    def test_fft_and_direct_backends_agree_in_single_precision(self):
        rng = np.random.default_rng(6)
        q = rng.uniform(-0.5, 0.5, 50).astype(np.float32)
        a = rng.uniform(-0.5, 0.5, 50).astype(np.float32)
        fft = circular_correlation(q, a, "fft")
        direct = circular_correlation(q, a, "direct")
        self.assertEqual(fft.dtype, np.float32)
        np.testing.assert_allclose(fft, direct, atol=1e-5)

    @given(
        st.integers(min_value=1, max_value=40).flatmap(
            lambda d: st.tuples(
                arrays(np.float64, d, elements=st.floats(-10, 10)),
                arrays(np.float64, d, elements=st.floats(-10, 10)),
            )
        )
    )
    @hypothesis_settings(max_examples=60, deadline=None)
    def test_first_correlation_entry_is_the_dot_product(self, pair):
        q, a = pair
        result = circular_correlation(q, a)
        self.assertEqual(result.shape, q.shape)
        self.assertAlmostEqual(result[0], float(q @ a), delta=1e-9 * max(1.0, float(np.abs(q) @ np.abs(a))))
        np.testing.assert_allclose(circular_convolution(q, a), circular_convolution(a, q), atol=1e-9 * 400)

    def test_unequal_lengths_are_rejected_and_padding_is_explicit(self):
        with self.assertRaises(DimensionError):
            circular_correlation(np.ones(3), np.ones(4))
        with self.assertRaises(DimensionError):
            circular_convolution(np.ones(3), np.ones(4))
        np.testing.assert_array_equal(zero_pad(np.array([1.0, 2.0]), 4), [1.0, 2.0, 0.0, 0.0])
        with self.assertRaises(DimensionError):
            zero_pad(np.ones(5), 4)

    def test_compose_widths(self):
        q = np.ones(4)
        a = np.arange(4.0)
        self.assertEqual(compose(q, a, "correlation").shape, (4,))
        self.assertEqual(compose(q, a, "convolution").shape, (4,))
        self.assertEqual(compose(q, a, "concatenation").shape, (8,))
        self.assertEqual(compose(q, a, "tensor_product").shape, (16,))

    def test_correlation_backward_examples(self):
        a = np.random.default_rng(7).standard_normal(5)
        q = np.random.default_rng(8).standard_normal(5)
        _grad_q, grad_a = correlation_backward(np.ones(5), np.eye(5)[0], a)
        np.testing.assert_allclose(grad_a, np.ones(5), atol=1e-12)
        _grad_q, grad_a = correlation_backward(np.eye(5)[0], q, a)
        np.testing.assert_allclose(grad_a, q, atol=1e-12)

    def test_correlation_gradient_matches_central_differences(self):
        rng = np.random.default_rng(9)
        weights = rng.standard_normal(8)
        for backend in CompositionBackend:
            with self.subTest(backend=backend.value):
                error = gradient_check(
                    lambda q, a: weighted_sum(correlate(q, a, backend), weights),
                    [rng.standard_normal(8), rng.standard_normal(8)],
                )
                self.assertLess(error, 1e-8)


class LayerTests(SimpleTestCase):
    def test_embedding_lookup_and_frozen_table(self):
        matrix = np.random.default_rng(0).standard_normal((5, 3))
        table = EmbeddingTable(matrix)
        np.testing.assert_array_equal(embed([0, 0, 0], table).numpy(), np.zeros((3, 3)))
        np.testing.assert_array_equal(embed([3], table).numpy(), [matrix[3]])
        self.assertFalse(table.trainable)
        self.assertFalse(embed([3, 4], table).requires_grad)

    def test_embedding_rejects_out_of_range_ids_with_position(self):
        table = EmbeddingTable(np.ones((5, 2)))
        with self.assertRaises(VocabularyError) as raised:
            embed([1, 2, 9], table)
        self.assertEqual(raised.exception.position, 2)

    def test_lstm_parameter_count_closed_form(self):
        self.assertEqual(lstm_parameter_count(2, 3, 1), 72)
        rng = np.random.default_rng(0)
        self.assertEqual(init_lstm_params(2, 3, 2, rng).parameter_count(), lstm_parameter_count(2, 3, 2))

    def test_zero_lstm_outputs_zero_hidden_states(self):
        params = init_lstm_params(3, 4, 2, np.random.default_rng(0))
        zeroed = params.replace({name: parameter(np.zeros(t.shape)) for name, t in params.tensors.items()})
        stacked, last = lstm_forward(Tensor(np.random.default_rng(1).standard_normal((5, 3))), zeroed)
        np.testing.assert_array_equal(stacked.numpy(), np.zeros((5, 4)))
        np.testing.assert_array_equal(last.numpy(), np.zeros(4))

    def test_lstm_output_shapes(self):
        params = init_lstm_params(50, 640, 3, np.random.default_rng(0))
        stacked, last = lstm_forward(Tensor(np.random.default_rng(1).standard_normal((38, 50))), params)
        self.assertEqual(stacked.shape, (38, 640))
        self.assertEqual(last.shape, (640,))

    def test_lstm_rejects_empty_sequences(self):
        params = init_lstm_params(3, 4, 1, np.random.default_rng(0))
        with self.assertRaises(DimensionError):
            lstm_forward(Tensor(np.zeros((0, 3))), params)

    def test_lstm_gradient_matches_central_differences(self):
        rng = np.random.default_rng(3)
        params = init_lstm_params(3, 5, 3, rng)
        names = list(params.tensors)
        x = rng.standard_normal((4, 3))
        weights = rng.standard_normal((4, 5))

        def forward(x, *tensors):
            stacked, _last = lstm_forward(x, params.replace(dict(zip(names, tensors))))
            return weighted_sum(stacked, weights)

        error = gradient_check(forward, [x] + [t.data for t in params.tensors.values()])
        self.assertLess(error, GRAD_TOLERANCE)

    def test_bilinear_similarity_examples(self):
        q = Tensor([1.0, 2.0])
        a = Tensor([3.0, 4.0])
        self.assertEqual(bilinear_similarity(q, a, Tensor(np.eye(2))).item(), 11.0)
        self.assertEqual(bilinear_similarity(q, a, Tensor([[0.0, 1.0], [1.0, 0.0]])).item(), 10.0)

    def test_bilinear_gradient_is_the_outer_product(self):
        rng = np.random.default_rng(4)
        q = rng.standard_normal(3)
        a = rng.standard_normal(3)
        M = parameter(rng.standard_normal((3, 3)))
        with Tape():
            value = bilinear_similarity(constant(q), constant(a), M)
        backward(value)
        np.testing.assert_allclose(M.grad, np.outer(q, a), atol=1e-12)

    def test_ntn_reference_values(self):
        rng = np.random.default_rng(0)
        zeroed = init_ntn_params(3, 2, rng)
        zeroed = zeroed.replace({name: parameter(np.zeros(t.shape)) for name, t in zeroed.tensors.items()})
        np.testing.assert_array_equal(ntn_score(Tensor(rng.standard_normal(3)), Tensor(np.ones(3)), zeroed).numpy(), [0, 0])

        unit = NtnParams(
            2,
            1,
            False,
            {
                "M0": parameter(np.eye(2)),
                "V": parameter(np.zeros((4, 1))),
                "b": parameter(np.zeros(1)),
                "u": parameter([[1.0, 0.0]]),
                "u_bias": parameter(np.zeros(2)),
            },
        )
        e0 = Tensor([1.0, 0.0])
        self.assertAlmostEqual(ntn_score(e0, e0, unit).numpy()[0], 0.761594, places=6)

    def test_ntn_gradient_matches_central_differences(self):
        rng = np.random.default_rng(5)
        params = init_ntn_params(4, 2, rng, use_overlap_feats=True)
        names = list(params.tensors)
        weights = rng.standard_normal(2)

        def forward(q, a, feats, *tensors):
            return weighted_sum(ntn_score(q, a, params.replace(dict(zip(names, tensors))), feats), weights)

        inputs = [rng.standard_normal(4), rng.standard_normal(4), rng.uniform(0, 1, 4)]
        error = gradient_check(forward, inputs + [t.data for t in params.tensors.values()])
        self.assertLess(error, GRAD_TOLERANCE)

    def test_holographic_head_reference_value(self):
        params = HoloHeadParams(
            3,
            3,
            "correlation",
            False,
            False,
            "tanh",
            {
                "W_h": parameter(np.eye(3)),
                "b_h": parameter(np.zeros(3)),
                "W_f": parameter([[1.0, 0.0], [0.0, 0.0], [0.0, 0.0]]),
                "b_f": parameter(np.zeros(2)),
            },
        )
        e0 = Tensor([1.0, 0.0, 0.0])
        self.assertAlmostEqual(holographic_head(e0, e0, params).numpy()[0], 0.761594, places=6)

    def test_head_input_width_counts_the_extras(self):
        shell = HoloHeadParams(640, 64, "correlation", True, True, "tanh", {})
        self.assertEqual(shell.input_width, 645)
        concat = HoloHeadParams(640, 64, "concatenation", False, False, "tanh", {})
        self.assertEqual(concat.input_width, 2 * HoloHeadParams(640, 64, "correlation", False, False, "tanh", {}).input_width)

    def test_head_extras_must_match_the_call(self):
        rng = np.random.default_rng(6)
        with_feats = init_head_params(4, 3, rng, use_overlap_feats=True)
        without = init_head_params(4, 3, rng)
        q = Tensor(rng.standard_normal(4))
        with self.assertRaises(ConfigError):
            holographic_head(q, q, with_feats)
        with self.assertRaises(ConfigError):
            holographic_head(q, q, without, Tensor(np.zeros(4)))
        for d, h in ((1, 1), (7, 2), (16, 5)):
            params = init_head_params(d, h, rng, use_bilinear_sim=True)
            vector = Tensor(rng.standard_normal(d))
            self.assertEqual(holographic_head(vector, vector, params).shape, (2,))

    def test_head_gradient_with_extras_matches_central_differences(self):
        rng = np.random.default_rng(7)
        params = init_head_params(6, 4, rng, use_bilinear_sim=True, use_overlap_feats=True)
        names = list(params.tensors)
        weights = rng.standard_normal(2)

        def forward(q, a, feats, *tensors):
            return weighted_sum(holographic_head(q, a, params.replace(dict(zip(names, tensors))), feats), weights)

        inputs = [rng.standard_normal(6), rng.standard_normal(6), rng.uniform(0, 1, 4)]
        error = gradient_check(forward, inputs + [t.data for t in params.tensors.values()])
        self.assertLess(error, GRAD_TOLERANCE)

    def test_softmax2_examples(self):
        np.testing.assert_allclose(softmax2(Tensor([0.0, 0.0])).numpy(), [0.5, 0.5])
        np.testing.assert_allclose(softmax2(Tensor([1000.0, 1000.0])).numpy(), [0.5, 0.5])
        np.testing.assert_allclose(softmax2(Tensor([math.log(3.0), 0.0])).numpy(), [0.75, 0.25], atol=1e-12)
        with self.assertRaises(NumericError):
            softmax2(Tensor([np.inf, 0.0]))

    @given(arrays(np.float64, 2, elements=st.floats(-50, 50)))
    @hypothesis_settings(max_examples=50, deadline=None)
    def test_softmax2_is_a_probability_vector(self, logits):
        probs = softmax2(Tensor(logits)).numpy()
        self.assertTrue(np.all(probs >= 0))
        self.assertAlmostEqual(float(probs.sum()), 1.0, delta=1e-9)


class RankingModelTests(SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.splits, cls.vocab, cls.idf = small_corpus()

    def test_same_seed_builds_identical_parameters(self):
        first = small_model(self.vocab)
        second = small_model(self.vocab)
        for (name, left), right in zip(first.parameters().items(), second.parameters().values()):
            with self.subTest(parameter=name):
                np.testing.assert_array_equal(left.data, right.data)

    def test_head_parameter_counts(self):
        self.assertEqual(head_parameter_count("hdlstm", 640, h=64), 41_154)
        self.assertEqual(head_parameter_count("ntnlstm", 640, k=5), 2_054_417)
        self.assertGreater(head_parameter_count("ntnlstm", 640, k=5) / head_parameter_count("hdlstm", 640, h=64), 49)
        for d, h in ((640, 64), (10, 3), (1, 1)):
            self.assertEqual(head_parameter_count("concatlstm", d, h=h), 2 * d * h + h + 2 * h + 2)
        self.assertEqual(table_formula("hdlstm", 640, h=64), 82_176)

    def test_counted_parameters_match_the_closed_form(self):
        for architecture in Architecture:
            with self.subTest(architecture=architecture.value):
                model = small_model(self.vocab, architecture.value)
                counts = count_parameters(model)
                expected = head_parameter_count(
                    architecture,
                    4,
                    h=model.config.hidden_dim,
                    k=model.config.ntn_slices,
                    use_overlap_feats=True,
                )
                self.assertEqual(counts["head"], expected)
                self.assertEqual(counts["q_lstm"], lstm_parameter_count(4, 4, 1))

    def test_unused_sizes_are_resolved_with_a_warning(self):
        with self.assertLogs("Holorank.architectures", level="WARNING"):
            resolved = ModelConfig(architecture="hdlstm", ntn_slices=5).resolved()
        self.assertIsNone(resolved.ntn_slices)
        self.assertEqual(resolved.hidden_dim, 64)
        with self.assertRaises(ConfigError):
            ModelConfig(architecture="bilstm")
        with self.assertRaises(ConfigError):
            ModelConfig(lstm_dim=0).resolved().validate()

    def test_embedding_dimension_must_match(self):
        with self.assertRaises(ConfigError):
            build_model(ModelConfig(embed_dim=8, lstm_dim=4, hidden_dim=3), EmbeddingTable(np.ones((3, 4))))

    def test_scores_are_probabilities_and_batch_equals_single(self):
        for architecture in Architecture:
            model = small_model(self.vocab, architecture.value)
            encoded = encode_split(self.splits["dev"], self.vocab, self.idf, model)
            batch = encoded.take(np.arange(6))
            with self.subTest(architecture=architecture.value):
                probs = model.probabilities(batch.q_ids, batch.a_ids, batch.x_feat).numpy()
                self.assertTrue(np.all((probs >= 0) & (probs <= 1)))
                np.testing.assert_allclose(probs.sum(axis=1), np.ones(6), atol=1e-12)
                scores = score_batch(model, batch.q_ids, batch.a_ids, batch.x_feat)
                singles = [
                    score_pair(model, batch.q_ids[i], batch.a_ids[i], batch.x_feat[i]) for i in range(6)
                ]
                np.testing.assert_allclose(scores, singles, atol=1e-6)

    def test_threaded_scoring_matches_sequential(self):
        model = small_model(self.vocab)
        encoded = encode_split(self.splits["dev"], self.vocab, self.idf, model)
        sequential = score_encoded(model, encoded, batch_size=4)
        threaded = score_encoded(model, encoded, batch_size=4, workers=3)
        np.testing.assert_array_equal(sequential, threaded)

    def test_inference_is_pure(self):
        model = small_model(self.vocab, dropout_rate=0.5)
        encoded = encode_split(self.splits["dev"], self.vocab, self.idf, model)
        first = score_encoded(model, encoded)
        np.testing.assert_array_equal(first, score_encoded(model, encoded))

    def test_permuting_the_pad_tail_leaves_the_score_unchanged(self):
        instance = self.splits["dev"].instances[0]
        model = small_model(self.vocab, use_overlap_feats=False)
        q_ids = np.array(encode_and_pad(instance.question_tokens, self.vocab, model.config.max_len_q))
        a_ids = np.array(encode_and_pad(instance.answer_tokens[:4], self.vocab, model.config.max_len_a))
        tail = np.flatnonzero(a_ids == PAD_ID)
        self.assertEqual(len(tail), 6)
        permuted = a_ids.copy()
        permuted[tail] = a_ids[np.random.default_rng(2).permutation(tail)]

        zero = model.with_parameters({name: np.zeros_like(t.data) for name, t in model.parameters().items()})
        for label, candidate in (("random init", model), ("zero parameters", zero)):
            with self.subTest(model=label):
                self.assertEqual(score_pair(candidate, q_ids, a_ids), score_pair(candidate, q_ids, permuted))

        pad_first = np.concatenate([a_ids[tail], a_ids[: tail[0]]])
        self.assertEqual(score_pair(zero, q_ids, a_ids), 0.5)
        self.assertEqual(score_pair(zero, q_ids, pad_first), 0.5)

    def test_full_model_loss_gradient_matches_central_differences(self):
        model = small_model(self.vocab, use_bilinear_sim=True)
        encoded = encode_split(self.splits["train"], self.vocab, self.idf, model)
        batch = encoded.take([0, 1])
        names = list(model.parameters())

        def forward(*tensors):
            return batch_loss(rebind(model, dict(zip(names, tensors))), batch, l2_lambda=1e-3)

        error = gradient_check(forward, [t.data for t in model.parameters().values()])
        self.assertLess(error, GRAD_TOLERANCE)

    def test_with_parameters_checks_names_and_shapes(self):
        model = small_model(self.vocab)
        arrays = {name: t.data for name, t in model.parameters().items()}
        arrays.pop("head.b_f")
        with self.assertRaises(ContractError):
            model.with_parameters(arrays)
        arrays["head.b_f"] = np.zeros(3)
        with self.assertRaises(DimensionError):
            model.with_parameters(arrays)


class QaDataTests(SimpleTestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.root = Path(self.tmp.name)

    def tearDown(self):
        self.tmp.cleanup()

    def test_two_line_tsv_fixture_gives_one_group(self):
        path = self.root / "tiny.tsv"
        path.write_text(
            "q1\tc1\t1\tWhat is BM25?\tA ranking function.\n"
            "q1\tc2\t0\tWhat is BM25?\tA kind of fish!\n",
            encoding="utf-8",
        )
        dataset = load_dataset(path)
        self.assertEqual(len(dataset.groups()), 1)
        self.assertEqual(len(dataset), 2)
        self.assertEqual(dataset.instances[0].question_tokens, ("what", "is", "bm25"))
        self.assertEqual(dataset_statistics(load_dataset(path)), dataset_statistics(dataset))

    def test_jsonl_mirrors_tsv(self):
        rows = [
            {"query_id": "q1", "candidate_id": "c1", "label": 1, "question": "a b", "answer": "c d"},
            {"query_id": "q1", "candidate_id": "c2", "label": 0, "question": "a b", "answer": "e"},
        ]
        path = self.root / "tiny.jsonl"
        path.write_text("\n".join(json.dumps(row) for row in rows) + "\n", encoding="utf-8")
        dataset = load_dataset(path)
        write_dataset(dataset, self.root / "copy.tsv")
        self.assertEqual(load_dataset(self.root / "copy.tsv").instances, dataset.instances)

    def test_malformed_lines_report_path_and_line(self):
        path = self.root / "bad.tsv"
        path.write_text("q1\tc1\t1\tquestion\tanswer\nq1\tc2\tyes\tquestion\tanswer\n", encoding="utf-8")
        with self.assertRaises(DataFormatError) as raised:
            load_dataset(path)
        self.assertEqual(raised.exception.line_number, 2)
        self.assertIn(f"{path}:2", str(raised.exception))

        empty = self.root / "empty.tsv"
        empty.write_text("", encoding="utf-8")
        with self.assertRaises(DataFormatError):
            load_dataset(empty)

    def test_duplicate_candidate_in_group_is_rejected(self):
        path = self.root / "dup.tsv"
        path.write_text("q1\tc1\t1\tq\ta\nq1\tc1\t0\tq\tb\n", encoding="utf-8")
        with self.assertRaises(DataFormatError):
            load_dataset(path)

    def test_statistics_report_percent_correct(self):
        instances = []
        for number in range(100):
            size = 15 if number < 83 else 16
            positives = 3 if number < 84 else 2
            for candidate in range(size):
                label = 1 if candidate < positives else 0
                instances.append(QAInstance(f"q{number}", ("q",), ("a",), label, f"c{candidate}"))
        stats = dataset_statistics(QADataset("test", instances))
        self.assertEqual((stats["questions"], stats["pairs"]), (100, 1517))
        self.assertEqual(stats["pct_correct"], 18.7)

    def test_vocabulary_order_and_edge_cases(self):
        empty = build_vocabulary(QADataset("x", []))
        self.assertEqual(len(empty), 2)
        self.assertEqual((empty.id_of("<pad>"), empty.id_of("<unk>")), (PAD_ID, UNK_ID))

        dataset = QADataset("x", [QAInstance("q", ("b",), ("a",), 1, "c")])
        vocab = build_vocabulary(dataset)
        self.assertLess(vocab.id_of("a"), vocab.id_of("b"))
        self.assertEqual(build_vocabulary(dataset), vocab)

    def test_encode_and_pad(self):
        vocab = Vocabulary(["<pad>", "<unk>", "hi"] + [f"w{i}" for i in range(40)])
        self.assertEqual(encode_and_pad(["hi"], vocab, 3), [2, 0, 0])
        self.assertEqual(encode_and_pad(["never"], vocab, 2), [UNK_ID, PAD_ID])
        tokens = [f"w{i}" for i in range(40)]
        ids = encode_and_pad(tokens, vocab, 38)
        self.assertEqual(vocab.decode(ids), tokens[:38])

    def test_pretrained_embeddings(self):
        path = self.root / "vectors.txt"
        path.write_text("cat 0.1 0.2\n<pad> 9 9\n", encoding="utf-8")
        vocab = Vocabulary(["<pad>", "<unk>", "cat", "dog"])
        table = load_pretrained_embeddings(path, vocab, seed=5)
        np.testing.assert_allclose(table.matrix[2], [0.1, 0.2])
        np.testing.assert_array_equal(table.matrix[0], [0.0, 0.0])
        self.assertTrue(np.all(np.abs(table.matrix[3]) <= 0.25))
        np.testing.assert_array_equal(load_pretrained_embeddings(path, vocab, seed=5).matrix, table.matrix)
        with self.assertRaises(ConfigError):
            load_pretrained_embeddings(path, vocab, dim=3)

    def test_idf_examples(self):
        documents = [["common", "rare"]] + [["common"]] * 9
        idf = compute_idf(documents)
        self.assertAlmostEqual(idf.idf("common"), 1.0, places=12)
        self.assertAlmostEqual(idf.idf("rare"), math.log(11 / 2) + 1, places=12)
        self.assertAlmostEqual(idf.idf("rare"), 2.7047, places=4)
        self.assertAlmostEqual(idf.idf("unseen"), math.log(11) + 1, places=12)

    def test_overlap_feature_examples(self):
        idf = compute_idf([["x"]])
        np.testing.assert_array_equal(overlap_features(["a", "b"], ["c"], idf, frozenset()), [0, 0, 0, 0])

        stopwords = frozenset({"what", "is", "the", "of", "a"})
        question = "what is the capital of france".split()
        answer = "the capital is paris".split()
        features = overlap_features(question, answer, idf, stopwords)
        self.assertAlmostEqual(features[0], 3 / 10)
        # {capital, france} and {capital, paris} once stopwords go.
        self.assertAlmostEqual(features[2], 1 / 4)

        same = overlap_features(["x", "y"], ["x", "y"], idf, frozenset())
        self.assertEqual(same[0], 0.5)

    @given(
        st.lists(st.sampled_from("abcdefgh"), min_size=1, max_size=8),
        st.lists(st.sampled_from("abcdefgh"), min_size=1, max_size=8),
    )
    @hypothesis_settings(max_examples=60, deadline=None)
    def test_overlap_features_are_symmetric_and_bounded(self, question, answer):
        idf = compute_idf([list("abcd"), list("efgh"), list("aceg")])
        stopwords = frozenset("ab")
        forward = overlap_features(question, answer, idf, stopwords)
        np.testing.assert_allclose(forward, overlap_features(answer, question, idf, stopwords))
        self.assertTrue(0.0 <= forward[0] <= 1.0 and 0.0 <= forward[2] <= 1.0)
        self.assertTrue(0.0 <= forward[1] <= idf.max_idf and 0.0 <= forward[3] <= idf.max_idf)


class Bm25Tests(SimpleTestCase):
    def test_index_statistics(self):
        index = index_corpus({"d1": ["a", "b", "a"]})
        self.assertEqual(index.term_counts["d1"]["a"], 2)
        self.assertEqual(index.term_counts["d1"]["b"], 1)
        self.assertEqual((index.lengths["d1"], index.avgdl), (3, 3.0))
        self.assertEqual(index_corpus({"x": ["a", "b"], "y": ["a", "b", "c", "d"]}).avgdl, 3.0)

        corpus = {"d2": ["x", "y"], "d1": ["y", "z"]}
        self.assertEqual(index_corpus(corpus).postings, index_corpus(corpus).postings)
        with self.assertRaises(DataFormatError):
            index_corpus([("d1", ["a"]), ("d1", ["b"])])
        with self.assertRaises(ConfigError):
            index_corpus({})

    def test_score_examples(self):
        index = index_corpus({"d1": ["x", "y"], "d2": ["z", "w"]})
        self.assertEqual(bm25_score(["q"], "d1", index), 0.0)
        self.assertAlmostEqual(bm25_score(["x"], "d1", index), math.log(2), places=12)
        self.assertAlmostEqual(bm25_score(["x"], "d1", index), 0.6931, places=4)
        with self.assertRaises(UnknownDocumentError):
            bm25_score(["x"], "missing", index)

    def test_score_grows_with_term_frequency(self):
        for tf in range(1, 6):
            index = index_corpus({"d": ["x"] * tf + ["pad"] * 3, "e": ["y"] * 4, "f": ["x"] * (tf + 1) + ["pad"] * 2})
            with self.subTest(tf=tf):
                self.assertGreaterEqual(bm25_score(["x"], "f", index), bm25_score(["x"], "d", index))

    def test_document_with_all_query_terms_beats_one_with_none(self):
        index = index_corpus({"all": ["a", "b", "c"], "none": ["d", "e", "f"], "other": ["a", "d"]})
        self.assertGreater(bm25_score(["a", "b"], "all", index), bm25_score(["a", "b"], "none", index))

    def test_top_hits_tie_break_by_id(self):
        index = index_corpus({"b": ["x", "y"], "a": ["x", "z"], "c": ["w", "v"]})
        self.assertEqual([doc for doc, _ in top_hits(["x"], index)], ["a", "b"])

    def test_negative_sampling(self):
        corpus = {f"d{i}": ["common", f"t{i}"] for i in range(6)}
        index = index_corpus(corpus)
        chosen = sample_negatives(["common"], "d0", index, k=4, seed=3)
        self.assertEqual(len(set(chosen)), 4)
        self.assertNotIn("d0", chosen)
        self.assertEqual(chosen, sample_negatives(["common"], "d0", index, k=4, seed=3))
        for seed in range(1000):
            self.assertNotIn("d0", sample_negatives(["common", "t0"], "d0", index, k=4, seed=seed))

    def test_short_corpus_returns_every_other_document(self):
        index = index_corpus({"a": ["x"], "b": ["y"], "c": ["z"]})
        with self.assertLogs("Holorank.bm25", level="WARNING"):
            chosen = sample_negatives(["x"], "a", index, k=4)
        self.assertEqual(sorted(chosen), ["b", "c"])
        with self.assertRaises(ConfigError):
            sample_negatives(["x"], "a", index_corpus({"a": ["x"]}))
        with self.assertRaises(ConfigError):
            sample_negatives(["x"], "a", index, sampler="sorted")

    def test_score_weighted_sampler_avoids_gold(self):
        index = index_corpus({f"d{i}": ["common"] * (i + 1) + ["pad"] for i in range(8)})
        for seed in range(50):
            chosen = sample_negatives(["common"], "d3", index, k=3, seed=seed, sampler="score_weighted")
            self.assertNotIn("d3", chosen)
            self.assertEqual(len(set(chosen)), 3)

    def test_community_qa_groups_have_one_positive_and_bm25_negatives(self):
        pairs = [
            (f"q{i}", ("how", "do", "i", "fix", f"part{i}"), ("you", "fix", "the", f"part{i}", "with", "glue"))
            for i in range(8)
        ]
        pairs.append(("short", ("why",), ("because", "of", "the", "rain", "today")))
        kept = filter_by_length(pairs)
        self.assertEqual(len(kept), 8)
        dataset = build_cqa_dataset(kept, negatives=4, seed=2)
        for query_id, items in dataset.groups().items():
            with self.subTest(query_id=query_id):
                self.assertEqual([item.label for item in items], [1, 0, 0, 0, 0])
                self.assertEqual(items[0].candidate_id, query_id)
                self.assertNotIn(query_id, [item.candidate_id for item in items[1:]])
        self.assertEqual(
            build_cqa_dataset(kept, negatives=4, seed=2).instances, dataset.instances
        )

    def test_bm25_run_ranks_each_group(self):
        dataset = QADataset(
            "dev",
            [
                QAInstance("q1", ("solar", "panel"), ("wind", "farm"), 0, "c1"),
                QAInstance("q1", ("solar", "panel"), ("solar", "panel", "cost"), 1, "c2"),
            ],
        )
        run = bm25_run(dataset)
        self.assertEqual(run.labels("q1"), [1, 0])
        self.assertEqual(evaluate_run(run)["map"], 1.0)


def run_from_labels(groups, scores=None):
    rows = []
    for query_id, labels in groups.items():
        for position, label in enumerate(labels):
            score = len(labels) - position if scores is None else scores[query_id][position]
            rows.append((query_id, f"c{position}", score, label))
    return build_run(rows)


class RankEvalTests(SimpleTestCase):
    def test_average_precision_examples(self):
        self.assertEqual(average_precision([1, 0, 0]), 1.0)
        self.assertEqual(average_precision([0, 1, 0, 1]), 0.5)
        self.assertEqual(mean_average_precision(run_from_labels({"a": [1, 0, 0], "b": [0, 1, 0, 1]})), 0.75)

    def test_reciprocal_rank_and_precision_examples(self):
        self.assertEqual(reciprocal_rank([1, 0]), 1.0)
        self.assertEqual(reciprocal_rank([0, 1, 0]), 0.5)
        self.assertEqual(precision_at_1(run_from_labels({"a": [0, 1]})), 0.0)
        self.assertEqual(precision_at_1(run_from_labels({"a": [1, 0], "b": [1]})), 1.0)
        self.assertEqual(mean_reciprocal_rank(run_from_labels({"a": [0, 1], "b": [1, 0]})), 0.75)

    def test_single_positive_first_gives_equal_metrics(self):
        metrics = evaluate_run(run_from_labels({"a": [1, 0, 0], "b": [1, 0]}))
        self.assertEqual((metrics["map"], metrics["mrr"], metrics["p_at_1"]), (1.0, 1.0, 1.0))

    def test_queries_without_positives_are_skipped(self):
        metrics = evaluate_run(run_from_labels({"a": [0, 1], "b": [0, 0]}))
        self.assertEqual(metrics["queries"], 1)
        self.assertEqual(metrics["skipped_queries"], 1)
        self.assertEqual(metrics["map"], 0.5)
        with self.assertRaises(EmptyRunError):
            evaluate_run(run_from_labels({"a": [0, 0]}))
        with self.assertRaises(EmptyRunError):
            evaluate_run(build_run([]))

    def test_ties_break_by_candidate_id(self):
        run = build_run([("q", "c2", 0.5, 1), ("q", "c1", 0.5, 0), ("q", "c3", 0.9, 0)])
        self.assertEqual([c.candidate_id for c in run.queries["q"]], ["c3", "c1", "c2"])

    @given(
        st.lists(
            st.tuples(st.integers(0, 1), st.integers(-50, 50).map(lambda tenths: tenths / 10)),
            min_size=1,
            max_size=12,
            unique_by=lambda item: item[1],
        ).filter(lambda items: any(label for label, _ in items))
    )
    @hypothesis_settings(max_examples=60, deadline=None)
    def test_metrics_depend_only_on_score_order(self, items):
        def metrics_for(transform):
            return evaluate_run(
                build_run(("q", f"c{i}", transform(score), label) for i, (label, score) in enumerate(items))
            )

        base = metrics_for(lambda s: s)
        self.assertEqual(metrics_for(lambda s: 2 * s + 1), base)
        self.assertEqual(metrics_for(math.exp), base)

    def test_random_guess_over_five_candidates(self):
        groups = {f"q{i}": [(f"c{j}", 1 if j == 0 else 0) for j in range(5)] for i in range(100_000)}
        metrics = evaluate_run(random_guess_run(groups, seed=1))
        self.assertAlmostEqual(metrics["p_at_1"], 0.2000, delta=0.005)
        self.assertAlmostEqual(metrics["mrr"], 0.4570, delta=0.005)

    def test_run_file_round_trip(self):
        run = build_run(
            [("q1", "c1", 0.25, 0), ("q1", "c2", 0.75, 1), ("q2", "c9", 0.1, 1)],
            tag="smoke",
        )
        with tempfile.TemporaryDirectory() as tmp:
            path = write_run_file(run, Path(tmp) / "smoke.run")
            lines = path.read_text(encoding="utf-8").splitlines()
            self.assertEqual(lines[0].split(), ["q1", "Q0", "c2", "1", "0.750000", "smoke"])
            self.assertEqual(lines[1].split()[3], "2")
            qrels_path = write_qrels({"q1": [("c1", 0), ("c2", 1)], "q2": [("c9", 1)]}, Path(tmp) / "smoke.qrels")
            parsed = read_run_file(path, read_qrels(qrels_path))
        self.assertEqual(list(parsed.queries), ["q1", "q2"])
        for query_id, candidates in run.queries.items():
            for original, reread in zip(candidates, parsed.queries[query_id]):
                self.assertEqual(original.candidate_id, reread.candidate_id)
                self.assertAlmostEqual(original.score, reread.score, delta=1e-6)
        self.assertEqual(evaluate_run(parsed), evaluate_run(run))

    def test_ids_with_whitespace_cannot_be_written(self):
        run = build_run([("q 1", "c1", 0.5, 1)])
        with tempfile.TemporaryDirectory() as tmp:
            with self.assertRaises(DataFormatError):
                write_run_file(run, Path(tmp) / "bad.run")


class TrainerTests(SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.splits, cls.vocab, cls.idf = small_corpus()

    def encoded(self, model, split):
        return encode_split(self.splits[split], self.vocab, self.idf, model)

    def test_loss_examples(self):
        self.assertAlmostEqual(loss(constant([0.5]), [1], [], 0.0).item(), math.log(2), places=9)
        self.assertLess(loss(constant([1.0]), [1], [], 0.0).item(), 1e-6)
        value = loss(constant([1.0, 0.0]), [1, 0], [parameter([3.0, 4.0])], 1.0).item()
        self.assertAlmostEqual(value, 25.0, places=5)
        with self.assertRaises(ContractError):
            loss(constant([0.5]), [2], [], 0.0)

    def test_l2_term_covers_trainable_parameters_only(self):
        model = small_model(self.vocab)
        params = list(model.parameters().values())
        expected = sum(float(np.sum(t.data**2)) for t in params)
        value = loss(constant([1.0]), [1], params, 1.0).item()
        self.assertAlmostEqual(value, expected, delta=1e-5)

    def test_gradient_clipping(self):
        grads = {"a": np.array([2.0 * 0.6, 0.0]), "b": np.array([2.0 * 0.8])}
        clipped, norm = clip_gradients(grads, 1.0)
        self.assertAlmostEqual(norm, 2.0)
        np.testing.assert_allclose(clipped["a"], grads["a"] / 2)
        np.testing.assert_allclose(clipped["b"], grads["b"] / 2)
        self.assertAlmostEqual(global_norm(clipped), 1.0, delta=1e-9)

        small = {"a": np.array([0.3, 0.4])}
        kept, norm = clip_gradients(small, 1.0)
        self.assertAlmostEqual(norm, 0.5)
        np.testing.assert_array_equal(kept["a"], small["a"])
        with self.assertRaises(NumericError):
            clip_gradients({"a": np.array([np.nan])}, 1.0)

    def test_adam_first_step_and_zero_gradient(self):
        params = {"w": np.array([0.0])}
        state = OptimizerState.zeros(params)
        updated, state = adam_step(params, {"w": np.array([1.0])}, state, lr=0.01)
        self.assertAlmostEqual(float(updated["w"][0]), -0.01, delta=1e-9)
        self.assertEqual(state.step, 1)

        frozen, state = adam_step(updated, {"w": np.array([0.0])}, OptimizerState.zeros(updated), lr=0.01)
        np.testing.assert_array_equal(frozen["w"], updated["w"])
        self.assertEqual(state.step, 1)

    def test_adam_matches_a_scalar_schedule(self):
        lr, beta1, beta2, eps = 0.05, 0.9, 0.999, 1e-8
        value, m, v = 1.5, 0.0, 0.0
        params = {"w": np.array([1.5])}
        state = OptimizerState.zeros(params)
        for step in range(1, 11):
            grad = 2.0 * value - 1.0
            m = beta1 * m + (1 - beta1) * grad
            v = beta2 * v + (1 - beta2) * grad * grad
            value -= lr * (m / (1 - beta1**step)) / (math.sqrt(v / (1 - beta2**step)) + eps)
            params, state = adam_step(params, {"w": np.array([2.0 * params["w"][0] - 1.0])}, state, lr, beta1, beta2, eps)
        self.assertAlmostEqual(float(params["w"][0]), value, delta=1e-10)

    def test_one_small_step_decreases_the_batch_loss(self):
        model = small_model(self.vocab)
        batch = self.encoded(model, "train").take(np.arange(10))
        for lr in (1e-5, 1e-6):
            config = TrainConfig(learning_rate=lr, l2_lambda=0.0, batch_size=10)
            with self.subTest(lr=lr):
                with Tape():
                    before = batch_loss(model, batch, 0.0).item()
                state = OptimizerState.zeros({name: t.data for name, t in model.parameters().items()})
                updated, _state, value, _norm = train_step(model, batch, state, config)
                self.assertEqual(value, before)
                with Tape():
                    after = batch_loss(updated, batch, 0.0).item()
                self.assertLess(after, before)

    def test_zero_learning_rate_stops_after_patience(self):
        model = small_model(self.vocab)
        config = TrainConfig(learning_rate=0.0, l2_lambda=0.0, batch_size=8, max_epochs=10, patience=2)
        result = train(model, self.encoded(model, "train"), self.encoded(model, "dev"), config)
        self.assertEqual(result.stopped_epoch, 3)
        self.assertEqual(result.stop_reason, "patience")
        self.assertEqual([record["epoch"] for record in result.log], [1, 2, 3])
        self.assertEqual([kept.epoch for kept in result.checkpoints], [1, 2, 3])

    def test_training_is_deterministic_for_a_seed(self):
        model = small_model(self.vocab, dropout_rate=0.3)
        config = TrainConfig(learning_rate=1e-2, l2_lambda=1e-4, batch_size=8, max_epochs=2, patience=2)
        train_enc, dev_enc = self.encoded(model, "train"), self.encoded(model, "dev")
        first = train(model, train_enc, dev_enc, config)
        second = train(model, train_enc, dev_enc, config)
        self.assertEqual([r["loss"] for r in first.log], [r["loss"] for r in second.log])
        self.assertEqual([r["dev_map"] for r in first.log], [r["dev_map"] for r in second.log])

    def test_training_writes_top_checkpoints_and_log(self):
        model = small_model(self.vocab)
        config = TrainConfig(learning_rate=1e-2, l2_lambda=0.0, batch_size=8, max_epochs=4, patience=4, keep_top_k=2)
        seen = []
        with tempfile.TemporaryDirectory() as tmp:
            result = train(
                model,
                self.encoded(model, "train"),
                self.encoded(model, "dev"),
                config,
                out_dir=tmp,
                on_epoch=seen.append,
                test_encoded=self.encoded(model, "test"),
                checkpoint_context={"vocab": self.vocab, "idf": self.idf, "stopwords": STOPWORDS},
            )
            saved = sorted(path.name for path in (Path(tmp) / "checkpoints").glob("*.npz"))
            log_lines = (Path(tmp) / "train_log.jsonl").read_text(encoding="utf-8").splitlines()
        self.assertEqual(len(result.checkpoints), 2)
        self.assertEqual(saved, sorted(Path(kept.path).name for kept in result.checkpoints))
        self.assertEqual(len(log_lines), len(seen))
        self.assertEqual(json.loads(log_lines[0])["epoch"], 1)
        self.assertTrue(all(kept.test_metrics for kept in result.checkpoints))
        maps = [kept.dev_map for kept in result.checkpoints]
        self.assertEqual(maps, sorted(maps, reverse=True))

    def test_dev_set_without_positives_is_rejected(self):
        model = small_model(self.vocab)
        dev = self.splits["dev"]
        negatives = QADataset("dev", [i for i in dev.instances if i.label == 0])
        with self.assertRaises(ConfigError):
            train(model, self.encoded(model, "train"), encode_split(negatives, self.vocab, self.idf, model), TrainConfig())
        with self.assertRaises(ConfigError):
            TrainConfig(patience=6, max_epochs=5).validate()

    def test_checkpoint_round_trip_is_bit_exact(self):
        model = small_model(self.vocab, "ntnlstm")
        dev = self.encoded(model, "dev")
        with tempfile.TemporaryDirectory() as tmp:
            path = save_checkpoint(Path(tmp) / "model", model, self.vocab, self.idf, STOPWORDS, epoch=1)
            self.assertEqual(path.suffix, ".npz")
            restored = load_checkpoint(path)
        for name, tensor in model.parameters().items():
            np.testing.assert_array_equal(restored.model.parameters()[name].data, tensor.data)
        self.assertEqual(restored.vocab, self.vocab)
        self.assertEqual(restored.model.config, model.config)
        self.assertEqual(evaluate_model(restored.model, dev)[1], evaluate_model(model, dev)[1])

    def test_unreadable_checkpoints(self):
        with tempfile.TemporaryDirectory() as tmp:
            bogus = Path(tmp) / "bogus.npz"
            bogus.write_bytes(b"not a zip archive")
            with self.assertRaises(CheckpointError):
                load_checkpoint(bogus)
            with self.assertRaises(FileNotFoundError):
                load_checkpoint(Path(tmp) / "missing.npz")


@tag("slow")
class SyntheticAcceptanceTests(SimpleTestCase):
    """500/100/100 separable corpus; the model sees token ids only (no overlap features)."""

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.splits, cls.vocab, cls.idf = small_corpus(
            seed=1, train_questions=500, dev_questions=100, test_questions=100, negatives=4
        )
        cls.embeddings = EmbeddingTable(np.random.default_rng(1).normal(0.0, 0.5, size=(len(cls.vocab), 32)))
        cls.trained = {}

    def model_for(self, architecture):
        config = ModelConfig(
            architecture=architecture,
            embed_dim=32,
            lstm_dim=32,
            lstm_layers=1,
            hidden_dim=16,
            use_bilinear_sim=True,
            use_overlap_feats=False,
            max_len_q=6,
            max_len_a=10,
            dropout_rate=0.0,
            precision="f64",
            seed=1,
        )
        return build_model(config, self.embeddings)

    def encoded(self, model, split):
        return encode_split(self.splits[split], self.vocab, self.idf, model)

    def train_architecture(self, architecture):
        if architecture not in self.trained:
            model = self.model_for(architecture)
            result = train(
                model,
                self.encoded(model, "train"),
                self.encoded(model, "dev"),
                TrainConfig(learning_rate=1e-2, l2_lambda=0.0, batch_size=64, max_epochs=30, patience=5, seed=1),
                test_encoded=self.encoded(model, "test"),
            )
            self.trained[architecture] = (model, result)
        return self.trained[architecture]

    def test_hdlstm_reaches_high_test_map_and_beats_the_baselines(self):
        untrained, result = self.train_architecture("hdlstm")
        self.assertFalse(untrained.config.use_overlap_feats)
        self.assertLessEqual(result.stopped_epoch, 30)
        self.assertGreater(result.best_test_map, 0.95)

        untrained_map = evaluate_model(untrained, self.encoded(untrained, "test"))[1]["map"]
        random_map = evaluate_run(random_guess_run(self.splits["test"].label_groups(), seed=1))["map"]
        self.assertGreater(result.best_test_map - untrained_map, 0.3)
        self.assertGreater(result.best_test_map - random_map, 0.3)

    def test_hdlstm_and_concatlstm_ordering_is_reported(self):
        _hd_model, hd = self.train_architecture("hdlstm")
        _concat_model, concat = self.train_architecture("concatlstm")
        for result in (hd, concat):
            self.assertTrue(0.0 <= result.best_test_map <= 1.0)
        ordering = "HD-LSTM >= ConcatLSTM" if hd.best_test_map >= concat.best_test_map else "ConcatLSTM > HD-LSTM"
        logger.warning(
            "synthetic test MAP: HD-LSTM %.4f, ConcatLSTM %.4f (%s)",
            hd.best_test_map,
            concat.best_test_map,
            ordering,
        )


class ConfigTests(SimpleTestCase):
    def test_flat_file_with_sections_and_comments(self):
        values = parse_config_text("# tiny run\nmodel.architecture = ntnlstm\n[train]\nlearning_rate = '1e-3'\n")
        self.assertEqual(values, {"model.architecture": "ntnlstm", "train.learning_rate": "1e-3"})
        with self.assertRaises(ConfigError) as raised:
            parse_config_text("model.lstm_dim 32", path="tiny.cfg")
        self.assertIn("tiny.cfg:1", str(raised.exception))

    @override_settings(HOLORANK_LSTM_DIM=32, HOLORANK_HIDDEN_DIM=8)
    def test_later_layers_win_over_settings(self):
        manifest = build_manifest({"model.lstm_dim": "16"}, {"model.lstm_dim": "12", "run.seed": None})
        self.assertEqual(manifest.model.lstm_dim, 12)
        self.assertEqual(manifest.model.hidden_dim, 8)
        self.assertEqual(manifest.seed, 1)

    def test_output_directory_default_is_the_same_everywhere(self):
        self.assertEqual(DEFAULT_OUTPUT_DIR, "runs")
        self.assertEqual(settings.HOLORANK_OUTPUT_DIR, os.environ.get("HOLORANK_OUTPUT_DIR", DEFAULT_OUTPUT_DIR))
        with self.settings():
            del settings.HOLORANK_OUTPUT_DIR
            self.assertEqual(build_manifest().out_dir, DEFAULT_OUTPUT_DIR)
        with self.settings(HOLORANK_OUTPUT_DIR=""):
            self.assertEqual(build_manifest().out_dir, DEFAULT_OUTPUT_DIR)

    def test_unknown_keys_and_bad_values_are_config_errors(self):
        with self.assertRaises(ConfigError):
            build_manifest({"model.depth": "3"})
        with self.assertRaises(ConfigError):
            build_manifest({"train.batch_size": "many"})

    def test_manifest_round_trip(self):
        manifest = build_manifest({"model.architecture": "ntnlstm", "run.seed": "7", "run.tag": "ntn-seed7"})
        with tempfile.TemporaryDirectory() as tmp:
            path = manifest.write(tmp)
            reloaded = build_manifest(load_config_file(path))
        self.assertEqual(reloaded, manifest)
        self.assertEqual(reloaded.model.ntn_slices, 5)


class CommandTests(TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.root = Path(self.tmp.name)

    def tearDown(self):
        self.tmp.cleanup()

    def make_corpus(self):
        call_command(
            "make_synthetic",
            out=str(self.root / "data"),
            seed=3,
            train_questions=12,
            dev_questions=6,
            test_questions=6,
            negatives=2,
            dim=8,
            stdout=StringIO(),
        )
        return self.root / "data"

    def train_small(self, data, run_tag="synthetic-smoke", arch=None):
        output = StringIO()
        options = dict(
            config=str(data / "config.txt"),
            out=str(self.root / "runs"),
            run_tag=run_tag,
            set=[
                "model.lstm_dim=4",
                "model.hidden_dim=3",
                "train.max_epochs=2",
                "train.patience=1",
                "train.batch_size=16",
            ],
            stdout=output,
        )
        if arch:
            options["arch"] = arch
        call_command("train", **options)
        return output.getvalue()

    def test_count_params_prints_exact_head_counts(self):
        output = StringIO()
        call_command("count_params", stdout=output)
        self.assertIn("head 41,154", output.getvalue())
        self.assertIn("82,176", output.getvalue())

        output = StringIO()
        call_command("count_params", arch="ntnlstm", stdout=output)
        self.assertIn("head 2,054,417", output.getvalue())
        self.assertIn("architecture ntnlstm", output.getvalue())

    def test_train_with_missing_embeddings_exits_with_usage_error(self):
        data = self.make_corpus()
        missing = self.root / "nowhere" / "vectors.txt"
        with self.assertRaises(CommandError) as raised:
            call_command(
                "train",
                train=str(data / "train.tsv"),
                dev=str(data / "dev.tsv"),
                embeddings=str(missing),
                out=str(self.root / "runs"),
                stdout=StringIO(),
            )
        self.assertEqual(raised.exception.returncode, 2)
        self.assertIn(str(missing), str(raised.exception))
        self.assertFalse(TrainingRun.objects.exists())

    def test_unknown_override_exits_with_usage_error(self):
        with self.assertRaises(CommandError) as raised:
            call_command("count_params", set=["model.depth=3"], stdout=StringIO())
        self.assertEqual(raised.exception.returncode, 2)

    def test_train_evaluate_and_rank_on_synthetic_corpus(self):
        data = self.make_corpus()
        output = self.train_small(data)
        self.assertIn("Stopped after epoch", output)

        run = TrainingRun.objects.get(run_tag="synthetic-smoke")
        self.assertEqual(run.status, "succeeded")
        self.assertEqual(run.epochs.count(), 2)
        self.assertEqual(run.epochs_completed, 2)
        self.assertIsNotNone(run.best_dev_map)
        self.assertIsNotNone(run.best_test_map)
        self.assertEqual(run.manifest["model"]["lstm_dim"], 4)
        run_dir = self.root / "runs" / "synthetic-smoke"
        self.assertTrue((run_dir / "manifest.json").exists())

        checkpoint = sorted((run_dir / "checkpoints").glob("*.npz"))[0]
        first, second = StringIO(), StringIO()
        call_command("evaluate", checkpoint=str(checkpoint), dataset=str(data / "dev.tsv"), stdout=first)
        call_command("evaluate", checkpoint=str(checkpoint), dataset=str(data / "dev.tsv"), stdout=second)
        self.assertIn("MAP ", first.getvalue())
        self.assertEqual(first.getvalue().splitlines()[0], second.getvalue().splitlines()[0])
        parsed = read_run_file(checkpoint.with_suffix(".run"))
        self.assertEqual(len(parsed), 6)

        with self.assertRaises(CommandError) as raised:
            call_command(
                "evaluate", checkpoint=str(checkpoint), dataset=str(data / "dev.tsv"), arch="ntnlstm", stdout=StringIO()
            )
        self.assertEqual(raised.exception.returncode, 2)

        candidates = self.root / "candidates.txt"
        candidates.write_text("a\tthe t001 t002 is of a\nb\tthe t001 t002 is of a\nc\tsomething else\n", encoding="utf-8")
        output = StringIO()
        call_command("rank", checkpoint=str(checkpoint), question="what is the t001 t002", candidates=str(candidates), stdout=output)
        lines = [line.split("\t") for line in output.getvalue().splitlines()]
        self.assertEqual([line[0] for line in lines], ["1", "2", "3"])
        scores = [float(line[2]) for line in lines]
        self.assertEqual(scores, sorted(scores, reverse=True))
        self.assertTrue(all(0.0 <= score <= 1.0 for score in scores))
        duplicated = {line[1]: float(line[2]) for line in lines}
        self.assertEqual(duplicated["a"], duplicated["b"])

    def test_same_seed_reproduces_checkpoints_bit_for_bit(self):
        data = self.make_corpus()
        self.train_small(data, run_tag="repeat-a")
        self.train_small(data, run_tag="repeat-b")
        first = TrainingRun.objects.get(run_tag="repeat-a")
        second = TrainingRun.objects.get(run_tag="repeat-b")
        self.assertEqual(first.best_dev_map, second.best_dev_map)
        self.assertEqual(first.best_test_map, second.best_test_map)

        left_files = sorted((self.root / "runs" / "repeat-a" / "checkpoints").glob("*.npz"))
        right_files = sorted((self.root / "runs" / "repeat-b" / "checkpoints").glob("*.npz"))
        self.assertTrue(left_files)
        self.assertEqual([path.name for path in left_files], [path.name for path in right_files])
        for left_path, right_path in zip(left_files, right_files):
            left, right = load_checkpoint(left_path), load_checkpoint(right_path)
            left_params, right_params = left.model.parameters(), right.model.parameters()
            self.assertEqual(list(left_params), list(right_params))
            for name in left_params:
                with self.subTest(checkpoint=left_path.name, parameter=name):
                    self.assertEqual(left_params[name].dtype, np.float64)
                    self.assertTrue(np.array_equal(left_params[name].data, right_params[name].data))
            self.assertTrue(np.array_equal(left.model.embeddings.matrix, right.model.embeddings.matrix))
            self.assertEqual((left.epoch, left.dev_map), (right.epoch, right.dev_map))
            with np.load(left_path) as left_arrays, np.load(right_path) as right_arrays:
                self.assertEqual(sorted(left_arrays.files), sorted(right_arrays.files))
                for key in left_arrays.files:
                    self.assertEqual(left_arrays[key].tobytes(), right_arrays[key].tobytes())

    def test_evaluate_rejects_a_dataset_outside_the_checkpoint_vocabulary(self):
        splits, vocab, idf = small_corpus()
        model = small_model(vocab)
        checkpoint_path = save_checkpoint(self.root / "model.npz", model, vocab, idf, STOPWORDS, epoch=1)
        checkpoint = load_checkpoint(checkpoint_path)
        self.assertEqual(check_vocabulary_coverage(checkpoint, splits["dev"]), 1.0)

        foreign = QADataset(
            "eval",
            [
                QAInstance("f1", ("zebra", "quartz", "violin"), ("lantern", "oboe", "zebra"), 1, "c1"),
                QAInstance("f1", ("zebra", "quartz", "violin"), ("marble", "tundra", "kayak"), 0, "c2"),
            ],
        )
        with self.assertRaises(VocabularyError):
            check_vocabulary_coverage(checkpoint, foreign)

        dataset_path = self.root / "foreign.tsv"
        write_dataset(foreign, dataset_path)
        with self.assertRaises(CommandError) as raised:
            call_command("evaluate", checkpoint=str(checkpoint_path), dataset=str(dataset_path), stdout=StringIO())
        self.assertEqual(raised.exception.returncode, 2)
        self.assertIn("vocabulary", str(raised.exception))
        self.assertFalse(checkpoint_path.with_suffix(".run").exists())

    def test_arch_flag_switches_the_head_in_manifest_and_counts(self):
        data = self.make_corpus()
        self.train_small(data, run_tag="arch-hd")
        self.train_small(data, run_tag="arch-ntn", arch="ntnlstm")

        counted = {}
        for tag_name, architecture in (("arch-hd", "hdlstm"), ("arch-ntn", "ntnlstm")):
            manifest_path = self.root / "runs" / tag_name / "manifest.json"
            payload = json.loads(manifest_path.read_text(encoding="utf-8"))
            self.assertEqual(payload["model"]["architecture"], architecture)
            self.assertEqual(TrainingRun.objects.get(run_tag=tag_name).architecture, architecture)

            output = StringIO()
            call_command("count_params", config=str(manifest_path), stdout=output)
            lines = output.getvalue().splitlines()
            self.assertTrue(lines[0].startswith(f"architecture {architecture} "))
            counted[architecture] = next(line for line in lines if line.startswith("head "))

        hd_head = head_parameter_count("hdlstm", 4, h=3, use_overlap_feats=True)
        ntn_head = head_parameter_count("ntnlstm", 4, k=5, use_overlap_feats=True)
        self.assertEqual(counted["hdlstm"], f"head {hd_head:,}")
        self.assertEqual(counted["ntnlstm"], f"head {ntn_head:,}")
        self.assertNotEqual(hd_head, ntn_head)

        hd_manifest = json.loads((self.root / "runs" / "arch-hd" / "manifest.json").read_text(encoding="utf-8"))
        ntn_manifest = json.loads((self.root / "runs" / "arch-ntn" / "manifest.json").read_text(encoding="utf-8"))
        self.assertEqual((hd_manifest["model"]["hidden_dim"], hd_manifest["model"]["ntn_slices"]), (3, None))
        self.assertEqual((ntn_manifest["model"]["hidden_dim"], ntn_manifest["model"]["ntn_slices"]), (None, 5))

    def test_baselines_and_dataset_stats(self):
        data = self.make_corpus()
        output = StringIO()
        call_command("baselines", dataset=str(data / "dev.tsv"), run_dir=str(self.root / "baselines"), stdout=output)
        self.assertIn("random ", output.getvalue())
        self.assertIn("bm25 ", output.getvalue())
        self.assertTrue((self.root / "baselines" / "bm25.run").exists())

        output = StringIO()
        call_command("dataset_stats", str(data / "train.tsv"), str(data / "dev.tsv"), stdout=output)
        rows = output.getvalue().splitlines()
        self.assertEqual(len(rows), 3)
        self.assertIn("33.3", rows[1])

    def test_bench_command_reports_rows_and_skips_large_tensors(self):
        output = StringIO()
        with override_settings(HOLORANK_BENCH_TENSOR_MAX_ELEMENTS=5 * 8 * 8):
            call_command("bench", dims=[8, 16], repetitions=1, warmups=0, stdout=output)
        text = output.getvalue()
        self.assertIn("correlation_fft", text)
        self.assertIn("skipped", text)
        self.assertIn("slope correlation_fft", text)


class RunRegistryTests(TestCase):
    def test_restarting_a_tag_resets_the_run(self):
        manifest = build_manifest({"run.tag": "registry-check"})
        run = start_training_run(manifest)
        record_epoch(run, {"epoch": 1, "loss": 3.2, "dev_map": 0.4, "dev_mrr": 0.5, "wall_seconds": 1.0})
        record_epoch(run, {"epoch": 1, "loss": 3.0, "dev_map": 0.45, "dev_mrr": 0.5})
        run.refresh_from_db()
        self.assertEqual(run.epochs.count(), 1)
        self.assertEqual(run.epochs.get().loss, 3.0)

        mark_run_failed(run, RuntimeError("x" * 500))
        run.refresh_from_db()
        self.assertEqual(run.status, "failed")
        self.assertLessEqual(len(run.last_error), 240)

        again = start_training_run(manifest)
        self.assertEqual(again.pk, run.pk)
        self.assertEqual(again.status, "started")
        self.assertEqual(again.epochs.count(), 0)
        self.assertEqual(TrainingRun.objects.count(), 1)


class BenchTableTests(SimpleTestCase):
    def test_tensor_slices_are_skipped_above_the_element_limit(self):
        rows = run_bench(
            dims=(8, 16, 32),
            operators=("tensor_slices",),
            repetitions=1,
            warmups=0,
            max_tensor_elements=5 * 16 * 16,
        )
        self.assertEqual([row.d for row in rows], [8, 16, 32])
        self.assertEqual([row.skipped for row in rows], [False, False, True])
        self.assertIsNone(rows[2].median_ns)
        self.assertEqual(rows[2].params, head_parameter_count("ntnlstm", 32, k=5))
        self.assertIn("tensor_slices", fit_slopes(rows))

        only_skipped = run_bench(dims=(32, 64), operators=("tensor_slices",), max_tensor_elements=1)
        self.assertTrue(all(row.skipped for row in only_skipped))
        self.assertEqual(fit_slopes(only_skipped), {})

    def test_params_column_uses_exact_head_counts(self):
        rows = run_bench(dims=(640,), operators=("correlation_fft", "tensor_slices"), repetitions=1, warmups=0)
        params = {row.operator: row.params for row in rows}
        self.assertEqual(params, {"correlation_fft": 41_154, "tensor_slices": 2_054_417})


@tag("slow")
class BenchScalingTests(SimpleTestCase):
    """Log-log slopes over d = 2^8..2^14; tensor slices stop at the default 2^25 element limit (d = 2^11)."""

    def test_fft_correlation_scales_near_linearly(self):
        rows = run_bench(operators=("correlation_fft",), repetitions=30, warmups=5)
        self.assertEqual([row.d for row in rows], [2**power for power in range(8, 15)])
        self.assertLess(fit_slopes(rows)["correlation_fft"], 1.25)

    def test_direct_correlation_scales_quadratically(self):
        rows = run_bench(operators=("correlation_direct",), repetitions=3, warmups=1)
        self.assertEqual(max(row.d for row in rows), 2**14)
        self.assertGreater(fit_slopes(rows)["correlation_direct"], 1.7)

    def test_tensor_slices_scale_quadratically_until_skipped(self):
        rows = run_bench(operators=("tensor_slices",), repetitions=5, warmups=1)
        timed = [row.d for row in rows if not row.skipped]
        self.assertEqual(timed, [256, 512, 1024, 2048])
        self.assertGreater(fit_slopes(rows)["tensor_slices"], 1.7)
