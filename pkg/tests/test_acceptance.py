"""End-to-end acceptance checks, one test per guaranteed behavior.

Each test pins its tolerance explicitly and recomputes expectations with
independent brute-force code so regressions cannot hide behind shared
helpers. The conftest hook prints one PASS/FAIL line per test at the end
of the run.
"""

from pathlib import Path

import numpy as np
import pytest

from seqaccel import cli
from seqaccel.embed import (
    METHOD_KMER,
    METHOD_MINIMIZER,
    METHOD_SPACED,
    SpectrumConfig,
    apply_pca,
    embed_dataset,
    fit_pca,
    kmer_spectrum,
    minimizer_of_kmer,
    minimizer_spectrum,
    rank_to_mer,
    spaced_spectrum,
    FeatureMatrix,
)
from seqaccel.seq_io import (
    AMINO_ALPHABET,
    NUCLEOTIDE_ALPHABET,
    one_hot_matrix,
    synth_dataset,
)
from seqaccel.trainer import (
    DEFAULT_ALPHA_GRID,
    NORM_PAPER_SUM,
    NORM_SOFTMAX,
    TrainConfig,
    alpha_sweep,
    batch_gradient,
    cross_entropy,
    normalize_prediction,
    train,
)

REL_TOL_GRADIENT = 1e-5
ABS_TOL_PCA = 1e-8
ABS_TOL_SUM = 1e-9
ABS_TOL_CE_EXAMPLE = 1e-4


@pytest.fixture(scope="module")
def benchmark_data():
    """Separable 3-class synthetic dataset embedded as 3-mer counts."""
    ds = synth_dataset(3, 100, 60, 6, 0.05, 13)
    cfg = SpectrumConfig(METHOD_KMER, NUCLEOTIDE_ALPHABET, k=3)
    fm = embed_dataset(ds, cfg)
    Y = one_hot_matrix([s.label for s in ds.sequences], ds.classes)
    return fm, Y


def test_c1_alpha_zero_bitwise_reduction(benchmark_data):
    """alpha=0 training equals a history-free plain loop, bitwise exact."""
    fm, Y = benchmark_data
    iters = 200
    _, trace = train(fm, Y, TrainConfig(alpha=0.0, iters=iters, seed=13))
    assert len(trace.records) == iters

    # independent plain-update loop, written without any model of history
    X = fm.values
    n, d = X.shape
    C = Y.shape[1]
    W = np.random.default_rng(13).standard_normal((C, d))
    labels_idx = Y.argmax(axis=1)
    plain_losses = []
    plain_accs = []
    for _ in range(iters):
        scores = X @ W.T
        shifted = np.exp(scores - scores.max(axis=1, keepdims=True))
        P = shifted / shifted.sum(axis=1, keepdims=True)
        p_true = P[np.arange(n), labels_idx]
        plain_losses.append(float(np.mean(-np.log(np.maximum(p_true, 0.0) + 1e-10))))
        plain_accs.append(float(np.mean(P.argmax(axis=1) == labels_idx)))
        W = W + (Y - P).T @ X / n

    for rec, loss, acc in zip(trace.records, plain_losses, plain_accs):
        assert rec.mean_loss == loss  # exact, no tolerance
        assert rec.accuracy == acc


def test_c2_softmax_gradient_matches_finite_differences():
    """Analytic step direction matches central differences, rel error < 1e-5."""
    h = 1e-6
    for instance in range(20):
        rng = np.random.default_rng(1000 + instance)
        X = rng.normal(size=(4, 5))
        labels = rng.integers(0, 3, size=4)
        Y = np.zeros((4, 3))
        Y[np.arange(4), labels] = 1.0
        W = rng.normal(size=(3, 5))

        analytic = batch_gradient(X, Y, W, NORM_SOFTMAX)

        def mean_loss(weights):
            total = 0.0
            for i in range(4):
                p = normalize_prediction(weights @ X[i], NORM_SOFTMAX)
                total += cross_entropy(Y[i], p)
            return total / 4

        for i in range(3):
            for j in range(5):
                Wp, Wm = W.copy(), W.copy()
                Wp[i, j] += h
                Wm[i, j] -= h
                fd = (mean_loss(Wp) - mean_loss(Wm)) / (2 * h)
                expected = -fd  # the returned direction is the descent step
                got = analytic[i, j]
                denom = max(abs(expected), abs(got), 1e-8)
                assert abs(expected - got) / denom < REL_TOL_GRADIENT, (
                    f"instance {instance} entry ({i},{j}): fd {expected} vs {got}"
                )


def _oracle_counts_kmer(s, k):
    counts = {}
    for i in range(len(s) - k + 1):
        mer = s[i : i + k]
        counts[mer] = counts.get(mer, 0) + 1
    return counts


def _oracle_min_window(kmer, m, alphabet):
    best = None
    for source in (kmer, kmer[::-1]):
        for j in range(len(source) - m + 1):
            window = source[j : j + m]
            key = tuple(alphabet.index[ch] for ch in window)
            if best is None or key < best[0]:
                best = (key, window)
    return best[1]


def _oracle_counts_minimizer(s, k, m, alphabet):
    counts = {}
    for i in range(len(s) - k + 1):
        mini = _oracle_min_window(s[i : i + k], m, alphabet)
        counts[mini] = counts.get(mini, 0) + 1
    return counts


def _oracle_counts_spaced(s, k, g):
    counts = {}
    for i in range(len(s) - g + 1):
        mer = s[i : i + g][:k]
        counts[mer] = counts.get(mer, 0) + 1
    return counts


def _to_counts(vec, mer_length, alphabet):
    return {
        rank_to_mer(rank, mer_length, alphabet): int(v)
        for rank, v in enumerate(vec)
        if v
    }


def test_c3_spectra_match_bruteforce_oracles():
    """All three spectra equal dictionary-count oracles on 100 random
    sequences (lengths 20-200, both residue alphabets), exactly."""
    rng = np.random.default_rng(33)
    for index in range(100):
        alphabet = NUCLEOTIDE_ALPHABET if index % 2 == 0 else AMINO_ALPHABET
        length = int(rng.integers(20, 201))
        s = "".join(
            alphabet.symbols[i] for i in rng.integers(0, len(alphabet), length)
        )

        cfg = SpectrumConfig(METHOD_KMER, alphabet)  # k=3
        vec = kmer_spectrum(s, cfg)
        assert _to_counts(vec, 3, alphabet) == _oracle_counts_kmer(s, 3)
        assert vec.sum() == length - 3 + 1

        cfg = SpectrumConfig(METHOD_MINIMIZER, alphabet)  # k=9, m=3
        vec = minimizer_spectrum(s, cfg)
        assert _to_counts(vec, 3, alphabet) == _oracle_counts_minimizer(
            s, 9, 3, alphabet
        )
        assert vec.sum() == length - 9 + 1

        cfg = SpectrumConfig(METHOD_SPACED, alphabet)  # k=4, g=9
        vec = spaced_spectrum(s, cfg)
        assert _to_counts(vec, 4, alphabet) == _oracle_counts_spaced(s, 4, 9)
        assert vec.sum() == length - 9 + 1


def test_c4_minimizer_matches_exhaustive_scan():
    """minimizer_of_kmer equals the exhaustive forward+reversed window scan
    on 1000 random 9-mers with m=3, exactly."""
    rng = np.random.default_rng(44)
    for index in range(1000):
        alphabet = NUCLEOTIDE_ALPHABET if index % 2 == 0 else AMINO_ALPHABET
        kmer = "".join(
            alphabet.symbols[i] for i in rng.integers(0, len(alphabet), 9)
        )
        assert minimizer_of_kmer(kmer, 3, alphabet) == _oracle_min_window(
            kmer, 3, alphabet
        )


def test_c5_acceleration_improves_loss_and_convergence(benchmark_data):
    """Sweeping the default alpha grid (300 iterations, seed 13) finds an
    alpha whose final loss is <= the alpha=0 final loss and that reaches
    1.1x the alpha=0 final loss in no more iterations."""
    fm, Y = benchmark_data
    base = TrainConfig(alpha=0.0, iters=300, seed=13, norm_mode=NORM_SOFTMAX)

    _, baseline_trace = train(fm, Y, base)
    baseline_final = baseline_trace.final_loss
    threshold = 1.1 * baseline_final

    result = alpha_sweep(fm, Y, base, DEFAULT_ALPHA_GRID, loss_threshold=threshold)
    assert result.best_alpha is not None
    best = next(e for e in result.entries if e.alpha == result.best_alpha)
    zero = next(e for e in result.entries if e.alpha == 0.0)

    assert zero.status == "ok"
    assert zero.final_loss == baseline_final  # same seed, same run
    assert best.final_loss <= zero.final_loss
    assert zero.iterations_to_threshold is not None
    assert best.iterations_to_threshold is not None
    assert best.iterations_to_threshold <= zero.iterations_to_threshold


def test_c6_pca_properties():
    """Orthonormal components, nonincreasing variance, reconstruction to
    1e-8, and a collinear cloud concentrating >= 99.999% in component 1."""
    rng = np.random.default_rng(66)
    X = rng.normal(size=(40, 8)) * np.linspace(3.0, 0.2, 8)
    model = fit_pca(X, 8)

    gram = model.components.T @ model.components
    assert np.max(np.abs(gram - np.eye(8))) < ABS_TOL_PCA

    ev = model.explained_variance
    assert np.all(ev[:-1] >= ev[1:] - 1e-15)

    fm = FeatureMatrix(X, [f"r{i}" for i in range(40)])
    projected = apply_pca(model, fm)
    reconstructed = projected.values @ model.components.T + model.mean
    assert np.max(np.abs(reconstructed - X)) < ABS_TOL_PCA

    t = rng.normal(size=50)
    collinear = np.column_stack([t, -2.0 * t]) + np.array([1.0, 5.0])
    collinear_model = fit_pca(collinear, 2)
    share = collinear_model.explained_variance[0] / collinear_model.explained_variance.sum()
    assert share >= 0.99999


def test_c7_pipeline_replay_byte_identical(tmp_path, monkeypatch):
    """synth -> embed -> train -> report, then replaying the recorded
    manifests, reproduces the trace CSV and the SVG byte for byte."""
    monkeypatch.chdir(tmp_path)
    assert cli.main(["synth", "--classes", "3", "--per-class", "20",
                     "--length", "50", "--motif-len", "6", "--seed", "13"]) == 0
    assert cli.main(["embed", "--fasta", "synth.fasta",
                     "--labels", "synth.labels.tsv", "--method", "spike2vec",
                     "--k", "3", "--alphabet", "nucleotide"]) == 0
    assert cli.main(["train", "--matrix", "embedded.csv",
                     "--labels", "embedded.labels.tsv", "--alpha", "0.5",
                     "--iters", "60", "--seed", "13"]) == 0
    assert cli.main(["report", "--with-aa", "trace.csv", "--no-png"]) == 0

    trace_bytes = Path("trace.csv").read_bytes()
    svg_bytes = Path("report.svg").read_bytes()

    assert cli.main(["replay", "trace.csv.manifest"]) == 0
    assert cli.main(["replay", "report.svg.manifest"]) == 0

    assert Path("trace.csv").read_bytes() == trace_bytes
    assert Path("report.svg").read_bytes() == svg_bytes


def test_c8_sum_normalization_fidelity():
    """Sum normalization keeps the argmax and sums to 1 within 1e-9 for
    positive scores; the loss example p=(2,-1) evaluates to about -0.6931."""
    rng = np.random.default_rng(88)
    for _ in range(50):
        scores = rng.uniform(0.1, 10.0, size=int(rng.integers(2, 7)))
        p = normalize_prediction(scores, NORM_PAPER_SUM)
        assert p.argmax() == scores.argmax()
        assert abs(p.sum() - 1.0) < ABS_TOL_SUM

    loss = cross_entropy(np.array([1.0, 0.0]), np.array([2.0, -1.0]))
    assert loss == pytest.approx(-0.6931, abs=ABS_TOL_CE_EXAMPLE)
    assert loss < 0
