"""Fixed-length sequence embeddings and an optional PCA reduction stage.

Three spectrum methods turn a sequence over an alphabet of s symbols into a
count vector indexed by mer rank (the base-s integer of the mer's symbol
ordinals, most significant first):

  kmer_spectrum       counts every k-length window; width s**k
  minimizer           counts, per k-length window, its minimizer: the
                      lexicographically smallest m-length window of the
                      k-mer or of the reversed k-mer, compared by symbol
                      ordinals; width s**m
  spaced              counts the first k residues of every g-length window
                      (one gapped seed shape, k < g); width s**k

When the resulting width exceeds a threshold the matrix is reduced to its
leading principal components, fit on the full matrix before any split.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import (
    DimensionMismatchError,
    FormatError,
    InvalidParameterError,
    SequenceTooShortError,
)
from .seq_io import Alphabet, LabeledSequence, Dataset

logger = logging.getLogger(__name__)

METHOD_KMER = "kmer_spectrum"
METHOD_MINIMIZER = "minimizer"
METHOD_SPACED = "spaced"
METHODS = (METHOD_KMER, METHOD_MINIMIZER, METHOD_SPACED)

# widest count vector we are willing to index
MAX_VECTOR_SIZE = 2**31 - 1

_METHOD_DEFAULTS = {
    METHOD_KMER: {"k": 3},
    METHOD_MINIMIZER: {"k": 9, "m": 3},
    METHOD_SPACED: {"k": 4, "g": 9},
}


@dataclass(frozen=True)
class SpectrumConfig:
    """Spectrum method plus window parameters; unset fields take the
    method's defaults (kmer k=3; minimizer k=9, m=3; spaced k=4, g=9)."""

    method: str
    alphabet: Alphabet
    k: int | None = None
    m: int | None = None
    g: int | None = None

    def __post_init__(self):
        if self.method not in METHODS:
            raise InvalidParameterError(
                f"method must be one of {METHODS}, got {self.method!r}"
            )
        defaults = _METHOD_DEFAULTS[self.method]
        for name, value in defaults.items():
            if getattr(self, name) is None:
                object.__setattr__(self, name, value)
        if self.k is None or self.k < 1:
            raise InvalidParameterError(f"k must be >= 1, got {self.k}")
        if self.method == METHOD_MINIMIZER:
            if self.m is None or not 1 <= self.m < self.k:
                raise InvalidParameterError(
                    f"minimizer needs 1 <= m < k, got m={self.m}, k={self.k}"
                )
        if self.method == METHOD_SPACED:
            if self.g is None or not self.k < self.g:
                raise InvalidParameterError(
                    f"spaced needs k < g, got k={self.k}, g={self.g}"
                )
        if self.width > MAX_VECTOR_SIZE:
            raise InvalidParameterError(
                f"spectrum width {len(self.alphabet)}**{self.rank_length} "
                f"exceeds the addressable limit {MAX_VECTOR_SIZE}"
            )

    @property
    def rank_length(self) -> int:
        """Mer length the output vector is indexed by."""
        return self.m if self.method == METHOD_MINIMIZER else self.k

    @property
    def width(self) -> int:
        return len(self.alphabet) ** self.rank_length

    @property
    def min_sequence_length(self) -> int:
        return self.g if self.method == METHOD_SPACED else self.k


def mer_rank(mer: str, alphabet: Alphabet) -> int:
    """Base-s integer of the mer's symbol ordinals, most significant first."""
    if not mer:
        raise InvalidParameterError("mer must be non-empty")
    nsym = len(alphabet)
    rank = 0
    for ch in mer:
        try:
            rank = rank * nsym + alphabet.index[ch]
        except KeyError:
            raise InvalidParameterError(f"symbol {ch!r} not in alphabet") from None
    return rank


def rank_to_mer(rank: int, length: int, alphabet: Alphabet) -> str:
    """Inverse of mer_rank for a fixed mer length."""
    nsym = len(alphabet)
    if length < 1:
        raise InvalidParameterError(f"length must be >= 1, got {length}")
    if not 0 <= rank < nsym**length:
        raise InvalidParameterError(f"rank {rank} out of range for length {length}")
    out = []
    for _ in range(length):
        rank, rem = divmod(rank, nsym)
        out.append(alphabet.symbols[rem])
    return "".join(reversed(out))


def enumerate_kmers(residues: str, k: int) -> list[str]:
    """All contiguous k-length windows in order; empty if the string is shorter."""
    if k < 1:
        raise InvalidParameterError(f"k must be >= 1, got {k}")
    return [residues[i : i + k] for i in range(len(residues) - k + 1)]


def _window_ranks(codes: np.ndarray, k: int, nsym: int) -> np.ndarray:
    powers = nsym ** np.arange(k - 1, -1, -1, dtype=np.int64)
    windows = sliding_window_view(codes, k).astype(np.int64)
    return windows @ powers


def _require_length(residues: str, needed: int):
    if len(residues) < needed:
        raise SequenceTooShortError(
            f"sequence length {len(residues)} is shorter than window {needed}"
        )


def kmer_spectrum(residues: str, cfg: SpectrumConfig) -> np.ndarray:
    """Count vector over all k-mers; sums to N - k + 1."""
    if cfg.method != METHOD_KMER:
        raise InvalidParameterError(f"config method is {cfg.method!r}, not kmer_spectrum")
    _require_length(residues, cfg.k)
    codes = cfg.alphabet.encode(residues)
    ranks = _window_ranks(codes, cfg.k, len(cfg.alphabet))
    return np.bincount(ranks, minlength=cfg.width).astype(np.float64)


def minimizer_of_kmer(kmer: str, m: int, alphabet: Alphabet) -> str:
    """Smallest m-length window of the k-mer or of its reversal, by ordinal order."""
    if not 1 <= m < len(kmer):
        raise InvalidParameterError(
            f"m must satisfy 1 <= m < len(kmer), got m={m}, len={len(kmer)}"
        )
    codes = alphabet.encode(kmer)
    forward = codes.tobytes()
    backward = forward[::-1]
    best = None
    for j in range(len(forward) - m + 1):
        for candidate in (forward[j : j + m], backward[j : j + m]):
            if best is None or candidate < best:
                best = candidate
    return alphabet.decode(np.frombuffer(best, dtype=np.uint8))


def minimizer_spectrum(residues: str, cfg: SpectrumConfig) -> np.ndarray:
    """Count vector over per-k-mer minimizers; sums to N - k + 1."""
    if cfg.method != METHOD_MINIMIZER:
        raise InvalidParameterError(f"config method is {cfg.method!r}, not minimizer")
    _require_length(residues, cfg.k)
    nsym = len(cfg.alphabet)
    k, m = cfg.k, cfg.m
    codes = cfg.alphabet.encode(residues)
    raw = codes.tobytes()
    counts = np.zeros(cfg.width, dtype=np.float64)
    for i in range(len(raw) - k + 1):
        forward = raw[i : i + k]
        backward = forward[::-1]
        best = None
        for j in range(k - m + 1):
            for candidate in (forward[j : j + m], backward[j : j + m]):
                if best is None or candidate < best:
                    best = candidate
        rank = 0
        for byte in best:
            rank = rank * nsym + byte
        counts[rank] += 1.0
    return counts


def spaced_spectrum(residues: str, cfg: SpectrumConfig) -> np.ndarray:
    """Count vector over the leading k-mer of every g-length window; sums to N - g + 1."""
    if cfg.method != METHOD_SPACED:
        raise InvalidParameterError(f"config method is {cfg.method!r}, not spaced")
    _require_length(residues, cfg.g)
    codes = cfg.alphabet.encode(residues)
    ranks = _window_ranks(codes, cfg.k, len(cfg.alphabet))
    n_windows = len(residues) - cfg.g + 1
    return np.bincount(ranks[:n_windows], minlength=cfg.width).astype(np.float64)


_SPECTRUM_FNS = {
    METHOD_KMER: kmer_spectrum,
    METHOD_MINIMIZER: minimizer_spectrum,
    METHOD_SPACED: spaced_spectrum,
}


@dataclass
class FeatureMatrix:
    """Dense n x d feature matrix with row ids and a column-meaning tag."""

    values: np.ndarray
    row_ids: list[str]
    col_meaning: str = "mer-rank"

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise DimensionMismatchError(
                f"feature matrix must be 2-D, got {self.values.ndim}-D"
            )
        if len(self.row_ids) != self.values.shape[0]:
            raise DimensionMismatchError(
                f"{len(self.row_ids)} row ids for {self.values.shape[0]} rows"
            )

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def cols(self) -> int:
        return self.values.shape[1]

    def to_csv(self) -> str:
        header = "id," + ",".join(f"c{j}" for j in range(self.cols))
        lines = [header]
        for rid, row in zip(self.row_ids, self.values):
            lines.append(rid + "," + ",".join(repr(float(v)) for v in row))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_csv(cls, text: str, col_meaning: str = "mer-rank") -> "FeatureMatrix":
        lines = [line for line in text.splitlines() if line]
        if not lines:
            raise FormatError("matrix CSV is empty")
        header = lines[0].split(",")
        if header[0] != "id" or header[1:] != [f"c{j}" for j in range(len(header) - 1)]:
            raise FormatError("matrix CSV header must be id,c0,c1,...")
        width = len(header) - 1
        ids: list[str] = []
        rows: list[list[float]] = []
        for lineno, line in enumerate(lines[1:], start=2):
            parts = line.split(",")
            if len(parts) != width + 1:
                raise FormatError(f"matrix CSV line {lineno}: expected {width + 1} fields")
            ids.append(parts[0])
            try:
                rows.append([float(v) for v in parts[1:]])
            except ValueError:
                raise FormatError(f"matrix CSV line {lineno}: non-numeric value") from None
        if not rows:
            raise FormatError("matrix CSV has no data rows")
        return cls(np.array(rows, dtype=np.float64), ids, col_meaning)


@dataclass
class PcaModel:
    """Mean vector plus top-r principal directions of a fitted matrix."""

    mean: np.ndarray
    components: np.ndarray  # d x r, columns are directions
    explained_variance: np.ndarray  # length r, nonincreasing


def fit_pca(matrix: FeatureMatrix | np.ndarray, r: int) -> PcaModel:
    """Fit the top-r principal components of the centered matrix.

    Components are orthonormal, explained variances are nonincreasing, and
    each component's sign is fixed so its largest-magnitude entry is
    positive. Asking for more components than the data's rank is allowed;
    the surplus directions just carry near-zero variance.
    """
    X = np.asarray(getattr(matrix, "values", matrix), dtype=np.float64)
    if X.ndim != 2:
        raise DimensionMismatchError("fit_pca expects a 2-D matrix")
    n, d = X.shape
    if n < 2:
        raise InvalidParameterError(f"fit_pca needs at least 2 rows, got {n}")
    if not 1 <= r <= min(n, d):
        raise InvalidParameterError(
            f"r must satisfy 1 <= r <= min(n, d) = {min(n, d)}, got {r}"
        )
    mean = X.mean(axis=0)
    centered = X - mean
    _, singular, vt = np.linalg.svd(centered, full_matrices=False)
    components = vt[:r].T.copy()
    explained = (singular[:r] ** 2) / (n - 1)
    for col in range(components.shape[1]):
        peak = int(np.argmax(np.abs(components[:, col])))
        if components[peak, col] < 0:
            components[:, col] = -components[:, col]
    return PcaModel(mean, components, explained)


def apply_pca(model: PcaModel, matrix: FeatureMatrix) -> FeatureMatrix:
    """Project a matrix onto the fitted components (rows stay aligned)."""
    X = matrix.values
    if X.shape[1] != model.mean.shape[0]:
        raise DimensionMismatchError(
            f"matrix width {X.shape[1]} does not match model width {model.mean.shape[0]}"
        )
    projected = (X - model.mean) @ model.components
    return FeatureMatrix(projected, list(matrix.row_ids), "pc-rank")


def embed_sequences(
    sequences: list[LabeledSequence],
    cfg: SpectrumConfig,
    pca_threshold: int = 1000,
    pca_r: int = 500,
) -> FeatureMatrix:
    """Embed sequences row by row; reduce with PCA when width > pca_threshold.

    The reduction keeps min(pca_r, n, d) components and is fit on the full
    matrix, so it must happen before any train/test split.
    """
    if not sequences:
        raise InvalidParameterError("no sequences to embed")
    if pca_threshold < 0:
        raise InvalidParameterError(f"pca_threshold must be >= 0, got {pca_threshold}")
    if pca_r < 1:
        raise InvalidParameterError(f"pca_r must be >= 1, got {pca_r}")
    spectrum = _SPECTRUM_FNS[cfg.method]
    rows = []
    for seq in sequences:
        try:
            rows.append(spectrum(seq.residues, cfg))
        except SequenceTooShortError as exc:
            raise SequenceTooShortError(f"sequence '{seq.id}': {exc}") from None
    fm = FeatureMatrix(np.vstack(rows), [s.id for s in sequences], "mer-rank")
    if fm.cols > pca_threshold:
        if fm.rows < 2:
            # the reduction needs >= 2 rows to fit; a lone spectrum stays raw
            logger.warning(
                "matrix width %d exceeds pca_threshold %d but a single row "
                "cannot be reduced; keeping raw counts",
                fm.cols,
                pca_threshold,
            )
            return fm
        r = min(pca_r, fm.rows, fm.cols)
        model = fit_pca(fm, r)
        fm = apply_pca(model, fm)
    return fm


def embed_dataset(
    ds: Dataset,
    cfg: SpectrumConfig,
    pca_threshold: int = 1000,
    pca_r: int = 500,
) -> FeatureMatrix:
    """Embed a Dataset's sequences in their stored order."""
    return embed_sequences(ds.sequences, cfg, pca_threshold, pca_r)
