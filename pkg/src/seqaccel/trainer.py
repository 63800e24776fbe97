"""Multiclass linear-classifier training with an iterate-difference acceleration term.

The classifier is a C x d weight matrix W scoring d-dimensional feature rows.
Each sample contributes outer(y - p, x) to an averaged step direction, where
y is the one-hot label row and p the normalized prediction. With softmax
normalization that averaged step is exactly the negative gradient of mean
cross-entropy, so adding it to W is plain gradient descent with unit step
size. The accelerated update also mixes in the difference of the two most
recent iterate snapshots once both exist, which is from the third iteration
onward:

    W_next = W + alpha * (prev - prev2) + step * G

where prev and prev2 are the pre-update weights of the previous two
iterations. alpha = 0 reproduces the plain update bitwise; step defaults to
1.0 and exists only as a stability knob.

Normalization modes: "softmax" (default) yields proper probability rows.
"paper_sum" divides scores by their plain sum, which can produce entries
outside [0, 1] and negative losses; a sample whose score sum falls below
epsilon contributes a uniform prediction instead and is counted in the
trace's degenerate_events.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateSumError,
    DimensionMismatchError,
    FormatError,
    InvalidParameterError,
    NonFiniteWeightsError,
)

NORM_SOFTMAX = "softmax"
NORM_PAPER_SUM = "paper_sum"
NORM_MODES = (NORM_PAPER_SUM, NORM_SOFTMAX)

DEFAULT_ALPHA_GRID: tuple[float, ...] = tuple(i / 10 for i in range(11))

TRACE_CSV_HEADER = "iteration,mean_loss,accuracy"
SWEEP_CSV_HEADER = "alpha,final_loss,iterations_to_threshold,status"
MODEL_FORMAT_TAG = "seqaccel-model-v1"


@dataclass(frozen=True)
class TrainConfig:
    """Training hyperparameters. alpha weights the iterate-difference term."""

    alpha: float
    iters: int
    seed: int
    norm_mode: str = NORM_SOFTMAX
    epsilon: float = 1e-10
    step: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise InvalidParameterError(f"alpha must be in [0, 1], got {self.alpha}")
        if self.iters < 1:
            raise InvalidParameterError(f"iters must be >= 1, got {self.iters}")
        if self.norm_mode not in NORM_MODES:
            raise InvalidParameterError(
                f"norm_mode must be one of {NORM_MODES}, got {self.norm_mode!r}"
            )
        if not self.epsilon > 0.0:
            raise InvalidParameterError(f"epsilon must be > 0, got {self.epsilon}")
        if not self.step > 0.0:
            raise InvalidParameterError(f"step must be > 0, got {self.step}")


@dataclass
class TraceRecord:
    """Per-iteration stats measured on the pre-update weights."""

    iteration: int
    mean_loss: float
    accuracy: float
    aa_active: bool = False


@dataclass
class TrainingTrace:
    records: list[TraceRecord] = field(default_factory=list)
    aborted: bool = False
    degenerate_events: int = 0

    @property
    def final_loss(self) -> float:
        if not self.records:
            raise InvalidParameterError("trace has no records")
        return self.records[-1].mean_loss

    def iterations_to_threshold(self, loss_threshold: float) -> int | None:
        """First iteration whose mean loss is <= the threshold, if any."""
        for rec in self.records:
            if rec.mean_loss <= loss_threshold:
                return rec.iteration
        return None

    def to_csv(self) -> str:
        lines = [TRACE_CSV_HEADER]
        for rec in self.records:
            lines.append(f"{rec.iteration},{rec.mean_loss!r},{rec.accuracy!r}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_csv(cls, text: str) -> "TrainingTrace":
        lines = [line for line in text.splitlines() if line]
        if not lines or lines[0] != TRACE_CSV_HEADER:
            raise FormatError(f"trace CSV must start with header '{TRACE_CSV_HEADER}'")
        records = []
        for lineno, line in enumerate(lines[1:], start=2):
            parts = line.split(",")
            if len(parts) != 3:
                raise FormatError(f"trace CSV line {lineno}: expected 3 fields")
            try:
                records.append(
                    TraceRecord(int(parts[0]), float(parts[1]), float(parts[2]))
                )
            except ValueError:
                raise FormatError(f"trace CSV line {lineno}: non-numeric value") from None
        if not records:
            raise FormatError("trace CSV has no data rows")
        return cls(records)


@dataclass
class ModelState:
    """Weights plus the two most recent pre-update iterates (or None)."""

    W: np.ndarray
    prev: np.ndarray | None
    prev2: np.ndarray | None
    iteration: int


def init_weights(num_classes: int, dim: int, seed: int) -> np.ndarray:
    """Standard-normal C x d weights from a seeded generator (PCG64)."""
    if num_classes < 2:
        raise InvalidParameterError(f"num_classes must be >= 2, got {num_classes}")
    if dim < 1:
        raise InvalidParameterError(f"dim must be >= 1, got {dim}")
    return np.random.default_rng(seed).standard_normal((num_classes, dim))


def predict_scores(W: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Per-class scores W @ x for one feature vector."""
    W = np.asarray(W, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    if W.ndim != 2 or x.ndim != 1 or W.shape[1] != x.shape[0]:
        raise DimensionMismatchError(
            f"cannot score feature vector of shape {x.shape} with weights {W.shape}"
        )
    return W @ x


def normalize_prediction(
    scores: np.ndarray, mode: str = NORM_SOFTMAX, epsilon: float = 1e-10
) -> np.ndarray:
    """Turn a score vector into a prediction under the chosen mode.

    softmax subtracts the max before exponentiating. paper_sum divides by
    the plain score sum and raises DegenerateSumError when that sum is
    within epsilon of zero; its output may have entries outside [0, 1].
    """
    s = np.asarray(scores, dtype=np.float64)
    if s.ndim != 1 or s.size == 0:
        raise DimensionMismatchError("scores must be a non-empty 1-D vector")
    if mode == NORM_SOFTMAX:
        shifted = np.exp(s - s.max())
        return shifted / shifted.sum()
    if mode == NORM_PAPER_SUM:
        total = s.sum()
        if abs(total) < epsilon:
            raise DegenerateSumError(
                f"score sum {total!r} is within epsilon {epsilon!r} of zero"
            )
        return s / total
    raise InvalidParameterError(f"unknown normalization mode {mode!r}")


def cross_entropy(y: np.ndarray, p: np.ndarray, epsilon: float = 1e-10) -> float:
    """-sum(y * log(max(p, 0) + epsilon)).

    The clamp guards the log against paper_sum predictions that are
    negative or zero; with such predictions the value can itself be
    negative (an entry above 1 gives a negative log term).
    """
    y = np.asarray(y, dtype=np.float64)
    p = np.asarray(p, dtype=np.float64)
    if y.shape != p.shape or y.ndim != 1:
        raise DimensionMismatchError(
            f"label and prediction shapes differ: {y.shape} vs {p.shape}"
        )
    return float(-np.sum(y * np.log(np.maximum(p, 0.0) + epsilon)))


def _forward(
    X: np.ndarray, W: np.ndarray, mode: str, epsilon: float, strict: bool = False
) -> tuple[np.ndarray, int]:
    """Prediction rows for every sample; returns (P, degenerate_count).

    strict raises DegenerateSumError (with the first offending sample
    index) instead of substituting uniform rows.
    """
    scores = X @ W.T
    if mode == NORM_SOFTMAX:
        shifted = np.exp(scores - scores.max(axis=1, keepdims=True))
        return shifted / shifted.sum(axis=1, keepdims=True), 0
    sums = scores.sum(axis=1)
    bad = np.abs(sums) < epsilon
    n_bad = int(np.count_nonzero(bad))
    if n_bad == 0:
        return scores / sums[:, None], 0
    if strict:
        idx = int(np.nonzero(bad)[0][0])
        raise DegenerateSumError(
            f"score sum within epsilon of zero for sample {idx}", sample_index=idx
        )
    safe = np.where(bad, 1.0, sums)
    P = scores / safe[:, None]
    P[bad] = 1.0 / W.shape[0]
    return P, n_bad


def batch_gradient(
    X: np.ndarray,
    Y: np.ndarray,
    W: np.ndarray,
    mode: str = NORM_SOFTMAX,
    epsilon: float = 1e-10,
) -> np.ndarray:
    """Averaged step direction (1/n) * sum_i outer(y_i - p_i, x_i).

    For softmax this equals the negative gradient of mean cross-entropy.
    In paper_sum mode a degenerate score sum raises DegenerateSumError
    carrying the sample index.
    """
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    W = np.asarray(W, dtype=np.float64)
    if X.ndim != 2 or Y.ndim != 2 or W.ndim != 2:
        raise DimensionMismatchError("batch_gradient expects 2-D X, Y and W")
    n = X.shape[0]
    if n < 1:
        raise InvalidParameterError("batch_gradient needs at least one sample")
    if Y.shape[0] != n or Y.shape[1] != W.shape[0] or X.shape[1] != W.shape[1]:
        raise DimensionMismatchError(
            f"inconsistent shapes: X {X.shape}, Y {Y.shape}, W {W.shape}"
        )
    P, _ = _forward(X, W, mode, epsilon, strict=True)
    return (Y - P).T @ X / n


def aa_update(
    W: np.ndarray,
    prev: np.ndarray | None,
    prev2: np.ndarray | None,
    grad: np.ndarray,
    alpha: float,
) -> np.ndarray:
    """One weight update; the acceleration term needs two prior iterates.

    With both prior iterates present the result is
    W + alpha * (prev - prev2) + grad, otherwise W + grad. Raises
    NonFiniteWeightsError if any output entry is not finite.
    """
    W = np.asarray(W, dtype=np.float64)
    grad = np.asarray(grad, dtype=np.float64)
    if W.shape != grad.shape:
        raise DimensionMismatchError(
            f"gradient shape {grad.shape} does not match weights {W.shape}"
        )
    if prev2 is None:
        out = W + grad
    else:
        if prev is None:
            raise InvalidParameterError("prev2 is set but prev is missing")
        prev = np.asarray(prev, dtype=np.float64)
        prev2 = np.asarray(prev2, dtype=np.float64)
        if prev.shape != W.shape or prev2.shape != W.shape:
            raise DimensionMismatchError("history shapes do not match weights")
        out = W + alpha * (prev - prev2) + grad
    if not np.all(np.isfinite(out)):
        raise NonFiniteWeightsError("update produced non-finite weights")
    return out


def accuracy(Y: np.ndarray, P: np.ndarray) -> float:
    """Fraction of rows whose argmax matches (ties go to the lowest index)."""
    Y = np.asarray(Y, dtype=np.float64)
    P = np.asarray(P, dtype=np.float64)
    if Y.ndim != 2 or P.ndim != 2 or Y.shape[0] != P.shape[0]:
        raise DimensionMismatchError(
            f"row counts differ: Y {Y.shape} vs P {P.shape}"
        )
    return float(np.mean(Y.argmax(axis=1) == P.argmax(axis=1)))


def train(X, Y: np.ndarray, cfg: TrainConfig) -> tuple[ModelState, TrainingTrace]:
    """Run the full-batch training loop and record one trace row per iteration.

    Each iteration measures loss and accuracy on the current weights, then
    computes the averaged step and applies aa_update; the pre-update
    weights become the newest history snapshot, so the acceleration term
    first fires at iteration 3. On divergence the raised
    NonFiniteWeightsError carries the partial trace (flagged aborted) and
    the last finite state.
    """
    Xv = np.asarray(getattr(X, "values", X), dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    if Xv.ndim != 2 or Y.ndim != 2:
        raise DimensionMismatchError("train expects 2-D X and Y")
    n, dim = Xv.shape
    if n < 1:
        raise InvalidParameterError("train needs at least one sample")
    if Y.shape[0] != n:
        raise DimensionMismatchError(
            f"X has {n} rows but Y has {Y.shape[0]}"
        )
    num_classes = Y.shape[1]
    if num_classes < 2:
        raise InvalidParameterError(f"need at least 2 classes, got {num_classes}")
    if not np.all(np.isfinite(Xv)):
        raise InvalidParameterError("features must be finite")

    labels_idx = Y.argmax(axis=1)
    W = init_weights(num_classes, dim, cfg.seed)
    prev: np.ndarray | None = None
    prev2: np.ndarray | None = None
    trace = TrainingTrace()
    sample_idx = np.arange(n)
    try:
        for iteration in range(1, cfg.iters + 1):
            P, n_degenerate = _forward(Xv, W, cfg.norm_mode, cfg.epsilon)
            trace.degenerate_events += n_degenerate
            p_true = P[sample_idx, labels_idx]
            mean_loss = float(
                np.mean(-np.log(np.maximum(p_true, 0.0) + cfg.epsilon))
            )
            acc = float(np.mean(P.argmax(axis=1) == labels_idx))
            trace.records.append(
                TraceRecord(iteration, mean_loss, acc, aa_active=prev2 is not None)
            )
            grad = (Y - P).T @ Xv / n
            if cfg.step != 1.0:
                grad = cfg.step * grad
            new_W = aa_update(W, prev, prev2, grad, cfg.alpha)
            prev2, prev, W = prev, W, new_W
    except NonFiniteWeightsError as exc:
        trace.aborted = True
        exc.trace = trace
        exc.state = ModelState(W, prev, prev2, len(trace.records))
        raise
    return ModelState(W, prev, prev2, cfg.iters), trace


@dataclass
class AlphaSweepEntry:
    alpha: float
    status: str  # "ok" or "failed"
    final_loss: float
    iterations_to_threshold: int | None
    trace: TrainingTrace | None
    error: str | None = None


@dataclass
class AlphaSweepResult:
    entries: list[AlphaSweepEntry]
    best_alpha: float | None


def alpha_sweep(
    X,
    Y: np.ndarray,
    base_cfg: TrainConfig,
    grid: tuple[float, ...] = DEFAULT_ALPHA_GRID,
    loss_threshold: float | None = None,
) -> AlphaSweepResult:
    """Train once per alpha with identical seed and rank by final loss.

    best_alpha is the smallest alpha attaining the minimum final loss
    among runs that finished; a diverging run is marked failed and skipped
    rather than aborting the sweep. Entries come back sorted by alpha.
    """
    values = sorted(float(a) for a in grid)
    if not values:
        raise InvalidParameterError("alpha grid is empty")
    for a in values:
        if not 0.0 <= a <= 1.0:
            raise InvalidParameterError(f"grid alpha {a} outside [0, 1]")
    entries: list[AlphaSweepEntry] = []
    for a in values:
        cfg = dataclasses.replace(base_cfg, alpha=a)
        try:
            _, trace = train(X, Y, cfg)
        except NonFiniteWeightsError as exc:
            entries.append(
                AlphaSweepEntry(a, "failed", float("nan"), None, exc.trace, str(exc))
            )
            continue
        reached = (
            trace.iterations_to_threshold(loss_threshold)
            if loss_threshold is not None
            else None
        )
        entries.append(AlphaSweepEntry(a, "ok", trace.final_loss, reached, trace))
    finished = [e for e in entries if e.status == "ok"]
    best_alpha = (
        min(finished, key=lambda e: (e.final_loss, e.alpha)).alpha if finished else None
    )
    return AlphaSweepResult(entries, best_alpha)


def sweep_to_csv(result: AlphaSweepResult) -> str:
    lines = [SWEEP_CSV_HEADER]
    for e in result.entries:
        reached = "" if e.iterations_to_threshold is None else str(e.iterations_to_threshold)
        lines.append(f"{e.alpha!r},{e.final_loss!r},{reached},{e.status}")
    return "\n".join(lines) + "\n"


def model_to_text(W: np.ndarray, classes: list[str], cfg: TrainConfig) -> str:
    """Serialize weights, class names and config to the versioned text format."""
    W = np.asarray(W, dtype=np.float64)
    if W.ndim != 2 or W.shape[0] != len(classes):
        raise DimensionMismatchError(
            f"weights {W.shape} do not match {len(classes)} classes"
        )
    lines = [
        MODEL_FORMAT_TAG,
        f"classes={len(classes)}",
    ]
    lines.extend(f"class.{i}={name}" for i, name in enumerate(classes))
    lines.extend(
        [
            f"rows={W.shape[0]}",
            f"cols={W.shape[1]}",
            f"alpha={cfg.alpha!r}",
            f"iters={cfg.iters}",
            f"seed={cfg.seed}",
            f"norm_mode={cfg.norm_mode}",
            f"epsilon={cfg.epsilon!r}",
            f"step={cfg.step!r}",
            "weights:",
        ]
    )
    for row in W:
        lines.append(" ".join(repr(float(v)) for v in row))
    return "\n".join(lines) + "\n"


def model_from_text(text: str) -> tuple[np.ndarray, list[str], TrainConfig]:
    """Parse the versioned model format back into (W, classes, config)."""
    lines = text.splitlines()
    if not lines or lines[0] != MODEL_FORMAT_TAG:
        raise FormatError(f"model file must start with '{MODEL_FORMAT_TAG}'")
    fields: dict[str, str] = {}
    weight_rows: list[list[float]] = []
    in_weights = False
    for line in lines[1:]:
        if not line.strip():
            continue
        if line == "weights:":
            in_weights = True
            continue
        if in_weights:
            try:
                weight_rows.append([float(v) for v in line.split()])
            except ValueError:
                raise FormatError("model file: non-numeric weight entry") from None
        else:
            key, sep, value = line.partition("=")
            if not sep:
                raise FormatError(f"model file: malformed line {line!r}")
            fields[key] = value
    try:
        n_classes = int(fields["classes"])
        classes = [fields[f"class.{i}"] for i in range(n_classes)]
        rows, cols = int(fields["rows"]), int(fields["cols"])
        cfg = TrainConfig(
            alpha=float(fields["alpha"]),
            iters=int(fields["iters"]),
            seed=int(fields["seed"]),
            norm_mode=fields["norm_mode"],
            epsilon=float(fields["epsilon"]),
            step=float(fields["step"]),
        )
    except KeyError as exc:
        raise FormatError(f"model file: missing field {exc}") from None
    W = np.array(weight_rows, dtype=np.float64)
    if W.shape != (rows, cols):
        raise FormatError(
            f"model file: weight block {W.shape} does not match header ({rows}, {cols})"
        )
    if rows != n_classes:
        raise FormatError("model file: class count does not match weight rows")
    return W, classes, cfg
