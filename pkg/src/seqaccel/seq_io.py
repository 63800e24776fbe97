"""Sequence ingestion: alphabets, FASTA and label-table parsing, synthetic data.

Residues are uppercased on parse and validated against an Alphabet. Labels
arrive as a two-column tab-separated table keyed by record id; joining the
two produces a Dataset whose class list is sorted lexicographically.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import (
    DuplicateIdError,
    EmptyInputError,
    FormatError,
    HeaderWithoutSequenceError,
    IllegalResidueError,
    InvalidParameterError,
    NoLabeledRecordsError,
    UnknownLabelError,
)

logger = logging.getLogger(__name__)

_UNMAPPED = 255


@dataclass(frozen=True)
class Alphabet:
    """Ordered residue alphabet; symbol position defines its ordinal."""

    symbols: str

    def __post_init__(self):
        if len(self.symbols) < 2:
            raise InvalidParameterError(
                f"alphabet needs at least 2 symbols, got {len(self.symbols)}"
            )
        if len(set(self.symbols)) != len(self.symbols):
            raise InvalidParameterError("alphabet symbols must be unique")
        for ch in self.symbols:
            if ch.isspace() or not ch.isprintable():
                raise InvalidParameterError(f"unusable alphabet symbol {ch!r}")
            if ord(ch) > 127:
                raise InvalidParameterError("alphabet symbols must be ASCII")

    def __len__(self) -> int:
        return len(self.symbols)

    def __contains__(self, ch: str) -> bool:
        return ch in self.index

    @cached_property
    def index(self) -> dict[str, int]:
        return {ch: i for i, ch in enumerate(self.symbols)}

    @cached_property
    def _table(self) -> np.ndarray:
        table = np.full(256, _UNMAPPED, dtype=np.uint8)
        for i, ch in enumerate(self.symbols):
            table[ord(ch)] = i
        return table

    @cached_property
    def _symbol_bytes(self) -> np.ndarray:
        return np.frombuffer(self.symbols.encode("ascii"), dtype=np.uint8)

    def encode(self, residues: str) -> np.ndarray:
        """Map a residue string to its ordinal codes (uint8 array)."""
        try:
            raw = residues.encode("ascii")
        except UnicodeEncodeError as exc:
            raise IllegalResidueError(
                f"illegal residue {residues[exc.start]!r} at position {exc.start + 1}"
            ) from None
        codes = self._table[np.frombuffer(raw, dtype=np.uint8)]
        bad = np.nonzero(codes == _UNMAPPED)[0]
        if bad.size:
            pos = int(bad[0])
            raise IllegalResidueError(
                f"illegal residue {residues[pos]!r} at position {pos + 1}"
            )
        return codes

    def decode(self, codes: np.ndarray) -> str:
        return self._symbol_bytes[np.asarray(codes, dtype=np.uint8)].tobytes().decode("ascii")


AMINO_ALPHABET = Alphabet("ACDEFGHIKLMNPQRSTVWYXBZJ*")
NUCLEOTIDE_ALPHABET = Alphabet("ACGTN")

ALPHABET_PRESETS: dict[str, Alphabet] = {
    "amino": AMINO_ALPHABET,
    "nucleotide": NUCLEOTIDE_ALPHABET,
}


def resolve_alphabet(spec: str) -> Alphabet:
    """Return a preset alphabet by name, or build one from literal symbols."""
    preset = ALPHABET_PRESETS.get(spec.lower())
    if preset is not None:
        return preset
    return Alphabet(spec)


@dataclass(frozen=True)
class LabeledSequence:
    """One sequence record with its class label."""

    id: str
    residues: str
    label: str

    def __post_init__(self):
        if not self.id:
            raise InvalidParameterError("sequence id must be non-empty")
        if not self.residues:
            raise InvalidParameterError(f"sequence '{self.id}' has no residues")
        if not self.label:
            raise InvalidParameterError(f"sequence '{self.id}' has an empty label")


@dataclass
class Dataset:
    """Labeled sequences plus the sorted list of distinct classes (C >= 2)."""

    sequences: list[LabeledSequence]
    classes: list[str]

    def __post_init__(self):
        if sorted(set(self.classes)) != list(self.classes):
            raise InvalidParameterError("classes must be sorted and distinct")
        if len(self.classes) < 2:
            raise InvalidParameterError(
                f"dataset needs at least 2 classes, got {len(self.classes)}"
            )
        members = set(self.classes)
        for seq in self.sequences:
            if seq.label not in members:
                raise UnknownLabelError(
                    f"sequence '{seq.id}' has label '{seq.label}' outside the class list"
                )

    @classmethod
    def from_sequences(cls, sequences: list[LabeledSequence]) -> "Dataset":
        return cls(list(sequences), sorted({s.label for s in sequences}))

    def __len__(self) -> int:
        return len(self.sequences)


def parse_fasta(text: str, alphabet: Alphabet) -> list[tuple[str, str]]:
    """Parse FASTA text into (id, residues) tuples in file order.

    Wrapped sequence lines are concatenated, residues are uppercased, and
    every residue must belong to the alphabet. The id is the header token
    up to the first whitespace.
    """
    records: list[tuple[str, str]] = []
    current_id: str | None = None
    parts: list[str] = []

    def flush():
        if current_id is None:
            return
        if not parts:
            raise HeaderWithoutSequenceError(
                f"record '{current_id}' has no sequence lines"
            )
        residues = "".join(parts).upper()
        try:
            alphabet.encode(residues)
        except IllegalResidueError as exc:
            raise IllegalResidueError(f"record '{current_id}': {exc}") from None
        records.append((current_id, residues))

    for raw in text.splitlines():
        line = raw.strip()
        if not line:
            continue
        if line.startswith(">"):
            flush()
            header = line[1:].strip()
            if not header:
                raise FormatError("FASTA header with no id")
            current_id = header.split()[0]
            parts = []
        else:
            if current_id is None:
                raise FormatError("sequence data before the first FASTA header")
            parts.append(line)
    flush()

    if not records:
        raise EmptyInputError("no FASTA records found")
    return records


def parse_labels(text: str) -> dict[str, str]:
    """Parse a two-column tab-separated id-to-label table."""
    labels: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        if not raw.strip():
            continue
        parts = raw.split("\t")
        if len(parts) != 2:
            raise FormatError(
                f"label table line {lineno}: expected two tab-separated columns"
            )
        rid, label = parts[0].strip(), parts[1].strip()
        if not rid or not label:
            raise FormatError(f"label table line {lineno}: empty id or label")
        if rid in labels:
            raise DuplicateIdError(f"duplicate id '{rid}' in label table")
        labels[rid] = label
    if not labels:
        raise EmptyInputError("label table is empty")
    return labels


def attach_labels(records: list[tuple[str, str]], labels: dict[str, str]) -> Dataset:
    """Join parsed records with a label table into a Dataset.

    Records without a label are dropped with a counted warning; matching
    zero records is an error. Record order is preserved.
    """
    matched = [
        LabeledSequence(rid, residues, labels[rid])
        for rid, residues in records
        if rid in labels
    ]
    dropped = len(records) - len(matched)
    if dropped:
        logger.warning("dropped %d record(s) without a label", dropped)
    if not matched:
        raise NoLabeledRecordsError("no record id matched the label table")
    return Dataset.from_sequences(matched)


def synth_dataset(
    num_classes: int,
    per_class: int,
    length: int,
    motif_len: int,
    noise: float,
    seed: int,
    alphabet: Alphabet = NUCLEOTIDE_ALPHABET,
) -> Dataset:
    """Generate a labeled dataset with one planted motif per class.

    Each class gets a distinct random motif of motif_len placed at a random
    position inside otherwise uniform-random residues; afterwards every
    residue is independently replaced with probability noise. Fully
    deterministic in seed: motifs are drawn first (class order), then per
    sequence the base residues, motif position, mutation mask and
    replacement residues, in that order.
    """
    if num_classes < 2:
        raise InvalidParameterError(f"num_classes must be >= 2, got {num_classes}")
    if per_class < 1:
        raise InvalidParameterError(f"per_class must be >= 1, got {per_class}")
    if length < 1:
        raise InvalidParameterError(f"length must be >= 1, got {length}")
    if not 1 <= motif_len <= length:
        raise InvalidParameterError(
            f"motif_len must be in [1, length], got {motif_len} with length {length}"
        )
    if not 0.0 <= noise < 1.0:
        raise InvalidParameterError(f"noise must be in [0, 1), got {noise}")
    nsym = len(alphabet)
    if nsym ** motif_len < num_classes:
        raise InvalidParameterError(
            f"cannot draw {num_classes} distinct motifs of length {motif_len} "
            f"over {nsym} symbols"
        )

    rng = np.random.default_rng(seed)
    motifs: list[np.ndarray] = []
    seen: set[bytes] = set()
    while len(motifs) < num_classes:
        cand = rng.integers(0, nsym, size=motif_len).astype(np.uint8)
        key = cand.tobytes()
        if key in seen:
            continue
        seen.add(key)
        motifs.append(cand)

    cwidth = len(str(num_classes - 1))
    swidth = len(str(per_class - 1))
    sequences: list[LabeledSequence] = []
    for ci in range(num_classes):
        label = f"class{ci:0{cwidth}d}"
        for si in range(per_class):
            codes = rng.integers(0, nsym, size=length).astype(np.uint8)
            pos = int(rng.integers(0, length - motif_len + 1))
            codes[pos : pos + motif_len] = motifs[ci]
            mask = rng.random(length) < noise
            replacement = rng.integers(0, nsym, size=length).astype(np.uint8)
            codes = np.where(mask, replacement, codes)
            sequences.append(
                LabeledSequence(f"{label}_{si:0{swidth}d}", alphabet.decode(codes), label)
            )
    return Dataset.from_sequences(sequences)


def one_hot(label: str, classes: list[str]) -> np.ndarray:
    """Encode a label as a one-hot row over the sorted class list."""
    try:
        idx = classes.index(label)
    except ValueError:
        raise UnknownLabelError(f"label '{label}' not in classes {classes}") from None
    vec = np.zeros(len(classes), dtype=np.float64)
    vec[idx] = 1.0
    return vec


def one_hot_matrix(labels: list[str], classes: list[str]) -> np.ndarray:
    """Stack one_hot rows for a list of labels."""
    return np.vstack([one_hot(label, classes) for label in labels])


def dataset_to_fasta(ds: Dataset) -> str:
    return "".join(f">{s.id}\n{s.residues}\n" for s in ds.sequences)


def dataset_to_labels_tsv(ds: Dataset) -> str:
    return "".join(f"{s.id}\t{s.label}\n" for s in ds.sequences)
