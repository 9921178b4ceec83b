"""Instance documents and sequence files.

Instance documents are versioned JSON holding everything needed to
re-evaluate an instance without regenerating it: params, transition
entries and mask (row-major), motifs, offsets, and the verified
optimum. Parsing re-validates every type invariant and names the
violated one on failure.

Sequence files are plain text: one sequence per line, comma-separated
integers, with an optional trailing ",score" column.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import InvalidParamsError, ParseError
from .function import (
    EhrlichFunction,
    EhrlichParams,
    SpacedMotifs,
    TransitionMatrix,
    check_ergodic,
)

FORMAT_VERSION = 1

_PARAM_KEYS = {
    "v": "vocab_size",
    "L": "length",
    "c": "num_motifs",
    "k": "motif_length",
    "q": "quantization",
    "a": "epistasis_factor",
    "tau": "softmax_temperature",
    "feasible_fraction": "feasible_fraction",
    "seed": "seed",
}


def serialize_instance(function: EhrlichFunction) -> str:
    """Render an instance as a JSON document (round-trips exactly)."""
    params = function.params
    doc = {
        "version": FORMAT_VERSION,
        "name": function.name,
        "params": {
            "v": params.vocab_size,
            "L": params.length,
            "c": params.num_motifs,
            "k": params.motif_length,
            "q": params.quantization,
            "a": params.epistasis_factor,
            "tau": params.softmax_temperature,
            "feasible_fraction": params.feasible_fraction,
            "seed": params.seed,
        },
        "transition": function.transition.entries.tolist(),
        "mask": function.transition.mask.tolist(),
        "motifs": function.motifs.motifs.tolist(),
        "offsets": function.motifs.offsets.tolist(),
        "optimum": function.optimum.tolist(),
    }
    return json.dumps(doc, indent=2) + "\n"


def parse_instance(document: str) -> EhrlichFunction:
    """Parse and fully validate an instance document."""
    try:
        doc = json.loads(document)
    except json.JSONDecodeError as exc:
        raise ParseError(f"instance document is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ParseError("instance document must be a JSON object")

    version = doc.get("version")
    if version != FORMAT_VERSION:
        raise ParseError(
            f"unsupported instance document version {version!r}, expected {FORMAT_VERSION}"
        )
    for key in ("params", "transition", "mask", "motifs", "offsets", "optimum"):
        if key not in doc:
            raise ParseError(f"instance document missing field {key!r}")

    raw = doc["params"]
    missing = sorted(set(_PARAM_KEYS) - set(raw))
    if missing:
        raise ParseError(f"instance params missing keys: {', '.join(missing)}")
    params = EhrlichParams(**{full: raw[short] for short, full in _PARAM_KEYS.items()})

    name = doc.get("name")
    if name is not None and name != params.name:
        raise ParseError(
            f"instance name {name!r} does not match params-derived name {params.name!r}"
        )

    transition = TransitionMatrix(
        entries=np.asarray(doc["transition"], dtype=np.float64),
        mask=np.asarray(doc["mask"], dtype=bool),
    )
    if transition.vocab_size != params.vocab_size:
        raise InvalidParamsError(
            f"transition matrix is {transition.vocab_size}x{transition.vocab_size} "
            f"but vocab_size is {params.vocab_size}"
        )
    if not check_ergodic(transition):
        raise InvalidParamsError("transition matrix is not ergodic")
    motifs = SpacedMotifs(
        motifs=np.asarray(doc["motifs"], dtype=np.int64),
        offsets=np.asarray(doc["offsets"], dtype=np.int64),
    )
    return EhrlichFunction(
        params=params,
        transition=transition,
        motifs=motifs,
        optimum=np.asarray(doc["optimum"], dtype=np.int64),
    )


def write_instance(function: EhrlichFunction, path: str | Path) -> None:
    Path(path).write_text(serialize_instance(function))


def read_instance(path: str | Path) -> EhrlichFunction:
    return parse_instance(Path(path).read_text())


def parse_sequences(
    text: str, length: int, vocab_size: int | None = None
) -> tuple[np.ndarray, np.ndarray | None]:
    """Parse a sequence file into (tokens, scores-or-None).

    Each line must have ``length`` integer fields, or ``length + 1``
    fields where the last is a score. Errors name the offending line
    and column (1-based).
    """
    rows: list[list[int]] = []
    scores: list[float] = []
    have_scores: bool | None = None
    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        fields = line.split(",")
        if len(fields) == length:
            with_score = False
        elif len(fields) == length + 1:
            with_score = True
        else:
            raise ParseError(
                f"line {line_no}: expected {length} tokens (plus optional score), "
                f"got {len(fields)} fields"
            )
        if have_scores is None:
            have_scores = with_score
        elif have_scores != with_score:
            raise ParseError(
                f"line {line_no}: inconsistent column count (score column must be "
                "present on every line or on none)"
            )
        row = []
        for col, fieldtext in enumerate(fields[:length], start=1):
            try:
                token = int(fieldtext.strip())
            except ValueError:
                raise ParseError(
                    f"line {line_no}, column {col}: malformed token {fieldtext.strip()!r}"
                ) from None
            if token < 0 or (vocab_size is not None and token >= vocab_size):
                raise ParseError(
                    f"line {line_no}, column {col}: token {token} out of range "
                    f"[0, {vocab_size})"
                )
            row.append(token)
        if with_score:
            col = length + 1
            try:
                scores.append(float(fields[length].strip()))
            except ValueError:
                raise ParseError(
                    f"line {line_no}, column {col}: malformed score "
                    f"{fields[length].strip()!r}"
                ) from None
        rows.append(row)
    tokens = np.asarray(rows, dtype=np.int64).reshape(len(rows), length)
    return tokens, (np.asarray(scores, dtype=np.float64) if have_scores else None)


def format_sequences(tokens: np.ndarray, scores: np.ndarray | None = None) -> str:
    """Render sequences (and optional scores) in the line format."""
    tokens = np.asarray(tokens, dtype=np.int64)
    lines = []
    for i, row in enumerate(tokens):
        line = ",".join(str(t) for t in row)
        if scores is not None:
            line += f",{float(scores[i])!r}"
        lines.append(line)
    return "\n".join(lines) + ("\n" if lines else "")
