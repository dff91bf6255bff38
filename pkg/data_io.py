"""
Reading and writing problems, embeddings and vectors.

Text formats are headerless CSV (dissimilarities, vectors) or CSV with a
``modality,object,x1..xd`` header (embeddings), written with 17 significant
digits. The binary format is a 24-byte little-endian header

    magic "JOFC" | u32 version | u32 n | u32 m | u32 d | u32 reserved

followed by float64 payload: m*n*n values for a problem (d = 0) or
m*n*d values for an embedding.
"""

import logging
from pathlib import Path
from typing import List, Sequence, Union

import numpy as np
import pandas as pd

from embed_core import Configuration, OmnibusProblem, VALIDATION_TOL
from errors import InputValidationError

# Set up logging
logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

BINARY_MAGIC = b"JOFC"
BINARY_VERSION = 1
BINARY_SUFFIX = ".jofc"
CSV_FORMAT = "%.17g"

HEADER_DTYPE = np.dtype(
    [
        ("magic", "S4"),
        ("version", "<u4"),
        ("n", "<u4"),
        ("m", "<u4"),
        ("d", "<u4"),
        ("reserved", "<u4"),
    ]
)


def _read_matrix(path: Path) -> np.ndarray:
    try:
        matrix = np.loadtxt(path, delimiter=",", ndmin=2)
    except (OSError, ValueError) as e:
        raise InputValidationError(f"{path}: could not parse as a numeric CSV matrix: {e}") from e
    return matrix


def _clean_dissimilarity(matrix: np.ndarray, path: Path) -> np.ndarray:
    if matrix.shape[0] != matrix.shape[1]:
        raise InputValidationError(f"{path}: expected a square matrix, got shape {matrix.shape}")
    if not np.all(np.isfinite(matrix)):
        row, col = np.argwhere(~np.isfinite(matrix))[0]
        raise InputValidationError(f"{path}: non-finite entry at row {row}, col {col}")
    if np.any(matrix < 0):
        row, col = np.argwhere(matrix < 0)[0]
        raise InputValidationError(f"{path}: negative entry {matrix[row, col]} at row {row}, col {col}")

    asymmetry = np.abs(matrix - matrix.T)
    if asymmetry.max() > VALIDATION_TOL:
        row, col = np.unravel_index(np.argmax(asymmetry), asymmetry.shape)
        raise InputValidationError(f"{path}: not symmetric at row {row}, col {col} (difference {asymmetry.max():.3g})")
    if asymmetry.max() > 0:
        logger.warning(f"{path}: symmetrizing small asymmetry ({asymmetry.max():.3g})")
        matrix = 0.5 * (matrix + matrix.T)

    if np.any(np.diag(matrix) != 0):
        logger.warning(f"{path}: nonzero diagonal forced to 0")
        matrix = matrix.copy()
        np.fill_diagonal(matrix, 0.0)
    return matrix


def is_binary_file(path: PathLike) -> bool:
    """True if ``path`` starts with the binary magic bytes."""
    try:
        with open(path, "rb") as handle:
            return handle.read(len(BINARY_MAGIC)) == BINARY_MAGIC
    except OSError:
        return False


def load_dissimilarities(paths: Sequence[PathLike]) -> OmnibusProblem:
    """
    Load one dissimilarity matrix per modality.

    A single binary problem file is also accepted.

    Args:
        paths (Sequence[PathLike]): CSV files in modality order

    Returns:
        OmnibusProblem: The validated problem

    Raises:
        InputValidationError: On parse failure, negative entries, asymmetry
            beyond tolerance or mismatched sizes; the message names the file
    """
    paths = [Path(p) for p in paths]
    if not paths:
        raise InputValidationError("no dissimilarity files given")
    if len(paths) == 1 and is_binary_file(paths[0]):
        return load_problem_binary(paths[0])

    matrices = []
    for path in paths:
        if not path.is_file():
            raise InputValidationError(f"{path}: file not found")
        matrix = _clean_dissimilarity(_read_matrix(path), path)
        if matrices and matrix.shape != matrices[0].shape:
            raise InputValidationError(
                f"{path}: has {matrix.shape[0]} objects, {paths[0]} has {matrices[0].shape[0]}"
            )
        matrices.append(matrix)

    problem = OmnibusProblem.from_matrices(matrices)
    logger.info(f"Loaded {problem.m} modalities of {problem.n} objects")
    return problem


def save_problem(problem: OmnibusProblem, directory: PathLike) -> List[Path]:
    """Write ``modality_<i>.csv`` files (1-based) into ``directory``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for i, delta in enumerate(problem.modalities, start=1):
        path = directory / f"modality_{i}.csv"
        np.savetxt(path, delta, delimiter=",", fmt=CSV_FORMAT)
        paths.append(path)
    return paths


def load_problem(directory: PathLike) -> OmnibusProblem:
    """Read back a directory written by ``save_problem``."""
    directory = Path(directory)
    paths = sorted(directory.glob("modality_*.csv"), key=lambda p: int(p.stem.split("_")[1]))
    if not paths:
        raise InputValidationError(f"{directory}: no modality_<i>.csv files")
    return load_dissimilarities(paths)


def _write_binary(path: Path, n: int, m: int, d: int, payload: np.ndarray) -> None:
    header = np.zeros(1, dtype=HEADER_DTYPE)
    header[0] = (BINARY_MAGIC, BINARY_VERSION, n, m, d, 0)
    with open(path, "wb") as handle:
        handle.write(header.tobytes())
        handle.write(np.ascontiguousarray(payload, dtype="<f8").tobytes())


def _read_binary(path: Path):
    try:
        raw = Path(path).read_bytes()
    except OSError as e:
        raise InputValidationError(f"{path}: cannot read: {e}") from e
    if len(raw) < HEADER_DTYPE.itemsize:
        raise InputValidationError(f"{path}: truncated header")
    header = np.frombuffer(raw[:HEADER_DTYPE.itemsize], dtype=HEADER_DTYPE)[0]
    if header["magic"] != BINARY_MAGIC:
        raise InputValidationError(f"{path}: bad magic bytes {header['magic']!r}")
    if header["version"] != BINARY_VERSION:
        raise InputValidationError(f"{path}: unsupported format version {header['version']}")
    n, m, d = int(header["n"]), int(header["m"]), int(header["d"])
    payload = np.frombuffer(raw[HEADER_DTYPE.itemsize:], dtype="<f8")
    expected = m * n * (d if d else n)
    if payload.size != expected:
        raise InputValidationError(f"{path}: expected {expected} values, found {payload.size}")
    return n, m, d, payload.astype(float)


def save_problem_binary(problem: OmnibusProblem, path: PathLike) -> Path:
    path = Path(path)
    _write_binary(path, problem.n, problem.m, 0, problem.stacked())
    return path


def load_problem_binary(path: PathLike) -> OmnibusProblem:
    n, m, d, payload = _read_binary(Path(path))
    if d != 0:
        raise InputValidationError(f"{path}: holds an embedding (d={d}), not a problem")
    return OmnibusProblem.from_matrices(list(payload.reshape(m, n, n)))


def save_embedding(config_: Configuration, path: PathLike) -> Path:
    """
    Write an embedding as CSV, or binary when ``path`` ends in ``.jofc``.

    CSV rows are ``modality,object,x1..xd`` with 0-based indices.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if path.suffix == BINARY_SUFFIX:
        _write_binary(path, config_.n, config_.m, config_.d, config_.points)
        return path

    m, n, d = config_.points.shape
    frame = pd.DataFrame(config_.stacked(), columns=[f"x{k}" for k in range(1, d + 1)])
    frame.insert(0, "object", np.tile(np.arange(n), m))
    frame.insert(0, "modality", np.repeat(np.arange(m), n))
    frame.to_csv(path, index=False, float_format=CSV_FORMAT)
    return path


def load_embedding(path: PathLike) -> Configuration:
    """Read an embedding written by ``save_embedding``."""
    path = Path(path)
    if not path.is_file():
        raise InputValidationError(f"{path}: file not found")
    if is_binary_file(path):
        n, m, d, payload = _read_binary(path)
        if d == 0:
            raise InputValidationError(f"{path}: holds a problem, not an embedding")
        return Configuration(payload.reshape(m, n, d))

    try:
        frame = pd.read_csv(path, float_precision="round_trip")
    except (OSError, ValueError) as e:
        raise InputValidationError(f"{path}: could not parse embedding CSV: {e}") from e
    coordinates = [c for c in frame.columns if c.startswith("x")]
    if "modality" not in frame.columns or "object" not in frame.columns or not coordinates:
        raise InputValidationError(f"{path}: expected columns modality,object,x1..xd")

    keys = frame[["modality", "object"]]
    if not all(pd.api.types.is_integer_dtype(keys[c]) for c in keys.columns) or (keys.to_numpy() < 0).any():
        raise InputValidationError(f"{path}: modality and object must be nonnegative integers")
    duplicated = frame.duplicated(["modality", "object"])
    if duplicated.any():
        row = frame[duplicated].iloc[0]
        raise InputValidationError(
            f"{path}: duplicate row for modality {int(row['modality'])}, object {int(row['object'])}"
        )

    frame = frame.sort_values(["modality", "object"])
    m = int(frame["modality"].max()) + 1
    n = int(frame["object"].max()) + 1
    # unique pairs inside [0, m) x [0, n): m * n of them means none is missing
    if len(frame) != m * n:
        raise InputValidationError(f"{path}: expected {m * n} rows for {m} modalities of {n} objects, got {len(frame)}")
    return Configuration(frame[coordinates].to_numpy(dtype=float).reshape(m, n, len(coordinates)))


def save_vector(values: np.ndarray, path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savetxt(path, np.atleast_1d(values), delimiter=",", fmt=CSV_FORMAT)
    return path


def load_vector(path: PathLike) -> np.ndarray:
    """Read a one-column (or one-row) CSV vector."""
    path = Path(path)
    if not path.is_file():
        raise InputValidationError(f"{path}: file not found")
    try:
        values = np.loadtxt(path, delimiter=",", ndmin=1)
    except (OSError, ValueError) as e:
        raise InputValidationError(f"{path}: could not parse as a numeric vector: {e}") from e
    return values.ravel()


def load_oos_deltas(paths: Sequence[PathLike]) -> np.ndarray:
    """Stack one dissimilarity vector per modality into an (m, n) array."""
    vectors = [load_vector(p) for p in paths]
    if not vectors:
        raise InputValidationError("no OOS dissimilarity files given")
    lengths = {v.size for v in vectors}
    if len(lengths) != 1:
        raise InputValidationError(f"OOS dissimilarity vectors have differing lengths {sorted(lengths)}")
    return np.vstack(vectors)
