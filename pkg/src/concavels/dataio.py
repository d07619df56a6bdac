"""File formats: CSV / binary matrix ingestion, instance directories,
solution and report serialization.

The binary matrix format is: magic b"CSPD", u32 n, u32 p, then n*p
float64 entries in column-major order, all little-endian.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .design import DesignMatrix, normalize_columns
from .errors import DegenerateDesignError
from .simulate import Instance

MAGIC = b"CSPD"


def write_matrix_bin(path, X):
    X = np.asarray(X, dtype="<f8")
    n, p = X.shape
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", n, p))
        fh.write(np.asfortranarray(X).tobytes(order="F"))


def read_matrix_bin(path) -> np.ndarray:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != MAGIC:
            raise DegenerateDesignError(f"{path}: bad magic {magic!r}")
        n, p = struct.unpack("<II", fh.read(8))
        data = np.frombuffer(fh.read(8 * n * p), dtype="<f8")
        if data.size != n * p:
            raise DegenerateDesignError(f"{path}: truncated payload")
    return data.reshape((n, p), order="F").copy()


def read_matrix_csv(path) -> np.ndarray:
    """Rows are samples; a non-numeric first line is treated as a header."""
    path = Path(path)
    with open(path) as fh:
        first = fh.readline()
    skip = 0
    try:
        [float(tok) for tok in first.replace(",", " ").split()]
    except ValueError:
        skip = 1
    try:
        X = np.loadtxt(path, delimiter=",", skiprows=skip, ndmin=2)
    except ValueError as e:
        raise DegenerateDesignError(f"{path}: {e}") from e
    return X


def read_matrix(path) -> np.ndarray:
    path = Path(path)
    if path.suffix == ".bin":
        return read_matrix_bin(path)
    return read_matrix_csv(path)


def write_vector_csv(path, v):
    np.savetxt(path, np.asarray(v, dtype=float).reshape(-1, 1), delimiter=",", fmt="%.17g")


def save_instance(inst: Instance, out_dir, binary=False):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if binary:
        write_matrix_bin(out / "X.bin", inst.X.X)
    else:
        np.savetxt(out / "X.csv", inst.X.X, delimiter=",", fmt="%.17g")
    write_vector_csv(out / "y.csv", inst.y)
    write_vector_csv(out / "beta.csv", inst.beta)
    write_vector_csv(out / "eps.csv", inst.eps)
    meta = dict(inst.meta)
    meta["S"] = list(inst.S)
    meta["sigma"] = inst.sigma
    with open(out / "meta.json", "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
    return out


def load_instance(in_dir) -> Instance:
    src = Path(in_dir)
    if (src / "X.bin").exists():
        X = read_matrix_bin(src / "X.bin")
    else:
        X = read_matrix_csv(src / "X.csv")
    y = np.loadtxt(src / "y.csv", delimiter=",")
    beta = np.loadtxt(src / "beta.csv", delimiter=",")
    eps_path = src / "eps.csv"
    eps = np.loadtxt(eps_path, delimiter=",") if eps_path.exists() else y - X @ beta
    with open(src / "meta.json") as fh:
        meta = json.load(fh)
    dm = DesignMatrix(X, normalized=True)
    if not dm.check_normalized():
        dm = normalize_columns(X)
    return Instance(X=dm, y=np.atleast_1d(y), beta=np.atleast_1d(beta),
                    S=tuple(meta.get("S", np.flatnonzero(beta).tolist())),
                    sigma=float(meta.get("sigma", 0.0)),
                    eps=np.atleast_1d(eps), seed=int(meta.get("seed", 0)), meta=meta)


def save_json(path, payload):
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)


def fmt_float(x) -> str:
    """Fixed float formatting so identical runs produce identical bytes."""
    if x is None:
        return ""
    if isinstance(x, str):
        return x
    return format(float(x), ".17g")


def write_rows_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(fmt_float(v) if isinstance(v, (int, float)) or v is None
                              else str(v) for v in row) + "\n")
