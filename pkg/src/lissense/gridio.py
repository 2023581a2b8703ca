"""File formats: binary PGM images, CSV grids, JSON sidecars and manifests.

Everything here is written with fixed formatting so a rerun with the same
seed produces byte-identical artifacts.
"""

from __future__ import annotations

import hashlib
import json
import re

import numpy as np

FLOAT_FMT = "%.9g"


def write_pgm(path, image: np.ndarray) -> None:
    """Binary (P5) portable graymap from a uint8 grid."""
    image = np.asarray(image)
    if image.dtype != np.uint8:
        raise ValueError(f"PGM wants uint8 data, got {image.dtype}")
    rows, cols = image.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{cols} {rows}\n255\n".encode("ascii"))
        fh.write(image.tobytes())


def read_pgm(path) -> np.ndarray:
    with open(path, "rb") as fh:
        data = fh.read()
    match = re.match(rb"P5\s+(\d+)\s+(\d+)\s+(\d+)\s", data)
    if not match:
        raise ValueError(f"{path}: not a binary PGM")
    cols, rows, maxval = (int(g) for g in match.groups())
    if maxval != 255:
        raise ValueError(f"{path}: unsupported maxval {maxval}")
    pixels = np.frombuffer(data[match.end():], dtype=np.uint8,
                           count=rows * cols)
    return pixels.reshape(rows, cols).copy()


def write_bits_pgm(path, bits: np.ndarray) -> None:
    """0/1 grid rendered as black/white PGM."""
    write_pgm(path, (np.asarray(bits, dtype=np.uint8) * 255))


def read_bits_pgm(path) -> np.ndarray:
    return (read_pgm(path) >= 128).astype(np.uint8)


def _dim_header(grid: np.ndarray) -> str:
    return f"# rows={grid.shape[0]} cols={grid.shape[1]}\n"


def _parse_dims(line: str) -> tuple[int, int]:
    match = re.match(r"#\s*rows=(\d+)\s+cols=(\d+)", line)
    if not match:
        raise ValueError(f"missing dimension header, got {line!r}")
    return int(match.group(1)), int(match.group(2))


def write_complex_csv(path, grid: np.ndarray) -> None:
    """Row-major complex samples as re,im columns with a dimension header."""
    grid = np.asarray(grid)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(_dim_header(grid))
        fh.write("re,im\n")
        for value in grid.ravel():
            fh.write(f"{FLOAT_FMT % value.real},{FLOAT_FMT % value.imag}\n")


def read_complex_csv(path) -> np.ndarray:
    with open(path, "r", encoding="utf-8") as fh:
        rows, cols = _parse_dims(fh.readline())
        header = fh.readline().strip()
        if header != "re,im":
            raise ValueError(f"{path}: expected re,im header, got {header!r}")
        flat = np.loadtxt(fh, delimiter=",", ndmin=2)
    return (flat[:, 0] + 1j * flat[:, 1]).reshape(rows, cols)


def write_magnitude_csv(path, grid: np.ndarray) -> None:
    grid = np.asarray(grid)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(_dim_header(grid))
        fh.write("value\n")
        for value in grid.ravel():
            fh.write(f"{FLOAT_FMT % value}\n")


def read_magnitude_csv(path) -> np.ndarray:
    with open(path, "r", encoding="utf-8") as fh:
        rows, cols = _parse_dims(fh.readline())
        header = fh.readline().strip()
        if header != "value":
            raise ValueError(f"{path}: expected value header, got {header!r}")
        flat = np.loadtxt(fh, ndmin=1)
    return flat.reshape(rows, cols)


def write_rows_csv(path, header: str, rows) -> None:
    """Generic CSV: `header` line plus preformatted cell tuples."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(
                cell if isinstance(cell, str) else FLOAT_FMT % cell
                for cell in row) + "\n")


def write_json(path, payload: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_json(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def sha256_file(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


def write_manifest(path, command: str, parameters: dict, inputs,
                   outputs, master_seed: int) -> None:
    """Record one CLI invocation: resolved parameters, artifact checksums,
    and the master seed that reproduces the outputs."""
    write_json(path, {
        "command": command,
        "parameters": parameters,
        "inputs": {str(p): sha256_file(p) for p in inputs},
        "outputs": {str(p): sha256_file(p) for p in outputs},
        "master_seed": master_seed,
    })
