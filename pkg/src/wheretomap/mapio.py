"""Readers and writers for map priors, ground truth and sigma grids.

Formats
-------
prior CSV   ``row,col,mu,sigma,obstacle`` with one line per cell
truth CSV   ``row,col,lambda_true``
raster      8-bit grayscale image plus a lookup CSV ``gray,mu,sigma,obstacle``;
            the top image row is the northernmost (largest y) map row
sigma grid  headerless ``height x width`` matrix, first line is map row 0
"""

from __future__ import annotations

import os
from typing import Tuple

import numpy as np

from .localizability_map import GridGeometry, MapBelief, MapLoadError, init_from_satellite

PRIOR_HEADER = "row,col,mu,sigma,obstacle"
TRUTH_HEADER = "row,col,lambda_true"
LOOKUP_HEADER = "gray,mu,sigma,obstacle"


def _read_header(path) -> str:
    with open(path, "r", encoding="utf-8") as fh:
        return fh.readline().strip()


def _load_rows(path, header: str, ncols: int) -> np.ndarray:
    if not os.path.exists(path):
        raise FileNotFoundError(f"map file not found: {path}")
    found = _read_header(path)
    if found != header:
        raise MapLoadError(f"{path}: expected header {header!r}, found {found!r}")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.size and data.shape[1] != ncols:
        raise MapLoadError(f"{path}: expected {ncols} columns, found {data.shape[1]}")
    return data


def _scatter(data: np.ndarray, geometry: GridGeometry, path) -> Tuple[np.ndarray, np.ndarray]:
    """Flat cell index per line, verifying every cell appears exactly once."""
    rows = data[:, 0].astype(np.int64)
    cols = data[:, 1].astype(np.int64)
    bad = np.flatnonzero((rows < 0) | (rows >= geometry.height) | (cols < 0) | (cols >= geometry.width))
    if bad.size:
        raise MapLoadError(f"{path}: line {bad[0] + 2} addresses cell ({rows[bad[0]]}, {cols[bad[0]]}) outside the grid")
    flat = rows * geometry.width + cols
    counts = np.bincount(flat, minlength=geometry.size)
    if counts.max(initial=0) > 1:
        raise MapLoadError(f"{path}: duplicate entry", int(np.argmax(counts > 1)))
    if data.shape[0] != geometry.size:
        raise MapLoadError(f"{path}: missing entry", int(np.argmax(counts == 0)))
    return flat, data


def read_prior_csv(path, geometry: GridGeometry) -> MapBelief:
    data = _load_rows(path, PRIOR_HEADER, 5)
    flat, data = _scatter(data, geometry, path)
    mu = np.empty(geometry.size)
    sigma = np.empty(geometry.size)
    obstacle = np.empty(geometry.size, dtype=bool)
    mu[flat], sigma[flat], obstacle[flat] = data[:, 2], data[:, 3], data[:, 4] != 0
    shape = (geometry.height, geometry.width)
    return init_from_satellite(mu.reshape(shape), sigma.reshape(shape), geometry, obstacle.reshape(shape))


def read_truth_csv(path, geometry: GridGeometry) -> np.ndarray:
    data = _load_rows(path, TRUTH_HEADER, 3)
    flat, data = _scatter(data, geometry, path)
    truth = np.empty(geometry.size)
    truth[flat] = data[:, 2]
    return truth.reshape(geometry.height, geometry.width)


def read_raster_prior(image_path, lookup_path, geometry: GridGeometry) -> MapBelief:
    from PIL import Image

    with Image.open(image_path) as img:
        gray = np.flipud(np.asarray(img.convert("L"), dtype=np.int64))
    if gray.shape != (geometry.height, geometry.width):
        raise MapLoadError(f"{image_path}: raster is {gray.shape}, geometry is {(geometry.height, geometry.width)}")
    table = _load_rows(lookup_path, LOOKUP_HEADER, 4)
    mu_t = np.full(256, np.nan)
    sigma_t = np.full(256, np.nan)
    obst_t = np.zeros(256, dtype=bool)
    levels = table[:, 0].astype(np.int64)
    mu_t[levels], sigma_t[levels], obst_t[levels] = table[:, 1], table[:, 2], table[:, 3] != 0
    missing = np.flatnonzero(np.isnan(mu_t[gray]).ravel())
    if missing.size:
        cell = int(missing[0])
        raise MapLoadError(f"{lookup_path}: no entry for gray level {gray.flat[cell]}", cell)
    return init_from_satellite(mu_t[gray], sigma_t[gray], geometry, obst_t[gray])


def _row_col_columns(geometry: GridGeometry):
    rows, cols = np.divmod(np.arange(geometry.size), geometry.width)
    return rows.tolist(), cols.tolist()


def write_prior_csv(path, belief: MapBelief) -> None:
    rows, cols = _row_col_columns(belief.geometry)
    mu = belief.mu.reshape(-1).tolist()
    sigma = belief.sigma.reshape(-1).tolist()
    obst = belief.obstacle.reshape(-1).astype(int).tolist()
    lines = [f"{r},{c},{m!r},{s!r},{o}" for r, c, m, s, o in zip(rows, cols, mu, sigma, obst)]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(PRIOR_HEADER + "\n")
        fh.write("\n".join(lines))
        fh.write("\n")


def write_truth_csv(path, truth: np.ndarray, geometry: GridGeometry) -> None:
    rows, cols = _row_col_columns(geometry)
    values = np.asarray(truth, dtype=float).reshape(-1).tolist()
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(TRUTH_HEADER + "\n")
        fh.write("\n".join(f"{r},{c},{v!r}" for r, c, v in zip(rows, cols, values)))
        fh.write("\n")


def write_grid_csv(path, grid: np.ndarray) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for row in np.asarray(grid, dtype=float).tolist():
            fh.write(",".join(repr(v) for v in row))
            fh.write("\n")


def read_grid_csv(path) -> np.ndarray:
    return np.loadtxt(path, delimiter=",", ndmin=2)
