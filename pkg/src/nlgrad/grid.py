"""Periodic grids, grid functions, norms and complementary-value masks.

Nodes sit at ``-L/2 + j*h`` along each axis, so the box is centred on the
origin.  All whole-space operators act on this torus; test data must stay
at least one horizon away from the seam for the torus model to be exact.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Mapping, Union

import numpy as np

__all__ = [
    "GridError",
    "PeriodicGrid",
    "GridFunction",
    "DomainMask",
    "dft_forward",
    "dft_inverse",
    "lp_norm",
    "sup_norm",
    "build_masks",
    "save_grid_function",
    "load_grid_function",
    "save_mask",
    "load_mask",
]


class GridError(ValueError):
    """Inconsistent grid data, shapes or geometry."""


@dataclass(frozen=True)
class PeriodicGrid:
    dim: int
    box_length: float
    points: int

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise GridError(f"dim must be 1 or 2, got {self.dim}")
        if not self.box_length > 0:
            raise GridError("box_length must be positive")
        n = self.points
        if n < 4 or n & (n - 1):
            raise GridError(f"points must be a power of two >= 4, got {n}")

    @property
    def spacing(self) -> float:
        return self.box_length / self.points

    @property
    def cell_volume(self) -> float:
        return self.spacing ** self.dim

    @property
    def shape(self) -> tuple:
        return (self.points,) * self.dim

    @cached_property
    def axis(self) -> np.ndarray:
        x = -0.5 * self.box_length + self.spacing * np.arange(self.points)
        x.flags.writeable = False
        return x

    @cached_property
    def coordinates(self) -> np.ndarray:
        """Node coordinates, shape ``(dim, *shape)``."""
        c = np.stack(np.meshgrid(*([self.axis] * self.dim), indexing="ij"))
        c.flags.writeable = False
        return c

    @cached_property
    def radius(self) -> np.ndarray:
        r = np.sqrt(np.sum(self.coordinates ** 2, axis=0))
        r.flags.writeable = False
        return r

    @cached_property
    def frequencies(self) -> np.ndarray:
        """Frequencies ``k/L`` in FFT order, shape ``(dim, *shape)``."""
        f = np.fft.fftfreq(self.points, d=self.spacing)
        xi = np.stack(np.meshgrid(*([f] * self.dim), indexing="ij"))
        xi.flags.writeable = False
        return xi

    @cached_property
    def derivative_frequencies(self) -> np.ndarray:
        """Frequencies with the Nyquist entry of each component zeroed.

        Odd multipliers use these so real fields map to real fields.
        """
        xi = np.array(self.frequencies)
        nyq = self.points // 2
        for j in range(self.dim):
            idx = [slice(None)] * self.dim
            idx[j] = nyq
            xi[(j, *idx)] = 0.0
        xi.flags.writeable = False
        return xi

    @cached_property
    def frequency_magnitude(self) -> np.ndarray:
        m = np.sqrt(np.sum(self.frequencies ** 2, axis=0))
        m.flags.writeable = False
        return m

    def check_horizon(self, delta: float):
        if not self.box_length > 4 * delta:
            raise GridError(
                f"box length {self.box_length} must exceed 4*delta = {4 * delta} "
                "for the periodic model to be exact"
            )

    def node(self, index) -> np.ndarray:
        index = np.atleast_1d(index)
        return np.array([self.axis[i] for i in index])

    def to_dict(self) -> dict:
        return {"dim": self.dim, "box_length": self.box_length, "points": self.points}


class GridFunction:
    """Immutable samples of a scalar or vector field on a periodic grid.

    ``values`` has shape ``(components, *grid.shape)``.
    """

    __slots__ = ("grid", "values")

    def __init__(self, grid: PeriodicGrid, values):
        values = np.array(values, dtype=float)
        if values.shape == grid.shape:
            values = values[None]
        if values.shape[1:] != grid.shape or values.shape[0] not in (1, grid.dim):
            raise GridError(
                f"values of shape {values.shape} do not fit grid {grid.shape} "
                f"with 1 or {grid.dim} components"
            )
        if not np.all(np.isfinite(values)):
            raise GridError("grid function values must be finite")
        values.flags.writeable = False
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)

    def __setattr__(self, name, value):
        raise AttributeError("GridFunction is immutable")

    @property
    def components(self) -> int:
        return self.values.shape[0]

    @property
    def scalar(self) -> np.ndarray:
        if self.components != 1:
            raise GridError("grid function is vector valued")
        return self.values[0]

    def pointwise_norm(self) -> np.ndarray:
        return np.sqrt(np.sum(self.values ** 2, axis=0))

    def __add__(self, other: "GridFunction") -> "GridFunction":
        return GridFunction(self.grid, self.values + other.values)

    def __sub__(self, other: "GridFunction") -> "GridFunction":
        return GridFunction(self.grid, self.values - other.values)

    def __mul__(self, c) -> "GridFunction":
        return GridFunction(self.grid, self.values * c)

    __rmul__ = __mul__

    def __repr__(self):
        return f"GridFunction(grid={self.grid}, components={self.components})"


def dft_forward(f: GridFunction) -> np.ndarray:
    """Unnormalised DFT over the spatial axes, shape ``(components, *shape)``."""
    axes = tuple(range(1, f.grid.dim + 1))
    return np.fft.fftn(f.values, axes=axes)


def dft_inverse(F: np.ndarray, grid: PeriodicGrid) -> GridFunction:
    F = np.asarray(F)
    if F.shape == grid.shape:
        F = F[None]
    if F.shape[1:] != grid.shape:
        raise GridError(f"spectrum of shape {F.shape} does not match grid {grid.shape}")
    axes = tuple(range(1, grid.dim + 1))
    return GridFunction(grid, np.fft.ifftn(F, axes=axes).real)


def lp_norm(f: GridFunction, p: float, mask=None) -> float:
    """Discrete ``L^p`` norm ``(sum |f|^p h^n)^{1/p}`` over an optional region.

    ``mask`` is a boolean node array (e.g. ``DomainMask.omega``).
    """
    if not p > 1 or not math.isfinite(p):
        raise GridError(f"lp_norm needs a finite exponent p > 1, got {p}")
    a = f.pointwise_norm()
    if mask is not None:
        a = a[np.asarray(mask, dtype=bool)]
    return float(np.sum(a ** p) * f.grid.cell_volume) ** (1.0 / p)


def sup_norm(f: GridFunction, mask=None) -> float:
    a = f.pointwise_norm()
    if mask is not None:
        a = a[np.asarray(mask, dtype=bool)]
    return float(a.max()) if a.size else 0.0


# ---------------------------------------------------------------------------
# complementary-value masks

OmegaSpec = Union[Mapping, np.ndarray]


@dataclass(frozen=True, eq=False)
class DomainMask:
    """Node indicators for ``Omega``, its inner set and its ``delta``-closure.

    ``inner`` holds the free nodes of a complementary-value problem and
    ``collar = outer & ~inner`` the nodes where values are prescribed.
    """

    grid: PeriodicGrid
    omega: np.ndarray
    delta: float
    inner: np.ndarray
    outer: np.ndarray
    spec: dict

    @property
    def collar(self) -> np.ndarray:
        return self.outer & ~self.inner

    @property
    def fixed(self) -> np.ndarray:
        """Nodes whose values are prescribed (everything but ``inner``)."""
        return ~self.inner


def _signed_distance(spec: Mapping, grid: PeriodicGrid) -> np.ndarray:
    """Signed distance to the boundary of ``Omega`` (negative inside)."""
    shape = spec.get("shape")
    x = grid.coordinates
    if shape == "interval":
        if grid.dim != 1:
            raise GridError("interval geometry needs a 1D grid")
        a, b = spec["bounds"]
        if not a < b:
            raise GridError("interval bounds must satisfy a < b")
        return np.maximum(a - x[0], x[0] - b)
    if shape == "rectangle":
        if grid.dim != 2:
            raise GridError("rectangle geometry needs a 2D grid")
        (x0, x1), (y0, y1) = spec["bounds"]
        dx = np.maximum(x0 - x[0], x[0] - x1)
        dy = np.maximum(y0 - x[1], x[1] - y1)
        out = np.hypot(np.maximum(dx, 0), np.maximum(dy, 0))
        inside = (dx < 0) & (dy < 0)
        return np.where(inside, np.maximum(dx, dy), out)
    if shape == "disk":
        if grid.dim != 2:
            raise GridError("disk geometry needs a 2D grid")
        cx, cy = spec.get("center", (0.0, 0.0))
        return np.hypot(x[0] - cx, x[1] - cy) - spec["radius"]
    raise GridError(f"unknown geometry {shape!r}")


def _brute_force_distance(omega: np.ndarray, grid: PeriodicGrid) -> np.ndarray:
    """Signed distance from each node to the nearest node of the other set.

    Plain O(N^{2n}) search; fine for the grid sizes used here.
    """
    pts = grid.coordinates.reshape(grid.dim, -1).T
    flat = omega.ravel()
    ins, outs = pts[flat], pts[~flat]
    if not len(ins) or not len(outs):
        raise GridError("omega must contain nodes both inside and outside")
    d = np.empty(len(pts))
    for sel, other, sign in ((flat, outs, -1.0), (~flat, ins, 1.0)):
        p = pts[sel]
        best = np.full(len(p), np.inf)
        for start in range(0, len(other), 2048):
            chunk = other[start:start + 2048]
            dd = np.sqrt(((p[:, None, :] - chunk[None, :, :]) ** 2).sum(-1)).min(1)
            best = np.minimum(best, dd)
        # half a cell: the boundary lies between neighbouring in/out nodes
        d[sel] = sign * np.maximum(best - 0.5 * grid.spacing, 0.0)
    return d.reshape(grid.shape)


def build_masks(omega_spec: OmegaSpec, grid: PeriodicGrid, delta: float) -> DomainMask:
    """Masks for ``Omega``, ``Omega_{-delta}`` and ``Omega_delta``.

    ``omega_spec`` is either a geometry dict (``interval``, ``rectangle``,
    ``disk``) or a boolean node array; the latter uses a brute-force
    node-to-node distance.
    """
    if not delta > 0:
        raise GridError("delta must be positive")
    tol = 1e-9 * grid.spacing
    if isinstance(omega_spec, Mapping):
        sd = _signed_distance(omega_spec, grid)
        spec = dict(omega_spec)
    else:
        omega_arr = np.asarray(omega_spec, dtype=bool)
        if omega_arr.shape != grid.shape:
            raise GridError("omega mask shape does not match grid")
        sd = _brute_force_distance(omega_arr, grid)
        sd[omega_arr] = np.minimum(sd[omega_arr], -tol * 10)
        spec = {"shape": "nodes"}
    omega = sd < -tol
    inner = sd < -delta - tol
    outer = sd < delta - tol
    if not inner.any():
        raise GridError(f"Omega_(-delta) is empty for delta = {delta}; choose a smaller horizon")
    # Omega_delta plus one more horizon must fit inside the box
    far = np.max(np.abs(grid.coordinates[:, outer]), initial=0.0)
    if far + delta >= 0.5 * grid.box_length:
        raise GridError("Omega_delta reaches within one horizon of the periodic seam; enlarge the box")
    for arr in (omega, inner, outer):
        arr.flags.writeable = False
    return DomainMask(grid, omega, float(delta), inner, outer, spec)


# ---------------------------------------------------------------------------
# binary + JSON sidecar I/O


def _sidecar(grid: PeriodicGrid, **extra) -> dict:
    return {"dim": grid.dim, "N": grid.points, "L": grid.box_length, **extra}


def save_grid_function(path, f: GridFunction) -> tuple:
    """Write ``<path>.bin`` (little-endian float64) and ``<path>.json``."""
    path = Path(path)
    bin_path, meta_path = path.with_suffix(".bin"), path.with_suffix(".json")
    f.values.astype("<f8").tofile(bin_path)
    meta = _sidecar(f.grid, components=f.components, kind="grid_function")
    meta_path.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return bin_path, meta_path


def load_grid_function(path) -> GridFunction:
    path = Path(path)
    meta = json.loads(path.with_suffix(".json").read_text())
    grid = PeriodicGrid(meta["dim"], meta["L"], meta["N"])
    data = np.fromfile(path.with_suffix(".bin"), dtype="<f8")
    expected = meta["components"] * grid.points ** grid.dim
    if data.size != expected:
        raise GridError(f"expected {expected} values, found {data.size}")
    return GridFunction(grid, data.reshape((meta["components"], *grid.shape)))


_MASK_LAYERS = ("omega", "inner", "outer")


def save_mask(path, mask: DomainMask) -> tuple:
    """Write the three mask layers as 0/1 bytes plus a JSON sidecar."""
    path = Path(path)
    bin_path, meta_path = path.with_suffix(".bin"), path.with_suffix(".json")
    stack = np.stack([getattr(mask, k) for k in _MASK_LAYERS]).astype(np.uint8)
    stack.tofile(bin_path)
    meta = _sidecar(mask.grid, components=len(_MASK_LAYERS), kind="domain_mask",
                    layers=list(_MASK_LAYERS), delta=mask.delta, spec=_jsonable(mask.spec))
    meta_path.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return bin_path, meta_path


def load_mask(path) -> DomainMask:
    path = Path(path)
    meta = json.loads(path.with_suffix(".json").read_text())
    grid = PeriodicGrid(meta["dim"], meta["L"], meta["N"])
    raw = np.fromfile(path.with_suffix(".bin"), dtype=np.uint8)
    layers = raw.reshape((len(meta["layers"]), *grid.shape)).astype(bool)
    named = dict(zip(meta["layers"], layers))
    for arr in named.values():
        arr.flags.writeable = False
    return DomainMask(grid, named["omega"], meta["delta"], named["inner"], named["outer"], meta["spec"])


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj
