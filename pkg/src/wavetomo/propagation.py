"""Geometric propagation of layered phase (and DM shapes) into the pupil.

All positions are meters in a zenith-centered frame.  A square grid with n
points and spacing d is centered on the axis, so index (row, col) maps to
``x = (col - (n-1)/2) d`` and ``y = (row - (n-1)/2) d``; arrays are indexed
``values[row, col]`` with col along x.

Natural guide star paths sample a layer at ``r + theta * h``; laser guide
star paths compress the pupil coordinate by the cone factor ``1 - h/H``.
Both use bilinear interpolation on the layer grid, and the adjoints are the
exact transposes of the interpolation stencils, which the matrix-free solver
relies on.  Points falling outside a layer extent raise GeometryError (grids
are sized at construction; there is no silent extrapolation).
"""

from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np
from scipy import sparse

from .errors import ConfigurationError, GeometryError

_EDGE_TOL = 1e-9  # index units; absorbs roundoff at the last grid node


@dataclass(frozen=True)
class GuideStar:
    """Reference source: natural (at infinity) or laser (finite altitude)."""

    kind: Literal["NGS", "LGS"]
    direction: tuple[float, float]  # radians off zenith
    lgs_altitude_m: float | None = None
    flux_photons: float = 100.0

    def __post_init__(self):
        if self.kind not in ("NGS", "LGS"):
            raise ConfigurationError(f"unknown guide star kind {self.kind!r}")
        if self.kind == "LGS" and (self.lgs_altitude_m is None or self.lgs_altitude_m <= 0):
            raise ConfigurationError("LGS requires a positive scatter altitude")
        if self.flux_photons <= 0:
            raise ConfigurationError("guide star flux must be positive")


@dataclass(frozen=True)
class ApertureGrid:
    """Regular pupil-plane sampling with an annular mask."""

    n_points: int
    spacing_m: float
    pupil_diameter_m: float
    obstruction: float = 0.0
    mask: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.spacing_m <= 0 or self.pupil_diameter_m <= 0:
            raise ConfigurationError("aperture dimensions must be positive")
        if not 0.0 <= self.obstruction < 1.0:
            raise ConfigurationError("obstruction fraction must be in [0, 1)")
        if self.mask is None:
            x = (np.arange(self.n_points) - 0.5 * (self.n_points - 1)) * self.spacing_m
            xx, yy = np.meshgrid(x, x, indexing="xy")
            r = np.hypot(xx, yy)
            inner = 0.5 * self.obstruction * self.pupil_diameter_m
            m = (r <= 0.5 * self.pupil_diameter_m + 1e-9) & (r >= inner - 1e-9)
            object.__setattr__(self, "mask", m)
        if not np.any(self.mask):
            raise ConfigurationError("aperture mask is empty")

    def coords(self) -> np.ndarray:
        """Coordinates of all grid points, shape (n, n, 2)."""
        x = (np.arange(self.n_points) - 0.5 * (self.n_points - 1)) * self.spacing_m
        xx, yy = np.meshgrid(x, x, indexing="xy")
        return np.stack([xx, yy], axis=-1)

    def points(self) -> np.ndarray:
        """Masked point coordinates, shape (M, 2)."""
        return self.coords()[self.mask]


def grid_points(coords: np.ndarray, mask: np.ndarray) -> np.ndarray:
    return coords[mask]


def bilinear_stencil(points: np.ndarray, spacing: float, n: int, name: str = "grid"):
    """Gather indices/weights of bilinear interpolation at `points`.

    Returns (idx, w), each (4, M); idx are flat indices into the n*n grid.
    Raises GeometryError if any point leaves the grid extent.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    u = pts / spacing + 0.5 * (n - 1)
    if np.any(u < -_EDGE_TOL) or np.any(u > n - 1 + _EDGE_TOL):
        worst = float(np.max(np.abs(u - 0.5 * (n - 1))) - 0.5 * (n - 1))
        raise GeometryError(
            f"footprint exceeds extent of {name}: overshoot {worst:.3g} cells")
    u = np.clip(u, 0.0, n - 1)
    i0 = np.minimum(np.floor(u).astype(int), n - 2)
    f = u - i0
    fx, fy = f[:, 0], f[:, 1]
    ix, iy = i0[:, 0], i0[:, 1]
    base = iy * n + ix
    idx = np.stack([base, base + 1, base + n, base + n + 1])
    w = np.stack([(1 - fx) * (1 - fy), fx * (1 - fy), (1 - fx) * fy, fx * fy])
    return idx, w


def stencil_matrix(points: np.ndarray, spacing: float, n: int,
                   name: str = "grid") -> sparse.csr_matrix:
    """Bilinear interpolation as a sparse (M, n*n) matrix; adjoint is `.T`."""
    idx, w = bilinear_stencil(points, spacing, n, name)
    m = idx.shape[1]
    rows = np.tile(np.arange(m), 4)
    return sparse.csr_matrix((w.ravel(), (rows, idx.ravel())), shape=(m, n * n))


def gather(values: np.ndarray, idx: np.ndarray, w: np.ndarray) -> np.ndarray:
    flat = values.ravel()
    return (flat[idx] * w).sum(axis=0)


def scatter_adjoint(contrib: np.ndarray, idx: np.ndarray, w: np.ndarray, n: int) -> np.ndarray:
    out = np.zeros(n * n)
    for k in range(4):
        np.add.at(out, idx[k], w[k] * contrib)
    return out.reshape(n, n)


def layer_points(pupil_points: np.ndarray, theta, altitude_m: float,
                 cone_altitude_m: float | None = None) -> np.ndarray:
    """Map pupil points to layer-plane points for one viewing direction."""
    th = np.asarray(theta, dtype=float)
    if cone_altitude_m is None:
        scale = 1.0
    else:
        if altitude_m >= cone_altitude_m:
            raise ConfigurationError(
                f"layer at {altitude_m} m is not below the LGS altitude {cone_altitude_m} m")
        scale = 1.0 - altitude_m / cone_altitude_m
    return scale * pupil_points + th[None, :] * altitude_m


def _layer_fields(layers):
    """Normalize `layers` to a list of (values, spacing, altitude, label)."""
    out = []
    for i, layer in enumerate(layers):
        spec, screen = layer
        out.append((screen.values, screen.spacing_m, spec.altitude_m, f"layer[{i}]"))
    return out


def project_ngs(layers: Sequence, theta, pupil_points: np.ndarray) -> np.ndarray:
    """Sum of all layers sampled along a natural-star path; (M,) wavefront."""
    wf = np.zeros(len(pupil_points))
    for values, spacing, alt, label in _layer_fields(layers):
        pts = layer_points(pupil_points, theta, alt)
        idx, w = bilinear_stencil(pts, spacing, values.shape[0], label)
        wf += gather(values, idx, w)
    return wf


def project_lgs(layers: Sequence, theta, cone_altitude_m: float,
                pupil_points: np.ndarray) -> np.ndarray:
    """Cone-compressed projection for a laser-star path; (M,) wavefront."""
    wf = np.zeros(len(pupil_points))
    for values, spacing, alt, label in _layer_fields(layers):
        pts = layer_points(pupil_points, theta, alt, cone_altitude_m)
        idx, w = bilinear_stencil(pts, spacing, values.shape[0], label)
        wf += gather(values, idx, w)
    return wf


def project_ngs_adjoint(wavefront: np.ndarray, layers: Sequence, theta,
                        pupil_points: np.ndarray) -> list[np.ndarray]:
    """Exact transpose of `project_ngs`; returns per-layer increments."""
    out = []
    for values, spacing, alt, label in _layer_fields(layers):
        n = values.shape[0]
        pts = layer_points(pupil_points, theta, alt)
        idx, w = bilinear_stencil(pts, spacing, n, label)
        out.append(scatter_adjoint(wavefront, idx, w, n))
    return out


def project_lgs_adjoint(wavefront: np.ndarray, layers: Sequence, theta,
                        cone_altitude_m: float, pupil_points: np.ndarray) -> list[np.ndarray]:
    """Exact transpose of `project_lgs`."""
    out = []
    for values, spacing, alt, label in _layer_fields(layers):
        n = values.shape[0]
        pts = layer_points(pupil_points, theta, alt, cone_altitude_m)
        idx, w = bilinear_stencil(pts, spacing, n, label)
        out.append(scatter_adjoint(wavefront, idx, w, n))
    return out


@dataclass(frozen=True)
class DmModel:
    """Deformable mirror: bilinear surface on a square actuator grid."""

    altitude_m: float
    pitch_m: float
    n_act: int

    def __post_init__(self):
        if self.pitch_m <= 0 or self.n_act < 2:
            raise ConfigurationError("DM needs a positive pitch and >= 2 actuators per side")
        if self.altitude_m < 0:
            raise ConfigurationError("DM altitude must be nonnegative")

    @property
    def n_dof(self) -> int:
        return self.n_act * self.n_act


def split_commands(commands: np.ndarray, dms: Sequence[DmModel]) -> list[np.ndarray]:
    total = sum(dm.n_dof for dm in dms)
    if commands.size != total:
        raise ConfigurationError(f"command vector length {commands.size} != {total}")
    out, ofs = [], 0
    for dm in dms:
        out.append(commands[ofs:ofs + dm.n_dof].reshape(dm.n_act, dm.n_act))
        ofs += dm.n_dof
    return out


def project_dm(dms: Sequence[DmModel], commands: np.ndarray, theta,
               pupil_points: np.ndarray, cone_altitude_m: float | None = None) -> np.ndarray:
    """Correction wavefront of all mirrors toward one direction; (M,) array."""
    wf = np.zeros(len(pupil_points))
    for dm, surf in zip(dms, split_commands(np.asarray(commands, float), dms)):
        pts = layer_points(pupil_points, theta, dm.altitude_m, cone_altitude_m)
        idx, w = bilinear_stencil(pts, dm.pitch_m, dm.n_act, f"dm@{dm.altitude_m:g}m")
        wf += gather(surf, idx, w)
    return wf


def project_dm_adjoint(wavefront: np.ndarray, dms: Sequence[DmModel], theta,
                       pupil_points: np.ndarray,
                       cone_altitude_m: float | None = None) -> np.ndarray:
    """Exact transpose of `project_dm`; returns a flat command-space vector."""
    parts = []
    for dm in dms:
        pts = layer_points(pupil_points, theta, dm.altitude_m, cone_altitude_m)
        idx, w = bilinear_stencil(pts, dm.pitch_m, dm.n_act, f"dm@{dm.altitude_m:g}m")
        parts.append(scatter_adjoint(wavefront, idx, w, dm.n_act).ravel())
    return np.concatenate(parts)


def required_half_extent(altitude_m: float, pupil_radius_m: float, directions,
                         cone_altitudes=None) -> float:
    """Meta-pupil half width at one altitude over a set of view directions."""
    half = 0.0
    cones = cone_altitudes if cone_altitudes is not None else [None] * len(directions)
    for th, cone in zip(directions, cones):
        scale = 1.0 if cone is None else 1.0 - altitude_m / cone
        reach = np.max(np.abs(np.asarray(th))) * altitude_m + scale * pupil_radius_m
        half = max(half, reach)
    return half


def plan_grid_size(altitude_m: float, spacing_m: float, pupil_radius_m: float,
                   directions, cone_altitudes=None, guard_cells: int = 1) -> int:
    """Smallest power-of-two grid covering the meta-pupil plus a guard cell."""
    half = required_half_extent(altitude_m, pupil_radius_m, directions, cone_altitudes)
    need = 2.0 * (half + guard_cells * spacing_m) / spacing_m + 1
    return int(2 ** np.ceil(np.log2(need)))
