"""Shack-Hartmann sensing in Fried geometry, noise synthesis and whitening.

Phase lives on subaperture corners; a subaperture reads the mean wavefront
gradient over its cell, which for the corner stencil is

    sx = ((p10 + p11) - (p00 + p01)) / (2 d),   sy analogous,

with d the subaperture size.  Slope vectors are laid out all-x-then-all-y
over the active subapertures of one sensor; multi-sensor concatenation is
the tomography module's job.

Laser-star sensors carry a structured per-subaperture 2x2 noise covariance
``sigma^2 (I + (tau/f^2) beta beta^T)`` (spot elongation along beta) and an
uncertain global tip-tilt that is projected out of both the measurements and
the model, via the symmetric idempotent complement of the uniform-slope
modes.
"""

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, ModelError

_AREA_SUPERSAMPLE = 8  # per-axis samples for the subaperture illumination test


@dataclass(frozen=True)
class WfsGeometry:
    """Square lenslet grid of one sensor plus its activation mask."""

    n_sub: int
    sub_size_m: float
    active: np.ndarray          # (n_sub, n_sub) bool
    direction_index: int = 0

    def __post_init__(self):
        if self.n_sub < 1 or self.sub_size_m <= 0:
            raise ConfigurationError("need n_sub >= 1 and a positive subaperture size")
        if self.active.shape != (self.n_sub, self.n_sub):
            raise ConfigurationError("activation mask shape mismatch")
        if not np.any(self.active):
            raise ConfigurationError("sensor has no active subapertures")

    @property
    def n_active(self) -> int:
        return int(np.count_nonzero(self.active))

    @property
    def n_corner(self) -> int:
        return self.n_sub + 1

    def corner_mask(self) -> np.ndarray:
        """Phase corner points touched by at least one active subaperture."""
        m = np.zeros((self.n_corner, self.n_corner), dtype=bool)
        act = self.active
        m[:-1, :-1] |= act
        m[:-1, 1:] |= act
        m[1:, :-1] |= act
        m[1:, 1:] |= act
        return m

    def corner_coords(self) -> np.ndarray:
        """Coordinates of all corner points, (n_corner, n_corner, 2), meters."""
        half = 0.5 * self.n_sub * self.sub_size_m
        x = np.arange(self.n_corner) * self.sub_size_m - half
        xx, yy = np.meshgrid(x, x, indexing="xy")
        return np.stack([xx, yy], axis=-1)

    def corner_points(self) -> np.ndarray:
        return self.corner_coords()[self.corner_mask()]

    def subap_centers(self) -> np.ndarray:
        """Centers of the active subapertures, (S, 2), meters."""
        half = 0.5 * self.n_sub * self.sub_size_m
        c = (np.arange(self.n_sub) + 0.5) * self.sub_size_m - half
        xx, yy = np.meshgrid(c, c, indexing="xy")
        return np.stack([xx[self.active], yy[self.active]], axis=-1)


def make_wfs_geometry(n_sub: int, sub_size_m: float, pupil_diameter_m: float,
                      obstruction: float = 0.0, threshold: float = 0.5,
                      direction_index: int = 0) -> WfsGeometry:
    """Activate subapertures whose illuminated area fraction reaches `threshold`."""
    half = 0.5 * n_sub * sub_size_m
    ss = _AREA_SUPERSAMPLE
    offs = (np.arange(ss) + 0.5) / ss * sub_size_m
    r_out = 0.5 * pupil_diameter_m
    r_in = 0.5 * obstruction * pupil_diameter_m
    active = np.zeros((n_sub, n_sub), dtype=bool)
    for iy in range(n_sub):
        for ix in range(n_sub):
            x = ix * sub_size_m - half + offs
            y = iy * sub_size_m - half + offs
            xx, yy = np.meshgrid(x, y, indexing="xy")
            r = np.hypot(xx, yy)
            frac = np.mean((r <= r_out) & (r >= r_in))
            active[iy, ix] = frac >= threshold
    return WfsGeometry(n_sub=n_sub, sub_size_m=sub_size_m, active=active,
                       direction_index=direction_index)


def wavefront_from_points(geom: WfsGeometry, values_at_points: np.ndarray) -> np.ndarray:
    """Expand a masked corner-point vector to the full corner array."""
    full = np.zeros((geom.n_corner, geom.n_corner))
    full[geom.corner_mask()] = values_at_points
    return full


def shack_hartmann(wavefront: np.ndarray, geom: WfsGeometry) -> np.ndarray:
    """Mean-gradient slopes over active subapertures, layout [sx..., sy...]."""
    nc = geom.n_corner
    if wavefront.shape != (nc, nc):
        raise ConfigurationError(
            f"wavefront shape {wavefront.shape} does not match {nc}x{nc} corners")
    d = geom.sub_size_m
    p00 = wavefront[:-1, :-1]
    p01 = wavefront[:-1, 1:]   # +x neighbor
    p10 = wavefront[1:, :-1]   # +y neighbor
    p11 = wavefront[1:, 1:]
    sx = ((p01 + p11) - (p00 + p10)) / (2.0 * d)
    sy = ((p10 + p11) - (p00 + p01)) / (2.0 * d)
    act = geom.active
    return np.concatenate([sx[act], sy[act]])


def shack_hartmann_adjoint(slopes: np.ndarray, geom: WfsGeometry) -> np.ndarray:
    """Exact transpose of `shack_hartmann`; returns a full corner array."""
    S = geom.n_active
    if slopes.size != 2 * S:
        raise ConfigurationError(f"slope vector length {slopes.size} != {2 * S}")
    d = geom.sub_size_m
    nc = geom.n_corner
    sx = np.zeros((geom.n_sub, geom.n_sub))
    sy = np.zeros_like(sx)
    sx[geom.active] = slopes[:S]
    sy[geom.active] = slopes[S:]
    out = np.zeros((nc, nc))
    gx = sx / (2.0 * d)
    gy = sy / (2.0 * d)
    out[:-1, :-1] += -gx - gy
    out[:-1, 1:] += gx - gy
    out[1:, :-1] += -gx + gy
    out[1:, 1:] += gx + gy
    return out


@dataclass(frozen=True)
class NoiseModel:
    """Per-sensor measurement noise: isotropic floor plus optional elongation."""

    sigma2: float
    beta: np.ndarray | None = None   # (S, 2) elongation vectors, LGS only
    fwhm: float = 1.0
    tau: float = 0.0
    tiptilt_removed: bool = False

    def __post_init__(self):
        if self.sigma2 <= 0:
            raise ModelError("sigma^2 must be positive")
        if not 0.0 <= self.tau <= 1.0:
            raise ModelError("tau must lie in [0, 1]")
        if self.fwhm <= 0:
            raise ModelError("spot FWHM must be positive")

    def cov_blocks(self, n_active: int) -> np.ndarray:
        """(S, 2, 2) per-subaperture covariance blocks."""
        eye = np.broadcast_to(np.eye(2), (n_active, 2, 2)).copy()
        blocks = self.sigma2 * eye
        if self.beta is not None:
            b = np.asarray(self.beta, dtype=float)
            if b.shape != (n_active, 2):
                raise ModelError(f"beta shape {b.shape} != ({n_active}, 2)")
            blocks += (self.sigma2 * self.tau / self.fwhm ** 2) * np.einsum(
                "si,sj->sij", b, b)
        return blocks

    def inv_blocks(self, n_active: int) -> np.ndarray:
        """Closed-form inverses via the rank-one update formula."""
        inv = np.broadcast_to(np.eye(2), (n_active, 2, 2)).copy() / self.sigma2
        if self.beta is not None:
            b = np.asarray(self.beta, dtype=float)
            gamma = self.tau / self.fwhm ** 2
            denom = 1.0 + gamma * np.einsum("si,si->s", b, b)
            if np.any(denom <= 0):
                raise ModelError("noise covariance block is singular")
            coef = gamma / (self.sigma2 * denom)
            inv -= coef[:, None, None] * np.einsum("si,sj->sij", b, b)
        return inv


def elongation_vectors(geom: WfsGeometry, pupil_radius_m: float,
                       e_max: float, launch=(0.0, 0.0)) -> np.ndarray:
    """Radial elongation pattern about the launch position, scaled to e_max."""
    centers = geom.subap_centers()
    rel = centers - np.asarray(launch, dtype=float)[None, :]
    return e_max * rel / pupil_radius_m


def sigma2_from_flux(flux_photons: float, read_noise_e: float,
                     kappa_photon: float, kappa_read: float) -> float:
    """Slope variance from photon count: shot term k_ph/N plus readout term."""
    if flux_photons <= 0:
        raise ModelError("photon flux must be positive")
    return kappa_photon / flux_photons + kappa_read * (read_noise_e / flux_photons) ** 2


@dataclass(frozen=True)
class TipTiltProjector:
    """Orthogonal projector onto uniform x- and y-slope vectors."""

    n_active: int

    def apply(self, slopes: np.ndarray) -> np.ndarray:
        """T s: the tip-tilt component of a slope vector."""
        S = self.n_active
        out = np.empty_like(slopes)
        out[:S] = slopes[:S].mean()
        out[S:] = slopes[S:].mean()
        return out

    def complement(self, slopes: np.ndarray) -> np.ndarray:
        """(I - T) s."""
        return slopes - self.apply(slopes)


def remove_tiptilt(slopes: np.ndarray, projector: TipTiltProjector) -> np.ndarray:
    if slopes.size != 2 * projector.n_active:
        raise ConfigurationError("slope vector length does not match projector")
    return projector.complement(slopes)


def sample_noise(model: NoiseModel, geom: WfsGeometry,
                 rng: np.random.Generator) -> np.ndarray:
    """Zero-mean Gaussian draw with the per-subaperture block covariance."""
    S = geom.n_active
    blocks = model.cov_blocks(S)
    # closed-form 2x2 Cholesky factors
    a = blocks[:, 0, 0]
    b = blocks[:, 0, 1]
    c = blocks[:, 1, 1]
    la = np.sqrt(a)
    lb = b / la
    rest = c - lb * lb
    if np.any(rest <= 0):
        raise ModelError("noise covariance block is not positive definite")
    lc = np.sqrt(rest)
    z = rng.standard_normal((S, 2))
    nx = la * z[:, 0]
    ny = lb * z[:, 0] + lc * z[:, 1]
    return np.concatenate([nx, ny])


def apply_inv_noise_cov(slopes: np.ndarray, model: NoiseModel,
                        geom: WfsGeometry) -> np.ndarray:
    """Whitening: block inverse, sandwiched with (I-T) for tip-tilt-free sensors."""
    S = geom.n_active
    if slopes.size != 2 * S:
        raise ConfigurationError(f"slope vector length {slopes.size} != {2 * S}")
    work = slopes
    projector = TipTiltProjector(S)
    if model.tiptilt_removed:
        work = projector.complement(work)
    inv = model.inv_blocks(S)
    pairs = np.stack([work[:S], work[S:]], axis=-1)
    out = np.einsum("sij,sj->si", inv, pairs)
    res = np.concatenate([out[:, 0], out[:, 1]])
    if model.tiptilt_removed:
        res = projector.complement(res)
    return res


def dump_slopes_csv(path, geom: WfsGeometry, slopes: np.ndarray,
                    sensor_index: int = 0) -> None:
    """Debug dump, one row per active subaperture."""
    S = geom.n_active
    iy, ix = np.nonzero(geom.active)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["sensor", "subap_ix", "subap_iy", "sx", "sy"])
        for k in range(S):
            writer.writerow([sensor_index, int(ix[k]), int(iy[k]),
                             repr(slopes[k]), repr(slopes[S + k])])
