"""Von Karman phase screens, the layered atmosphere, and frozen-flow motion.

Conventions (used consistently across the package):

* spatial wavenumber ``kappa`` is angular, rad/m;
* a screen stores phase in radians at the configured reference wavelength;
* the spectral density ``m(kappa) = strength * (k0^2 + |kappa|^2)^(-11/6)``
  with knee ``k0 = 2*pi / outer_scale_m`` is normalized so that the screen
  variance equals ``sum over FFT bins of m(kappa) * (2*pi / extent)^2``,
  i.e. the Riemann sum of ``integral m(kappa) d^2 kappa``;
* under that convention a Kolmogorov-strength layer with Fried parameter
  ``r0`` has ``strength = 0.0229 * (2*pi)^(5/3) * r0^(-5/3)``.

Screens are synthesized spectrally: white complex Gaussian noise shaped by
``sqrt(m)`` and inverse transformed.  Exact stationary statistics on the
periodic grid, no subharmonic augmentation (the outer scale bounds the
low-frequency power; adequate at desk scale and documented as a limitation).
"""

import struct
from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigurationError
from .seeding import rng_for

SCREEN_MAGIC = b"PSCN"
_HEADER = struct.Struct("<4sIIId8x")  # magic, version, rows, cols, spacing, reserved
SCREEN_HEADER_BYTES = _HEADER.size  # 32


def fried_strength(r0_m: float) -> float:
    """Total spectral strength of a turbulence profile with Fried parameter r0."""
    if r0_m <= 0:
        raise ConfigurationError("r0 must be positive")
    return 0.0229 * (2.0 * np.pi) ** (5.0 / 3.0) * r0_m ** (-5.0 / 3.0)


@dataclass(frozen=True)
class VonKarmanSpectrum:
    """Turbulence power spectrum with an outer-scale knee.

    `exponent` acts on the squared-frequency term; -11/6 gives the
    Kolmogorov -11/3 power law for the density at high frequency.
    """

    outer_scale_m: float = 25.0
    exponent: float = -11.0 / 6.0

    def __post_init__(self):
        if self.outer_scale_m <= 0:
            raise ConfigurationError("outer scale must be positive")

    @property
    def knee(self) -> float:
        """Cutoff wavenumber 2*pi/outer_scale, rad/m."""
        return 2.0 * np.pi / self.outer_scale_m

    def density(self, kx: np.ndarray, ky: np.ndarray, strength: float) -> np.ndarray:
        """Spectral density at angular wavenumbers (kx, ky); finite at zero."""
        return strength * (self.knee ** 2 + kx * kx + ky * ky) ** self.exponent


@dataclass(frozen=True)
class LayerSpec:
    """One turbulence layer: where it sits, how strong, how it moves."""

    altitude_m: float
    strength: float
    wind_velocity: tuple[float, float] = (0.0, 0.0)
    grid_spacing_m: float = 0.5
    grid_size: int = 64

    def __post_init__(self):
        if self.altitude_m < 0:
            raise ConfigurationError("layer altitude must be nonnegative")
        if self.strength <= 0:
            raise ConfigurationError("layer strength must be positive")
        if self.grid_spacing_m <= 0:
            raise ConfigurationError("grid spacing must be positive")
        n = self.grid_size
        if n < 2 or (n & (n - 1)) != 0:
            raise ConfigurationError(f"grid size {n} is not a power of two")

    @property
    def extent_m(self) -> float:
        return self.grid_size * self.grid_spacing_m


def validate_layer_stack(specs) -> None:
    """Altitudes must be strictly increasing across the stack."""
    alts = [s.altitude_m for s in specs]
    if any(b <= a for a, b in zip(alts, alts[1:])):
        raise ConfigurationError(f"layer altitudes not strictly increasing: {alts}")


def normalize_strengths(specs, total: float = 1.0):
    """Rescale layer strengths so they sum to `total`."""
    if total <= 0:
        raise ConfigurationError("total strength must be positive")
    s = sum(spec.strength for spec in specs)
    return [replace(spec, strength=spec.strength * total / s) for spec in specs]


@dataclass(frozen=True)
class PhaseScreen:
    """Sampled phase of one layer (radians at the reference wavelength).

    `values` is the screen as currently positioned; `origin_offset` is the
    accumulated frozen-flow displacement.  The pristine pattern is kept so
    any position is realized with a single interpolation from it, which
    makes successive shifts compose exactly and bounds interpolation drift.
    """

    values: np.ndarray
    spacing_m: float
    origin_offset: np.ndarray  # accumulated frozen-flow shift, meters
    base_values: np.ndarray | None = None

    def __post_init__(self):
        if self.base_values is None:
            object.__setattr__(self, "base_values", self.values)

    @property
    def grid_size(self) -> int:
        return self.values.shape[0]

    @property
    def rms(self) -> float:
        return float(np.sqrt(np.mean(self.values ** 2)))


def generate_screen(spec: LayerSpec, spectrum: VonKarmanSpectrum, seed: int) -> PhaseScreen:
    """Draw one zero-mean Gaussian screen with the target spectral density.

    Deterministic per seed.  The piston (spatial mean) is removed, which
    exactly cancels the finite zero-frequency bin.
    """
    n = spec.grid_size
    delta = spec.grid_spacing_m
    rng = rng_for(seed, "screen")
    k = 2.0 * np.pi * np.fft.fftfreq(n, d=delta)
    kx, ky = np.meshgrid(k, k, indexing="xy")
    density = spectrum.density(kx, ky, spec.strength)
    # per-bin coefficient variance m(kappa) * (dkappa)^2, dkappa = 2*pi/(n*delta)
    amp = np.sqrt(density) * (2.0 * np.pi / (n * delta))
    z = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    field = np.sqrt(2.0) * np.real(n * n * np.fft.ifft2(z * amp / np.sqrt(2.0)))
    field -= field.mean()
    return PhaseScreen(values=field, spacing_m=delta, origin_offset=np.zeros(2))


def _shift_periodic(values: np.ndarray, cells: np.ndarray) -> np.ndarray:
    """Shift a periodic array by `cells` (may be fractional) along (x, y)."""
    rounded = np.round(cells)
    if np.allclose(cells, rounded, rtol=0.0, atol=1e-12):
        ix, iy = int(rounded[0]), int(rounded[1])
        if ix == 0 and iy == 0:
            return values
        # values[row, col] with col ~ x, row ~ y
        return np.roll(np.roll(values, iy, axis=0), ix, axis=1)
    n = values.shape[0]
    k = 2.0 * np.pi * np.fft.fftfreq(n)
    ramp_x = np.exp(-1j * k * cells[0])[None, :]
    ramp_y = np.exp(-1j * k * cells[1])[:, None]
    return np.real(np.fft.ifft2(np.fft.fft2(values) * ramp_x * ramp_y))


def advance_frozen_flow(screen: PhaseScreen, wind: tuple[float, float], dt: float) -> PhaseScreen:
    """Translate the screen by wind*dt with periodic wrap.

    The new position is realized with one sub-pixel (spectral) interpolation
    of the pristine pattern: integer total displacements reduce to circular
    permutations, shifts compose exactly and the variance is preserved.
    """
    if dt < 0:
        raise ConfigurationError("dt must be nonnegative")
    shift_m = np.asarray(wind, dtype=float) * dt
    if not np.all(np.isfinite(shift_m)):
        raise ConfigurationError("wind shift is not finite")
    offset = screen.origin_offset + shift_m
    if np.all(shift_m == 0.0):
        return replace(screen, origin_offset=offset)
    moved = _shift_periodic(screen.base_values, offset / screen.spacing_m)
    return PhaseScreen(values=moved, spacing_m=screen.spacing_m,
                       origin_offset=offset, base_values=screen.base_values)


@dataclass(frozen=True)
class AtmosphereState:
    """Ordered turbulence layers plus their current screens; the ground truth."""

    specs: tuple[LayerSpec, ...]
    screens: tuple[PhaseScreen, ...]

    def __post_init__(self):
        validate_layer_stack(self.specs)
        if len(self.specs) != len(self.screens):
            raise ConfigurationError("spec/screen count mismatch")

    @property
    def altitudes(self) -> list[float]:
        return [s.altitude_m for s in self.specs]

    def advance(self, dt: float) -> "AtmosphereState":
        moved = tuple(advance_frozen_flow(scr, spec.wind_velocity, dt)
                      for spec, scr in zip(self.specs, self.screens))
        return AtmosphereState(specs=self.specs, screens=moved)


def make_atmosphere(specs, spectrum: VonKarmanSpectrum, master_seed: int) -> AtmosphereState:
    """Generate all layers of an atmosphere, one independent stream each."""
    validate_layer_stack(specs)
    screens = tuple(generate_screen(spec, spectrum, seed=master_seed * 1000 + i)
                    for i, spec in enumerate(specs))
    return AtmosphereState(specs=tuple(specs), screens=screens)


def dump_screen(screen: PhaseScreen, path) -> None:
    """Write the binary screen format: 32-byte header + row-major float64."""
    rows, cols = screen.values.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(SCREEN_MAGIC, 1, rows, cols, screen.spacing_m))
        fh.write(np.ascontiguousarray(screen.values, dtype="<f8").tobytes())


def load_screen(path) -> PhaseScreen:
    with open(path, "rb") as fh:
        header = fh.read(SCREEN_HEADER_BYTES)
        magic, version, rows, cols, spacing = _HEADER.unpack(header)
        if magic != SCREEN_MAGIC:
            raise ConfigurationError(f"bad screen magic {magic!r}")
        if version != 1:
            raise ConfigurationError(f"unsupported screen version {version}")
        data = np.frombuffer(fh.read(rows * cols * 8), dtype="<f8").reshape(rows, cols)
    return PhaseScreen(values=data.astype(float), spacing_m=spacing,
                       origin_offset=np.zeros(2))


def periodogram_slope(specs_seed_pairs, spectrum: VonKarmanSpectrum,
                      band: tuple[float, float]) -> float:
    """Log-log slope of the azimuthally averaged periodogram over `band`.

    Independent statistical check of generated screens: estimates the
    spectral density from data and fits a power law over the given
    wavenumber band (rad/m).  Returns the fitted exponent of the density.
    """
    acc = None
    for spec, seed in specs_seed_pairs:
        scr = generate_screen(spec, spectrum, seed)
        n, delta = spec.grid_size, spec.grid_spacing_m
        p = np.abs(np.fft.fft2(scr.values)) ** 2 * delta ** 2 / ((2 * np.pi) ** 2 * n * n)
        acc = p if acc is None else acc + p
    acc /= len(specs_seed_pairs)
    k = 2.0 * np.pi * np.fft.fftfreq(n, d=delta)
    kx, ky = np.meshgrid(k, k, indexing="xy")
    kr = np.hypot(kx, ky).ravel()
    pw = acc.ravel()
    sel = (kr >= band[0]) & (kr <= band[1])
    # bin radially before fitting to even out the azimuthal sampling density
    nbins = 24
    edges = np.geomspace(band[0], band[1], nbins + 1)
    which = np.digitize(kr[sel], edges) - 1
    logk, logp = [], []
    for b in range(nbins):
        m = which == b
        if np.any(m):
            logk.append(np.log(np.exp(np.mean(np.log(kr[sel][m])))))
            logp.append(np.log(np.mean(pw[sel][m])))
    slope = np.polyfit(logk, logp, 1)[0]
    return float(slope)
