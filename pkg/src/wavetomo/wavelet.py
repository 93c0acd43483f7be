"""Orthonormal 2-D Daubechies wavelet transform and the diagonal turbulence prior.

The transform is the standard Mallat pyramid with periodic (circular)
boundary handling, which keeps it exactly orthonormal: ``idwt2(dwt2(f)) == f``
and ``||dwt2(f)|| == ||f||`` to machine precision.  Coefficients are stored in
the packed square layout (approximation block in the top-left corner,
detail blocks around it, recursively), so a coefficient array has the same
shape as the input field.

Scale indexing for the prior: the coarsest approximation block carries scale
index 0; a detail block of size B x B carries index ``log2(B) - 2`` (the 8x8
detail blocks of a full-depth decomposition are scale 1, 16x16 blocks scale
2, and so on).  Decomposition depth defaults to an 8x8 approximation block.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ConfigurationError

# Orthonormal Daubechies lowpass filters (minimal phase), standard table
# values; index = number of vanishing moments.  Highpass follows by QMF.
_DAUB_LOWPASS = {
    1: (0.70710678118654752, 0.70710678118654752),
    2: (0.48296291314453414, 0.83651630373780791, 0.22414386804201338,
        -0.12940952255126038),
    3: (0.33267055295008262, 0.80689150931109258, 0.45987750211849157,
        -0.13501102001025459, -0.085441273882026662, 0.035226291885709537),
    4: (0.2303778133088965, 0.71484657055291565, 0.63088076792985891,
        -0.027983769416859854, -0.18703481171909308, 0.030841381835560764,
        0.0328830116668852, -0.010597401785069032),
    5: (0.16010239797419291, 0.60382926979718967, 0.72430852843777293,
        0.13842814590132073, -0.24229488706638203, -0.032244869584638375,
        0.077571493840045714, -0.0062414902127982743, -0.012580751999081999,
        0.0033357252854737713),
    6: (0.11154074335010946, 0.49462389039845309, 0.75113390802109535,
        0.31525035170919763, -0.22626469396543982, -0.12976686756726194,
        0.097501605587323049, 0.027522865530305729, -0.03158203931748603,
        0.00055384220116149614, 0.0047772575109455106, -0.0010773010853084796),
    7: (0.077852054085009179, 0.39653931948191731, 0.72913209084623512,
        0.46978228740519312, -0.14390600392856498, -0.22403618499387498,
        0.071309219266830265, 0.080612609151083072, -0.038029936935014414,
        -0.016574541630666881, 0.012550998556099841, 0.00042957797292136652,
        -0.0018016407040474909, 0.00035371379997452025),
    8: (0.05441584224310401, 0.31287159091429997, 0.67563073629728981,
        0.58535468365420671, -0.015829105256349306, -0.28401554296154693,
        0.00047248457391328277, 0.12874742662047846, -0.017369301001807546,
        -0.044088253930794752, 0.013981027917398282, 0.0087460940474057767,
        -0.0048703529934515743, -0.00039174037337694705, 0.00067544940645056937,
        -0.00011747678412476953),
    9: (0.038077947363878347, 0.24383467461259035, 0.60482312369011111,
        0.65728807805130054, 0.13319738582500758, -0.29327378327917491,
        -0.096840783222976461, 0.14854074933810638, 0.030725681479333379,
        -0.067632829061329974, 0.00025094711483145196, 0.022361662123679097,
        -0.0047232047577513973, -0.0042815036824634298, 0.0018476468830562265,
        0.00023038576352319597, -0.00025196318894271014, 3.9347320316271599e-05),
    10: (0.026670057900555554, 0.18817680007769149, 0.52720118893172559,
         0.68845903945360357, 0.28117234366057746, -0.24984642432731538,
         -0.19594627437737704, 0.12736934033579326, 0.093057364603572351,
         -0.071394147166397087, -0.029457536821875813, 0.033212674059341002,
         0.0036065535669561697, -0.010733175483330575, 0.0013953517470529012,
         0.0019924052951850561, -0.00068585669495971163, -0.00011646685512928545,
         9.3588670320069591e-05, -1.3264202894521245e-05),
}

COARSEST_BAND = 8  # side length of the default approximation block


def daubechies_filters(order: int) -> tuple[np.ndarray, np.ndarray]:
    """Return the (lowpass, highpass) analysis pair for the given order."""
    if order not in _DAUB_LOWPASS:
        raise ConfigurationError(
            f"unsupported Daubechies order {order}; available: 1..{max(_DAUB_LOWPASS)}")
    h = np.asarray(_DAUB_LOWPASS[order], dtype=float)
    # quadrature mirror: g[k] = (-1)^k h[L-1-k]
    g = h[::-1].copy()
    g[1::2] *= -1.0
    return h, g


def _check_size(n: int) -> None:
    if n < 2 or (n & (n - 1)) != 0:
        raise ConfigurationError(f"grid side {n} is not a power of two")


def default_levels(n: int, coarsest: int = COARSEST_BAND) -> int:
    """Decomposition depth that leaves a `coarsest` x `coarsest` approximation."""
    _check_size(n)
    levels = int(np.log2(n)) - int(np.log2(coarsest))
    return max(levels, 0)


@lru_cache(maxsize=64)
def _gather_indices(n: int, taps: int) -> np.ndarray:
    """Index table idx[m, k] = (2k + m) mod n for the decimated convolution."""
    k = np.arange(n // 2)
    m = np.arange(taps)
    return (2 * k[None, :] + m[:, None]) % n


def _analysis_1d(x: np.ndarray, h: np.ndarray, g: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """One decimating analysis step along the last axis (periodic)."""
    n = x.shape[-1]
    idx = _gather_indices(n, len(h))
    lo = np.zeros(x.shape[:-1] + (n // 2,))
    hi = np.zeros_like(lo)
    for m in range(len(h)):
        xm = x[..., idx[m]]
        lo += h[m] * xm
        hi += g[m] * xm
    return lo, hi


def _synthesis_1d(lo: np.ndarray, hi: np.ndarray, h: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Inverse of `_analysis_1d` (exact transpose of the analysis map)."""
    n = 2 * lo.shape[-1]
    idx = _gather_indices(n, len(h))
    out = np.zeros(lo.shape[:-1] + (n,))
    for m in range(len(h)):
        # indices (2k + m) mod n are distinct for fixed m, so += is safe
        out[..., idx[m]] += h[m] * lo + g[m] * hi
    return out


def dwt2(field: np.ndarray, order: int = 3, levels: int | None = None) -> np.ndarray:
    """Forward 2-D transform of a square power-of-two array, packed layout."""
    field = np.asarray(field, dtype=float)
    if field.ndim != 2 or field.shape[0] != field.shape[1]:
        raise ConfigurationError(f"expected a square 2-D array, got shape {field.shape}")
    n = field.shape[0]
    _check_size(n)
    if levels is None:
        levels = default_levels(n)
    if levels > int(np.log2(n)) - 1:
        raise ConfigurationError(f"cannot run {levels} levels on a {n}x{n} grid")
    h, g = daubechies_filters(order)
    out = field.copy()
    size = n
    for _ in range(levels):
        block = out[:size, :size]
        lo, hi = _analysis_1d(block, h, g)          # along rows (axis 1)
        loT, hiT = lo.T.copy(), hi.T.copy()
        ll, lh = _analysis_1d(loT, h, g)            # along columns
        hl, hh = _analysis_1d(hiT, h, g)
        half = size // 2
        out[:half, :half] = ll.T
        out[half:size, :half] = lh.T
        out[:half, half:size] = hl.T
        out[half:size, half:size] = hh.T
        size = half
    return out


def idwt2(coeffs: np.ndarray, order: int = 3, levels: int | None = None) -> np.ndarray:
    """Inverse of `dwt2` for the same (order, levels)."""
    coeffs = np.asarray(coeffs, dtype=float)
    n = coeffs.shape[0]
    _check_size(n)
    if levels is None:
        levels = default_levels(n)
    h, g = daubechies_filters(order)
    out = coeffs.copy()
    size = n >> levels
    for _ in range(levels):
        full = 2 * size
        ll = out[:size, :size].T.copy()
        lh = out[size:full, :size].T.copy()
        hl = out[:size, size:full].T.copy()
        hh = out[size:full, size:full].T.copy()
        lo = _synthesis_1d(ll, lh, h, g).T
        hi = _synthesis_1d(hl, hh, h, g).T
        out[:full, :full] = _synthesis_1d(lo, hi, h, g)
        size = full
    return out


@lru_cache(maxsize=64)
def scale_index_map(n: int, levels: int) -> np.ndarray:
    """Scale index j per packed coefficient.

    Approximation block -> 0; detail block of side B -> log2(B) - 2, so a
    full-depth decomposition yields contiguous indices 0..log2(n)-3.
    """
    _check_size(n)
    jmap = np.zeros((n, n), dtype=int)
    size = n
    for _ in range(levels):
        half = size // 2
        j = int(np.log2(half)) - 2
        jmap[half:size, :size] = j
        jmap[:half, half:size] = j
        size = half
    jmap[:size, :size] = 0
    return jmap


def max_scale_index(n: int, levels: int | None = None) -> int:
    """Largest scale index present on an n x n grid at the given depth."""
    if levels is None:
        levels = default_levels(n)
    if levels == 0:
        return 0
    return int(np.log2(n)) - 3


@dataclass(frozen=True)
class PriorDiagonal:
    """Per-layer diagonal weights of the turbulence penalty, packed layout."""

    weights: tuple[np.ndarray, ...]

    @property
    def total_size(self) -> int:
        return sum(w.size for w in self.weights)

    def flat(self) -> np.ndarray:
        return np.concatenate([w.ravel() for w in self.weights])


def prior_weight(strength: float, outer_scale_m: float, j: int | np.ndarray):
    """Weight (1/c_rho) * (kout_term + 2^((11/3) j)).

    The constant term is the outer-scale plateau of the inverse spectrum,
    ``(2*pi/outer_scale)^(11/3)``; for typical outer scales it is small
    against the scale term, observably negligible rather than dropped.
    """
    if outer_scale_m <= 0:
        raise ConfigurationError("outer scale must be positive")
    kout_term = (2.0 * np.pi / outer_scale_m) ** (11.0 / 3.0)
    return (kout_term + np.exp2((11.0 / 3.0) * np.asarray(j, dtype=float))) / strength


def build_prior(layer_specs, outer_scale_m: float,
                levels: int | None = None) -> PriorDiagonal:
    """Assemble the diagonal prior for a list of layer definitions.

    Each entry needs `.grid_size` and `.strength`.  `levels` defaults to the
    standard depth (8x8 approximation block) per layer.
    """
    weights = []
    for spec in layer_specs:
        if spec.strength <= 0:
            raise ConfigurationError("layer strength must be positive")
        n = spec.grid_size
        lv = default_levels(n) if levels is None else levels
        jmap = scale_index_map(n, lv)
        weights.append(prior_weight(spec.strength, outer_scale_m, jmap))
    return PriorDiagonal(weights=tuple(weights))


def apply_prior(coeff_layers, prior: PriorDiagonal, alpha: float):
    """Elementwise alpha * D * c over the per-layer packed arrays."""
    if alpha < 0:
        raise ConfigurationError("alpha must be nonnegative")
    if len(coeff_layers) != len(prior.weights):
        raise ConfigurationError("coefficient/prior layer count mismatch")
    out = []
    for c, w in zip(coeff_layers, prior.weights):
        if c.shape != w.shape:
            raise ConfigurationError(f"coefficient shape {c.shape} != prior shape {w.shape}")
        out.append(alpha * w * c)
    return out


def penalty(coeff_layers, prior: PriorDiagonal, alpha: float) -> float:
    """Quadratic form alpha * (D c, c)."""
    if alpha < 0:
        raise ConfigurationError("alpha must be nonnegative")
    total = 0.0
    for c, w in zip(coeff_layers, prior.weights):
        total += float(np.sum(w * c * c))
    return alpha * total
