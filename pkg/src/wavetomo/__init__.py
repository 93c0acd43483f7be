"""Wavelet-domain atmospheric tomography and closed-loop MCAO simulation."""

from .atmosphere import (AtmosphereState, LayerSpec, PhaseScreen, VonKarmanSpectrum,
                         advance_frozen_flow, dump_screen, fried_strength,
                         generate_screen, load_screen, make_atmosphere)
from .errors import (ConfigurationError, GeometryError, ModelError, NumericalError,
                     WavetomoError)
from .propagation import (ApertureGrid, DmModel, GuideStar, project_dm,
                          project_dm_adjoint, project_lgs, project_lgs_adjoint,
                          project_ngs, project_ngs_adjoint)
from .wavelet import (PriorDiagonal, apply_prior, build_prior, dwt2, idwt2,
                      penalty)
from .wfs import (NoiseModel, TipTiltProjector, WfsGeometry, apply_inv_noise_cov,
                  make_wfs_geometry, remove_tiptilt, sample_noise, shack_hartmann,
                  shack_hartmann_adjoint)

__version__ = "0.1.0"
