"""Dynamic Bayesian multitaper spectral estimation."""
from ._backend import BACKEND
from .analysis import (TheoryCurves, alpha_for_unit_kappa, equivalent_filters,
                       flat_spectrum_gamma, kappa_bounds, kappa_mu,
                       theorem_bounds, theory_curves)
from .datagen import (GroundTruth, LogModel, SyntheticSpec, ar_arma_simulate,
                      gen_statespace_data, gen_synthetic)
from .dbmt_em import (DbmtConfig, EigenTrack, assemble_spectrogram,
                      dbmt_spectrogram, em_fit_taper, update_alpha, update_q)
from .lgss import (SmootherResult, StateSpaceModel, batch_map_solve,
                   covariance_smooth, fis_backward, kalman_forward, smooth,
                   steady_state)
from .logdbmt_em import (LogObservation, LogTrack, assemble_log_spectrogram,
                         em_fit_taper_log, laplace_filter_step,
                         log_eigen_spectra, logdbmt_spectrogram, update_nu)
from .mtm import MtConfig, mt_spectrogram
from .special import chi2_quantile, digamma
from .spectrogram import Spectrogram, segment
from .tapers import (FrequencyGrid, TaperSet, compute_dpss,
                     concentration_matrix, eigen_coefficients,
                     max_taper_count)

__version__ = "0.1.0"
