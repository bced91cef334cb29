from .indicators import DEGENERATE, IndicatorReport, indicator_report, is_degenerate, sigma_otoc, xi_otoc
from .resonances import CoarseGrainedPropagator, RprEstimate, TruncationError, rpr_spectrum
from .spectral import (DegenerateSpectrumError, brody_fit, brody_pdf, brody_sample, gap_ratio, ipr,
                       unfold_spectrum)
