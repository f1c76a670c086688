"""Feature-augmented least squares and frame-wise sinusoidal decomposition."""

__version__ = "0.1.0"

from .errors import (
    DivergenceError, DomainError, EmptyDesignError, ExpressionOverflowError, ParseError,
    RankDeficiencyError, TrigfitError, WavFormatError, WavTruncatedError,
)
from .exprgen import (
    DomainSpec, Expression, Term, domain_of, eval_expression, evaluate, format_expression,
    gen_mixed_function, gen_trig_function, parse_expression,
)
from .featurize import FeatureSpec, build_design_matrix, linear_spec, poly_spec, product_spec, trig_spec
from .linreg import (
    Dataset, FitReport, LinearModel, absolute_error, fit_least_squares, fit_polynomial, predict,
    run_comparison, train_test_split,
)
from .audioio import AudioSignal, Frame, compute_time_normalization, load_wav_left, segment_frames, write_wav
from .sinefit import FitConfig, FrameFit, Mode, WaveParams, decompose, fit_frame, resynthesize, superpose
