"""Plug-in adversarial-input detection for variable-length time-series forecasters.

Each input window is split into several shortened subsamples, every subsample is
forecast by the protected model, and the pairwise agreement of those forecasts
is compared against a threshold calibrated on benign data.
"""

from ilid.timeseries import (
    NormStats,
    SampleWindow,
    TimeSeries,
    fit_norm_stats,
    load_csv,
    make_windows,
    znormalize,
)
from ilid.forecasters import (
    CapabilityError,
    ForecasterSpec,
    RemoteForecastError,
    forecast,
    loss_gradient,
)
from ilid.subsample import SubsamplePlan, apply_plan, random_fraction_plan, stride_plan
from ilid.similarity import (
    PairwiseScores,
    UndefinedCorrelationError,
    aggregate,
    distance_similarity,
    pairwise_scores,
    pearson,
)
from ilid.calibration import (
    ThresholdModel,
    calibrate,
    dynamic_update,
    gaussian_threshold,
    norm_cdf,
    norm_ppf,
    order_statistic_threshold,
)
from ilid.detector import (
    EvaluationReport,
    Verdict,
    detect,
    run_online,
    evaluate,
    forecast_metrics,
    score_window,
)
from ilid.attacks import AttackConfig, AttackResult, bim, dga, fgsm, pgd, run_attack, sparsify

__version__ = "0.1.0"
