"""Progressive feature transmission for split edge inference, at desk scale.

A simulator of slot-by-slot feature uploading for linear classification
over Gaussian-mixture features: importance-aware selection, calibrated
uncertainty envelopes, threshold stopping rules for static and outage
channels, two baseline schemes, and a seeded Monte Carlo sweep harness.
"""

from .bounds import (DeltaMixture, ExpBoundParams, QuadratureError,
                     calibrate_exp_bound, delta_mixture, entropy_upper_bound,
                     exp_bound, expected_entropy_bound,
                     multiclass_entropy_bound)
from .channel import (ChannelModel, FadingChannel, GaussianChannel,
                      SlotOutcome, features_per_slot, outage_prob,
                      slot_outcome)
from .gains import (GainTable, SelectionPlan, average_gain, build_gain_table,
                    pairwise_gain, select_features)
from .harness import (ConfigError, ExperimentConfig, SweepResult, SweepRow,
                      emit_csv, load_config, load_csv, run_sweep)
from .linclass import (PartialFeatureVector, binary_entropy, classify,
                       differential_distance, entropy, half_mahalanobis,
                       posteriors, with_features)
from .protocol import (FeedbackKind, FeedbackSignal, OneShotCompression,
                       ProgressFtx, RandomFeatureStopping, RunMetrics,
                       SchemeKind, TrialLog, TrialState, metrics,
                       plan_one_shot, run_trial)
from .statmodel import (GmModel, Sample, default_gain_profile, load_model,
                        sample, save_model, synth_model)
from .stopping import (StopDecision, StoppingPolicy, binom_pmf,
                       convexity_violation, cumulative_gain, gain_grid,
                       outage_averaged_bound, stop_fading, stop_gaussian)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
