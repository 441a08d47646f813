"""Hybrid-template canonical correlation analysis for SSVEP decoding.

The package bundles standard CCA, transfer-template CCA (tt-CCA),
subject-specific template CCA (TDCCA) and the hybrid HTCCA decoder, a seeded
multi-subject simulator, a leave-one-block-out evaluation harness and a small
file format for epoched datasets.
"""

__version__ = "0.1.0"

from .classifiers import (HtccaModel, ScoreVector, TdccaModel, TtccaModel, cca_classify,
                          fuse_scores, htcca_classify, htcca_correlations, htcca_fit,
                          tdcca_classify, tdcca_correlations, tdcca_fit, ttcca_classify,
                          ttcca_correlations, ttcca_fit)
from .dataset import (EpochedDataset, TrialTensor, bandpass, extract_window, read_dataset,
                      resample, select_channels, window_all, window_bounds, write_dataset)
from .errors import *  # noqa: F401,F403
from .evaluation import (EvalConfig, EvalReport, SubjectResult, TTestResult, accuracy_table,
                         itr, loo_cross_validate, paired_t_test, pairwise_tests,
                         series_by_trials, summary_rows, table_from_csv, table_to_csv)
from .numerics import CcaSolution, cca, pearson
from .references import ReferenceSet, make_references
from .simulator import PRESETS, SimConfig, SimDataset, preset, simulate, snr_measured
from .templates import (TemplateBank, average_trials, build_template_bank, concat_trials,
                        split_trials, transfer_average, transfer_trials)
