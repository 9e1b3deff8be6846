"""corrnet: TCP flow features, correlation rankings, and feature selection
for benign/malware traffic classification."""

__version__ = "0.1.0"

from .classifiers import (ClassifierSpec, CvReport, TreeParams, cross_validate,
                          model_from_json, model_to_json, predict, train,
                          train_ensemble, train_gnb, train_tree)
from .dataset import (FEATURE_IDS, ClassLabel, FeatureMatrix, FoldPlan, concat,
                      load_csv, save_csv, stratified_kfold)
from .errors import (ClassifierError, CorrnetError, DatasetError, PcapError,
                     SelectionAbort, SelectionError, StatsError)
from .features import FEATURE_NAMES, FeatureVector, compute_features
from .flows import (CloseReason, Direction, FlowKey, FlowRecord, OpenReason,
                    assemble_flows)
from .pcap import CaptureStats, RawPacket, read_pcap
from .ranking import (METHODS, PairQueue, PairScore, RankedList, alt_ranking,
                      fc_ranking, ff_ranking, ranking, relevance_table)
from .selection import (SelectionResult, TraceEntry, cv_evaluator,
                        holdout_evaluator, replay_evaluator, run_selection,
                        select_features)
from .stats import (ClassRange, RelevanceScore, anova_f, chi_square_score,
                    class_ranges, cr_relevance, kruskal_wallis_h,
                    mann_whitney_u, nmrs)
