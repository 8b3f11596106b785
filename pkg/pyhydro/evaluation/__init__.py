from .gcn import Gcn, propagation_matrix
from .linkpred import EdgeSplit, LpModel, make_edge_split, sample_non_edges, train_lp, lp_f1, run_lp, f1_from_scores
from .attacks import NodeClassifier, train_node_classifier, attack_mia, attack_lmia, fit_threshold
from .statistics import stats, measure_efficiency, compare_efficiency
