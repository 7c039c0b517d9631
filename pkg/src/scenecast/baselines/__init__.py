"""Non-graph predictors over per-FSA feature vectors."""
from .cv import grid_search_cv, kfold_indices, write_cv_table
from .features import FeatureTable, build_feature_tables, supervised_pairs
from .lasso import lasso_fit, lasso_lambda_max, lasso_objective, soft_threshold
from .models import DEFAULT_GRIDS, KINDS, LABELS, BaselineModel
from .naive import naive_fit_predict
from .trees import Booster, Forest, Tree, boosted_fit, fit_tree, forest_fit

__all__ = [
    "BaselineModel", "Booster", "DEFAULT_GRIDS", "FeatureTable", "Forest", "KINDS", "LABELS", "Tree",
    "boosted_fit", "build_feature_tables", "fit_tree", "forest_fit", "grid_search_cv", "kfold_indices",
    "lasso_fit", "lasso_lambda_max", "lasso_objective", "naive_fit_predict", "soft_threshold",
    "supervised_pairs", "write_cv_table",
]
