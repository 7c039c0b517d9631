from __future__ import annotations

from typing import Mapping, Sequence

import numpy as np

from ..errors import ModelError
from ..ingest import N_DIMENSIONS
from .features import FeatureTable


def naive_fit_predict(tables: Mapping[int, FeatureTable], training_years: Sequence[int],
                      test_fsas: Sequence[str]) -> np.ndarray:
    """Per-FSA mean of the scene block over the training years."""
    years = sorted(set(training_years))
    if not years:
        raise ModelError("naive baseline needs at least one training year")
    missing = [y for y in years if y not in tables]
    if missing:
        raise ModelError(f"no feature table for years {missing}")
    return np.mean([tables[y].rows(test_fsas)[:, :N_DIMENSIONS] for y in years], axis=0)
