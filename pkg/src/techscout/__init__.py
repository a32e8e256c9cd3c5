"""Patent trend analytics: label, topic-model, cross-map, and flag growth.

The package turns a patent corpus into a ranked list of technology
opportunities: documents are labeled from classifier scores, grouped into
topics, cross-tabulated by label and filing year, and each cell's yearly
series is tested for a significant upward trend.
"""

from .corpus import Corpus, PatentRecord, load_records
from .labeling import (
    ERROR_LABEL,
    DEFAULT_LABELS,
    LabelResult,
    LabelSet,
    assign_label,
    classify_corpus,
    label_distribution,
    softmax,
)
from .topics import TopicConfig, TopicModel, fit_topic_model, topic_shares
from .trend import (
    CrossMap,
    Opportunity,
    TrendStat,
    compute_trends,
    cross_map,
    discover_opportunities,
    ols_slope,
    test_trend,
)
from .naming import name_topics, render_few_shot_prompt, render_naming_prompt
from .config import RunConfig
from .pipeline import run_pipeline, run_stage

__version__ = "0.1.0"

__all__ = [
    "Corpus",
    "CrossMap",
    "DEFAULT_LABELS",
    "ERROR_LABEL",
    "LabelResult",
    "LabelSet",
    "Opportunity",
    "PatentRecord",
    "RunConfig",
    "TopicConfig",
    "TopicModel",
    "TrendStat",
    "assign_label",
    "classify_corpus",
    "compute_trends",
    "cross_map",
    "discover_opportunities",
    "fit_topic_model",
    "label_distribution",
    "load_records",
    "name_topics",
    "ols_slope",
    "render_few_shot_prompt",
    "render_naming_prompt",
    "run_pipeline",
    "run_stage",
    "softmax",
    "test_trend",
    "topic_shares",
    "__version__",
]
