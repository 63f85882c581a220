"""metatune: unify classification datasets into Yes/No QA, train scorers on
unseen-task splits, and compare them with per-description AUC statistics."""

__version__ = "0.1.0"

from .corpus import (
    Corpus,
    CorpusError,
    Dataset,
    Example,
    Label,
    LabelDescription,
    QAInstance,
    load_corpus,
    to_qa_instances,
    validate_corpus,
    write_corpus,
)
from .grouping import Group, SplitPlan, group_by_tags, make_splits
from .metrics import (
    DeltaStats,
    DescriptionAUC,
    ScoreRow,
    ScoreTable,
    Verdict,
    accuracy,
    auc_roc,
    delta_stats,
    description_aucs,
    ensemble_descriptions,
    eval_descriptions,
    kendall_tau,
    relative_auc_curve,
    resolve_label,
    scatter_data,
    verdict,
    weighted_f1,
)
from .sampler import Sampler, SamplerError, new_sampler
from .scorers import (
    NativeScorer,
    OverlapScorer,
    Scorer,
    ScorerError,
    TrainRunConfig,
    run_meta_tuning,
)
from .synth import SynthConfig, generate_synthetic_corpus, load_synth_config
