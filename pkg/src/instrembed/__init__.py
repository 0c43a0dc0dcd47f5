"""Task-centric instruction embeddings: benchmark construction, contrastive
projection training, clustering evaluation, and embedding-driven selection."""

__version__ = "0.1.0"

from .corpus import (
    Corpus,
    Instruction,
    TaskLabel,
    load_corpus,
    make_splits,
    save_corpus,
)
from .embstore import (
    EmbeddingMatrix,
    FallbackEmbedderConfig,
    cosine,
    fallback_embed,
    read_embeddings,
    write_embeddings,
)
from .labeler import (
    Lexicon,
    LexiconEntry,
    MergePolicy,
    SynonymTable,
    default_lexicon,
    default_synonyms,
    filter_rare_categories,
    label_corpus,
    label_instruction,
    lemmatize_verb,
    merge_categories,
    singularize_noun,
)
from .pairgen import (
    IISPair,
    TriplePair,
    attach_hard_negatives,
    build_iis_set,
    sample_positive_pairs,
)
from .trainer import (
    HeadGradients,
    PairBatch,
    ProjectionHead,
    TrainConfig,
    apply_head,
    infonce_loss,
    load_head,
    loss_gradient,
    save_head,
    train_head,
)
from .evaluation import (
    ClusterAssignment,
    MetricsReport,
    adjusted_rand_index,
    clustering_purity,
    homogeneity,
    kmeans,
    pca2d,
    run_ict,
    run_iis,
    silhouette,
    spearman,
)
from .downstream import (
    CorrelationMatrix,
    SelectionResult,
    assemble_icl_prompt,
    correlation_matrix,
    dataset_correlation,
    estimation_error,
    retrieve_demonstrations,
    select_for_tuning,
    tiny_benchmark,
    tiny_benchmark_study,
)

__all__ = [name for name in dir() if not name.startswith("_")]
