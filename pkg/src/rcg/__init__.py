"""Retrieval-augmented code review comment generation toolkit."""

from .corpus import (
    Corpus,
    FrequencyTable,
    ReviewExample,
    build_frequency_table,
    frequency_bucket_stats,
    load_corpus,
)
from .encoder import (
    BowEncoder,
    Embedding,
    EncoderDescriptor,
    PrecomputedEncoder,
    RemoteEncoder,
    build_bow_encoder,
    inner_product,
    load_precomputed_encoder,
    remote_encoder,
)
from .evaluation import (
    BleuReport,
    EvalReport,
    LfgtReport,
    bleu4,
    build_eval_report,
    corpus_bleu4,
    exact_match,
    lfgt_analysis,
    length_bucket_report,
    mean_sentence_bleu4,
)
from .generate import (
    GenerationOutput,
    GenerationRequest,
    ir_passthrough,
    mock_generate,
    remote_generate,
)
from .index import (
    Exemplar,
    RetrievalDatabase,
    RetrievalResult,
    build_index,
    load_index,
    retrieve,
    retrieve_for_training,
    save_index,
)
from .prompt import Prompt, build_prompt, sweep_prompts
from .tokenizer import count_tokens, tokenize

__version__ = "0.1.0"
