from .vocab import PAD, RESERVED, Vocab
from .stopwords import BUNDLED_STOPWORDS, bundled_stopwords, is_stopword, load_stopwords, tokenize
from .tasks import (
    ParallelCorpus,
    SentencePair,
    default_lexicon,
    generate,
    subset,
    swap_adjacent,
    transform,
)
from .io import read_corpus, read_lines, read_parallel, write_corpus, write_parallel
from .metrics import bleu, exact_match, occurrence_auc

__all__ = [
    "PAD",
    "RESERVED",
    "Vocab",
    "BUNDLED_STOPWORDS",
    "bundled_stopwords",
    "is_stopword",
    "load_stopwords",
    "tokenize",
    "ParallelCorpus",
    "SentencePair",
    "default_lexicon",
    "generate",
    "subset",
    "swap_adjacent",
    "transform",
    "read_corpus",
    "read_lines",
    "read_parallel",
    "write_corpus",
    "write_parallel",
    "bleu",
    "exact_match",
    "occurrence_auc",
]
