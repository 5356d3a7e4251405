import logging
from functools import lru_cache
from pathlib import Path
from typing import FrozenSet, List, Optional, Union

from tokenizers.pre_tokenizers import WhitespaceSplit

logger = logging.getLogger(__name__)

BUNDLED_STOPWORDS = Path(__file__).parent / "stopwords_en.txt"

_splitter = WhitespaceSplit()


def tokenize(line: str) -> List[str]:
    """Split on whitespace only; punctuation and clitics stay attached."""
    return [piece for piece, _ in _splitter.pre_tokenize_str(line)]


def load_stopwords(path: Optional[Union[str, Path]] = None) -> FrozenSet[str]:
    """Read a stop-word file: one token per line, ``#`` starts a comment.

    Entries are lowercased and deduplicated. Without ``path`` the bundled
    English list is used.

    Raises:
        OSError: when the file cannot be read.
    """
    path = Path(path) if path is not None else BUNDLED_STOPWORDS
    logger.debug("Loading stop words from %s", path)
    words = set()
    with path.open(encoding="utf-8") as f:
        for line in f:
            entry = line.split("#", 1)[0].strip()
            if entry:
                words.add(entry.lower())
    return frozenset(words)


@lru_cache(maxsize=1)
def bundled_stopwords() -> FrozenSet[str]:
    return load_stopwords(BUNDLED_STOPWORDS)


def is_stopword(token: str, stopwords: FrozenSet[str]) -> bool:
    return token.lower() in stopwords
