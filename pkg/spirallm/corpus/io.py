import logging
from pathlib import Path
from typing import List, Sequence, Union

from ..errors import DataError
from .stopwords import load_stopwords, tokenize
from .tasks import SPLITS, ParallelCorpus, SentencePair

logger = logging.getLogger(__name__)


def read_lines(path: Union[str, Path]) -> List[str]:
    path = Path(path)
    try:
        return path.read_text(encoding="utf-8").splitlines()
    except OSError as e:
        raise DataError(f"cannot read {path}: {e}") from e
    except UnicodeDecodeError as e:
        raise DataError(f"{path} is not UTF-8: {e}") from e


def read_parallel(prefix: Union[str, Path]) -> List[SentencePair]:
    """Read ``<prefix>.src`` and ``<prefix>.tgt`` line by line."""
    prefix = Path(prefix)
    src = read_lines(prefix.with_name(prefix.name + ".src"))
    tgt = read_lines(prefix.with_name(prefix.name + ".tgt"))
    if len(src) != len(tgt):
        raise DataError(f"{prefix}: {len(src)} source lines but {len(tgt)} target lines")
    pairs = []
    for lineno, (s, t) in enumerate(zip(src, tgt), start=1):
        source = tuple(tokenize(s))
        if not source:
            raise DataError(f"{prefix}.src line {lineno} is empty")
        pairs.append(SentencePair(source, tuple(tokenize(t))))
    return pairs


def write_parallel(prefix: Union[str, Path], pairs: Sequence[SentencePair]) -> None:
    prefix = Path(prefix)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    for side, suffix in ((0, ".src"), (1, ".tgt")):
        lines = [" ".join(pair[side]) for pair in pairs]
        prefix.with_name(prefix.name + suffix).write_text(
            "".join(line + "\n" for line in lines), encoding="utf-8"
        )


def read_corpus(directory: Union[str, Path]) -> ParallelCorpus:
    """Read ``train``, ``dev`` and ``test`` pairs plus an optional ``stopwords.txt``.

    Missing dev/test splits are empty.
    """
    directory = Path(directory)
    if not (directory / "train.src").is_file():
        raise DataError(f"no train.src under {directory}")
    splits = {}
    for name in SPLITS:
        if name == "train" or (directory / f"{name}.src").is_file():
            splits[name] = read_parallel(directory / name)
        else:
            splits[name] = []
    stopwords = ()
    if (directory / "stopwords.txt").is_file():
        stopwords = tuple(sorted(load_stopwords(directory / "stopwords.txt")))
    logger.debug("Read corpus %s: %s", directory, {k: len(v) for k, v in splits.items()})
    return ParallelCorpus(**splits, stopwords=stopwords)


def write_corpus(directory: Union[str, Path], corpus: ParallelCorpus) -> Path:
    directory = Path(directory)
    for name, pairs in corpus.splits():
        write_parallel(directory / name, pairs)
    if corpus.stopwords:
        (directory / "stopwords.txt").write_text(
            "".join(w + "\n" for w in corpus.stopwords), encoding="utf-8"
        )
    return directory
