"""Command-line entry point.

Subcommands: ``train``, ``decode``, ``evaluate``, ``orderings``,
``attn-dump`` and ``generate``. Exit status is 0 on success, 2 for
configuration errors, 3 for data errors and 4 for numeric failures.
"""

import argparse
import csv
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, TextIO

import numpy as np

from .algorithms.ordering import (
    MAX_COUNTABLE_LENGTH,
    count_orderings,
    enumerate_orderings,
    format_trace,
    reform,
    sample_uniform_ordering,
)
from .config import STRATEGIES, Config, RunConfig
from .corpus import (
    ParallelCorpus,
    bleu,
    bundled_stopwords,
    exact_match,
    generate,
    load_stopwords,
    read_corpus,
    read_lines,
    tokenize,
    write_corpus,
)
from .errors import ConfigError, DataError, InvalidOrderingError, NumericError, SpiralError
from .inference import SpiralInference, Translation, write_attention_csv

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4

# argparse dest -> RunConfig field
OVERRIDES = {
    "seed": "seed",
    "strategy": "strategy",
    "steps": "steps",
    "stage_boundary": "stage_boundary",
    "top_k": "top_k",
    "data_fraction": "data_fraction",
    "beam": "beam",
    "alpha": "alpha",
    "start": "start",
    "start_prob_one": "start_prob_one",
    "l2r_forced": "l2r_forced",
    "r2l_forced": "r2l_forced",
    "threads": "threads",
    "checkpoint": "checkpoint",
    "metrics_out": "metrics_out",
    "corpus": "corpus",
    "stopwords": "stopwords",
}


def _config_parent() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(add_help=False)
    group = parser.add_argument_group("configuration")
    group.add_argument("--config", help=f"preset name ({', '.join(Config.names())}) or TOML file")
    group.add_argument("--seed", type=int, help="random seed (falls back to $SLM_SEED)")
    group.add_argument("--corpus", help="directory with train/dev/test .src/.tgt files")
    group.add_argument("--stopwords", help="stop-word file, one token per line")
    group.add_argument("--checkpoint", help="checkpoint path")
    return parser


def _decode_parent() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(add_help=False)
    group = parser.add_argument_group("decoding")
    group.add_argument("--beam", type=int, help="beam size")
    group.add_argument("--alpha", type=float, help="length penalty exponent")
    group.add_argument("--start", help='force the start token(s), e.g. --start "digital media"')
    group.add_argument(
        "--start-prob-one",
        action="store_const",
        const=True,
        help="score a forced start with probability one",
    )
    group.add_argument(
        "--l2r-forced", action="store_const", const=True, help="decode left to right from [EOL]"
    )
    group.add_argument(
        "--r2l-forced", action="store_const", const=True, help="decode right to left from [EOR]"
    )
    group.add_argument("--threads", type=int, help="decode sentences in parallel")
    group.add_argument("--greedy", action="store_true", help="use the single-path search")
    return parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spirallm", description="Spiral-order translation: train, decode and inspect."
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)
    config, decoding = _config_parent(), _decode_parent()

    train = sub.add_parser("train", parents=[config, decoding], help="train a model")
    train.add_argument("--strategy", choices=STRATEGIES)
    train.add_argument("--steps", type=int)
    train.add_argument("--stage-boundary", type=float)
    train.add_argument("--top-k", type=int)
    train.add_argument("--data-fraction", type=float)
    train.add_argument("--metrics-out", help="metrics CSV path")
    train.add_argument("--no-progress", action="store_true", help="hide the progress bar")
    train.set_defaults(handler=cmd_train)

    dec = sub.add_parser("decode", parents=[config, decoding], help="translate lines of a file")
    dec.add_argument("input", help="source file, one sentence per line ('-' for stdin)")
    dec.add_argument("--output", help="write here instead of stdout")
    dec.add_argument("--emit-order", action="store_true", help="print the generation trace")
    dec.add_argument("--emit-score", action="store_true", help="print the penalised score")
    dec.set_defaults(handler=cmd_decode)

    ev = sub.add_parser("evaluate", parents=[config, decoding], help="corpus BLEU on a split")
    ev.add_argument("--split", choices=("train", "dev", "test"), default="test")
    ev.add_argument("--hypotheses", help="score this file instead of decoding")
    ev.add_argument("--report", default="evaluation.csv", help="per-sentence report CSV")
    ev.set_defaults(handler=cmd_evaluate)

    orders = sub.add_parser("orderings", help="count, list or sample generation orderings")
    orders.add_argument("length", type=int, help="number of tokens T")
    orders.add_argument("--enumerate", action="store_true", help="list every ordering")
    orders.add_argument("--sample", type=int, metavar="N", help="draw N uniform orderings")
    orders.add_argument("--seed", type=int, default=0)
    orders.set_defaults(handler=cmd_orderings)

    attn = sub.add_parser("attn-dump", parents=[config], help="start-head attention map CSV")
    attn.add_argument("input", help="source file, one sentence per line")
    attn.add_argument("--output", default="attention.csv")
    attn.add_argument("--threshold", type=float, default=0.0, help="drop entries below this")
    attn.set_defaults(handler=cmd_attn_dump)

    gen = sub.add_parser("generate", parents=[config], help="write a synthetic corpus")
    gen.add_argument("output", help="target directory")
    gen.set_defaults(handler=cmd_generate)
    return parser


def resolve_config(args: argparse.Namespace, environ=None) -> RunConfig:
    overrides: Dict[str, Any] = {}
    for dest, field in OVERRIDES.items():
        value = getattr(args, dest, None)
        if value is not None:
            overrides[field] = value
    return Config.resolve(getattr(args, "config", None), overrides, environ)


def load_corpus(config: RunConfig) -> ParallelCorpus:
    if config.corpus:
        return read_corpus(config.corpus)
    return generate(config.to_task_spec())


def load_stopword_list(config: RunConfig):
    if not config.stopwords:
        return bundled_stopwords()
    try:
        return load_stopwords(config.stopwords)
    except OSError as e:
        raise DataError(f"cannot read stop words {config.stopwords}: {e}") from e


def load_inference(config: RunConfig) -> SpiralInference:
    path = Path(config.checkpoint)
    if not path.is_file():
        raise DataError(f"checkpoint {path} not found; run 'spirallm train' first")
    logger.debug("Loading checkpoint %s", path)
    extra = ()
    if config.stopwords:
        extra = load_stopword_list(config)
        logger.info("Adding %d stop words from %s to the checkpoint's list", len(extra), config.stopwords)
    return SpiralInference.load(path, config.to_beam_config(), extra)


def _input_lines(path: str) -> List[str]:
    if path == "-":
        return sys.stdin.read().splitlines()
    return read_lines(path)


def cmd_train(args: argparse.Namespace, out: TextIO) -> int:
    from .trainers import SpiralTrainer

    config = resolve_config(args)
    trainer = SpiralTrainer(config, load_corpus(config), load_stopword_list(config))
    rows = trainer.train(progress=not args.no_progress)
    last = rows[-1] if rows else None
    if last and last["dev_bleu"] is not None:
        print(f"final dev BLEU {100 * last['dev_bleu']:.2f}", file=out)
    print(f"checkpoint written to {config.checkpoint}", file=out)
    return EXIT_OK


def format_translation(t: Translation, emit_order: bool, emit_score: bool) -> str:
    lines = [t.text]
    if t.error is not None:
        lines.append(f"# error: {t.error}")
        return "\n".join(lines)
    if emit_order:
        lines.append(f"# order: {t.trace_text}")
    if emit_score:
        lines.append(f"# score: {t.score:.6f}")
    if t.truncated:
        lines.append("# truncated")
    return "\n".join(lines)


def cmd_decode(args: argparse.Namespace, out: TextIO) -> int:
    config = resolve_config(args)
    inference = load_inference(config)
    sources = _input_lines(args.input)
    cfg = inference.beam_config
    results = inference.translate_batch(sources, cfg, config.threads, greedy=args.greedy)

    text = "".join(format_translation(t, args.emit_order, args.emit_score) + "\n" for t in results)
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
    else:
        out.write(text)
    failed = sum(t.error is not None for t in results)
    if failed:
        logger.warning("%d of %d lines could not be decoded", failed, len(results))
    return EXIT_OK


def write_report(path: str, rows: Sequence[Sequence[Any]]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(("index", "bleu", "exact", "hypothesis", "reference"))
        writer.writerows(rows)


def cmd_evaluate(args: argparse.Namespace, out: TextIO) -> int:
    config = resolve_config(args)
    pairs = getattr(load_corpus(config), args.split)
    if not pairs:
        raise DataError(f"split {args.split!r} is empty")
    references = [list(p.target) for p in pairs]

    if args.hypotheses:
        candidates = [tokenize(line) for line in read_lines(args.hypotheses)]
        if len(candidates) != len(references):
            raise DataError(
                f"{args.hypotheses} has {len(candidates)} lines, {args.split} has {len(references)}"
            )
        corpus_bleu = bleu(candidates, references)
        accuracy = exact_match(candidates, references)
        per_sentence = [
            bleu([c], [r]) if r and c else float(c == r) for c, r in zip(candidates, references)
        ]
    else:
        inference = load_inference(config)
        report = inference.evaluate(pairs, inference.beam_config, config.threads, args.greedy)
        candidates = [h.tokens for h in report.hypotheses]
        corpus_bleu, accuracy, per_sentence = report.bleu, report.exact_match, report.sentence_bleu

    write_report(
        args.report,
        [
            (i, f"{100 * b:.2f}", int(c == r), " ".join(c), " ".join(r))
            for i, (b, c, r) in enumerate(zip(per_sentence, candidates, references))
        ],
    )
    print(f"BLEU {100 * corpus_bleu:.2f}", file=out)
    print(f"exact match {100 * accuracy:.2f}", file=out)
    return EXIT_OK


def _position_trace(z, T: int) -> str:
    return format_trace(reform([str(i) for i in range(1, T + 1)], z))


def cmd_orderings(args: argparse.Namespace, out: TextIO) -> int:
    T = args.length
    if T > MAX_COUNTABLE_LENGTH:
        print(f"2^{T + 1}", file=out)
    else:
        print(count_orderings(T), file=out)
    if args.enumerate:
        for z in sorted(enumerate_orderings(T), key=lambda o: o.z):
            print(_position_trace(z, T), file=out)
    if args.sample:
        if args.sample < 0:
            raise InvalidOrderingError(f"--sample must be >= 0, got {args.sample}")
        rng = np.random.default_rng(args.seed)
        for _ in range(args.sample):
            print(_position_trace(sample_uniform_ordering(T, rng), T), file=out)
    return EXIT_OK


def cmd_attn_dump(args: argparse.Namespace, out: TextIO) -> int:
    config = resolve_config(args)
    inference = load_inference(config)
    rows = []
    for line in read_lines(args.input):
        if line.strip():
            rows.extend(inference.attention_rows(line, args.threshold))
    path = write_attention_csv(args.output, rows)
    print(f"{len(rows)} rows written to {path}", file=out)
    return EXIT_OK


def cmd_generate(args: argparse.Namespace, out: TextIO) -> int:
    config = resolve_config(args)
    corpus = generate(config.to_task_spec())
    path = write_corpus(args.output, corpus)
    sizes = ", ".join(f"{name} {len(pairs)}" for name, pairs in corpus.splits())
    print(f"{config.task} corpus written to {path} ({sizes})", file=out)
    return EXIT_OK


def exit_code(error: BaseException) -> int:
    if isinstance(error, (ConfigError, InvalidOrderingError)):
        return EXIT_CONFIG
    if isinstance(error, (DataError, OSError)):
        return EXIT_DATA
    if isinstance(error, NumericError):
        return EXIT_NUMERIC
    return EXIT_FAILURE


def main(argv: Optional[Sequence[str]] = None, out: TextIO = None) -> int:
    out = out or sys.stdout
    args = build_parser().parse_args(argv)
    if args.verbose:
        logging.getLogger("spirallm").setLevel(logging.DEBUG)
    try:
        return args.handler(args, out)
    except (SpiralError, OSError) as e:
        logger.error("%s", e)
        print(f"error: {e}", file=sys.stderr)
        return exit_code(e)


if __name__ == "__main__":
    sys.exit(main())
