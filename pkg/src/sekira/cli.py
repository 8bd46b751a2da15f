"""Command-line front end: train, eval, and tag subcommands.

Exit codes: 0 success, 1 usage error (bad flags), 2 data or model error
(unreadable corpus, malformed checkpoint, tagset mismatch). Reports go to
stdout, progress logs to stderr.
"""

import argparse
import os
import sys

from .checkpoint import load_checkpoint, save_checkpoint
from .corpus import LabeledSentence, parse_column_file, write_column_file
from .errors import DataError
from .metrics import confusion, evaluate, format_confusion, format_report
from .training import TrainConfig, model_from_checkpoint, train


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage errors; this tool reserves 2 for data
    # errors, so remap to 1
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser():
    parser = _Parser(prog="sekira", description="Bi-LSTM + CRF sequence tagger")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    p_train = sub.add_parser("train", help="train a model and save a checkpoint")
    p_train.add_argument("--train", required=True, metavar="PATH", help="training corpus")
    p_train.add_argument("--valid", required=True, metavar="PATH", help="validation corpus")
    p_train.add_argument("--test", metavar="PATH", help="optional held-out test corpus")
    p_train.add_argument("--out", required=True, metavar="PATH", help="checkpoint output path")
    p_train.add_argument("--embeddings", metavar="PATH", help="pretrained word vectors (text format)")
    p_train.add_argument("--seed", type=int, default=0, metavar="N")
    p_train.add_argument("--lr", type=float, default=0.005, metavar="F")
    p_train.add_argument("--dropout", type=float, default=0.5, metavar="F")
    p_train.add_argument("--epochs", type=int, default=100, metavar="N")
    p_train.add_argument("--char-dim", type=int, default=25, metavar="N")
    p_train.add_argument("--word-dim", type=int, default=100, metavar="N")
    p_train.add_argument("--hidden", type=int, default=100, metavar="N",
                         help="word-level LSTM hidden size")
    p_train.add_argument("--char-hidden", type=int, default=25, metavar="N",
                         help="char-level LSTM hidden size")
    p_train.add_argument("--char-highway", action="store_true",
                         help="highway layer on the char-level word vector")
    p_train.add_argument("--word-highway", action="store_true",
                         help="gated word-level Bi-LSTM (needs 2*char-hidden+word-dim == hidden)")
    p_train.add_argument("--constrain-transitions", action="store_true",
                         help="forbid IOB-invalid tag bigrams in the CRF")
    p_train.add_argument("--freeze-embeddings", action="store_true",
                         help="do not fine-tune word embedding rows")
    p_train.add_argument("--clip", type=float, default=5.0, metavar="F",
                         help="gradient clipping threshold (0 disables)")
    p_train.add_argument("--decoder", choices=["crf", "softmax"], default="crf",
                         help="sequence decoder (softmax is a per-token baseline)")
    p_train.add_argument("--min-count", type=int, default=1, metavar="N",
                         help="minimum token frequency for the word vocabulary")
    p_train.add_argument("--lr-decay", type=float, default=0.0, metavar="F",
                         help="inverse-time learning-rate decay per epoch")
    p_train.add_argument("--report-dir", metavar="DIR",
                         help="write history/report tables and figures here")
    p_train.set_defaults(func=cmd_train)

    p_eval = sub.add_parser("eval", help="score a checkpoint against a labeled corpus")
    p_eval.add_argument("--model", required=True, metavar="PATH")
    p_eval.add_argument("--data", required=True, metavar="PATH")
    p_eval.add_argument("--confusion", action="store_true", help="also print a confusion table")
    p_eval.add_argument("--report-dir", metavar="DIR",
                        help="write report tables and figures here")
    p_eval.set_defaults(func=cmd_eval)

    p_tag = sub.add_parser("tag", help="tag token-per-line text from a file or stdin")
    p_tag.add_argument("--model", required=True, metavar="PATH")
    p_tag.add_argument("--input", metavar="PATH", help="token-per-line input (default stdin)")
    p_tag.set_defaults(func=cmd_tag)
    return parser


def _log(message):
    print(message, file=sys.stderr)


def _read_dataset(path):
    with open(path, encoding="utf-8") as stream:
        return parse_column_file(stream)


def _config_from_args(args):
    return TrainConfig(
        lr=args.lr,
        dropout=args.dropout,
        epochs=args.epochs,
        seed=args.seed,
        clip_norm=args.clip,
        char_dim=args.char_dim,
        word_dim=args.word_dim,
        char_hidden=args.char_hidden,
        word_hidden=args.hidden,
        use_char_highway=args.char_highway,
        use_word_highway=args.word_highway,
        constrain_transitions=args.constrain_transitions,
        freeze_embeddings=args.freeze_embeddings,
        embeddings=args.embeddings,
        decoder=args.decoder,
        min_count=args.min_count,
        lr_decay=args.lr_decay,
    )


def cmd_train(args, parser):
    try:
        config = _config_from_args(args)
    except ValueError as exc:
        parser.error(str(exc))
    train_ds = _read_dataset(args.train)
    valid_ds = _read_dataset(args.valid)
    test_ds = _read_dataset(args.test) if args.test else None

    ckpt, history = train(config, train_ds, valid_ds, log=_log)
    with open(args.out, "w", encoding="utf-8") as sink:
        save_checkpoint(ckpt, sink)
    _log(f"checkpoint written to {args.out}")

    model = model_from_checkpoint(ckpt)
    valid_report = evaluate(valid_ds.sentences, model.decode_dataset(valid_ds))
    print("== validation ==")
    print(format_report(valid_report), end="")
    test_report = None
    if test_ds is not None:
        test_report = evaluate(test_ds.sentences, model.decode_dataset(test_ds))
        print("== test ==")
        print(format_report(test_report), end="")

    if args.report_dir:
        from . import report as report_mod

        os.makedirs(args.report_dir, exist_ok=True)
        report_mod.write_history_tsv(history, os.path.join(args.report_dir, "history.tsv"))
        report_mod.save_training_curves(history, os.path.join(args.report_dir, "training_curves.png"))
        report_mod.write_report_tsv(valid_report, os.path.join(args.report_dir, "valid_report.tsv"))
        if test_report is not None:
            report_mod.write_report_tsv(test_report, os.path.join(args.report_dir, "test_report.tsv"))
        _log(f"reports written to {args.report_dir}")
    return 0


def _load_model(path):
    with open(path, encoding="utf-8") as stream:
        ckpt = load_checkpoint(stream)
    return ckpt, model_from_checkpoint(ckpt)


def cmd_eval(args, parser):
    ckpt, model = _load_model(args.model)
    dataset = _read_dataset(args.data)
    if not dataset.sentences:
        raise DataError(f"{args.data}: dataset is empty")
    missing = [t for t in dataset.tagset if t not in ckpt.tagset]
    if missing:
        raise DataError(f"tags absent from the model's tagset: {', '.join(missing)}")
    predicted = model.decode_dataset(dataset)
    report = evaluate(dataset.sentences, predicted)
    print(format_report(report), end="")
    cm = confusion(dataset.sentences, predicted)
    if args.confusion:
        print(format_confusion(cm), end="")
    if args.report_dir:
        from . import report as report_mod

        os.makedirs(args.report_dir, exist_ok=True)
        report_mod.write_report_tsv(report, os.path.join(args.report_dir, "report.tsv"))
        report_mod.write_confusion_tsv(cm, os.path.join(args.report_dir, "confusion.tsv"))
        report_mod.save_confusion_heatmap(cm, os.path.join(args.report_dir, "confusion_heatmap.png"))
        _log(f"reports written to {args.report_dir}")
    return 0


def _read_token_sentences(stream):
    """Token-per-line sentences separated by blank lines."""
    sentences = []
    current = []
    for lineno, raw in enumerate(stream, start=1):
        line = raw.rstrip("\r\n")
        if not line.strip():
            if current:
                sentences.append(current)
                current = []
            continue
        fields = line.split()
        if len(fields) != 1:
            raise DataError(f"line {lineno}: expected one token per line, got {line!r}")
        current.append(fields[0])
    if current:
        sentences.append(current)
    return sentences


def cmd_tag(args, parser):
    _, model = _load_model(args.model)
    if args.input:
        with open(args.input, encoding="utf-8") as stream:
            sentences = _read_token_sentences(stream)
    else:
        sentences = _read_token_sentences(sys.stdin)
    tagged = [
        LabeledSentence(tokens=tokens, tags=model.decode(tokens)) for tokens in sentences
    ]
    if tagged:
        write_column_file(tagged, sys.stdout)
    return 0


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args, parser)
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
