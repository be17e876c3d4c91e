"""Batch command-line surface for the toolkit.

Subcommands: ``align`` (edit scripts + corpus TER), ``tag`` (reference
tag files), ``convert-tags`` (word/subword tag conversion), ``eval``
(MCC and F1), ``synth`` (triplet synthesis), ``levt`` (edit decoding and
single-pass QE tagging).

All files are UTF-8, one whitespace-tokenized segment per line (a
trailing CR is tolerated). Tag files hold 2J+1 OK/BAD tokens per line in
the flat gap/word/.../gap layout. Exit codes: 0 success, 1 usage or I/O
error, 2 data-format violation, 3 plug-in protocol violation. The
``LEVQE_LOG`` environment variable sets log verbosity only; everything
that affects output is a flag or config entry.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Callable, Optional, Sequence

from .alignment import DEL, INS, MATCH, SHIFT, SUB, EditScript, ter_align, ter_score
from .levt import (
    CommandScorer,
    MalformedDistributionError,
    OracleScorer,
    RandomScorer,
    Scorer,
    ScorerProtocolError,
    decode,
    qe_predict,
)
from .subword import heuristic_subword_tags, parse_subwords, subword_to_word_tags
from .synth import (
    CommandTranslator,
    EnsembleWeights,
    IdentityTranslator,
    SequenceModel,
    SynthResult,
    TableSequenceModel,
    TableTranslator,
    Translator,
    synth_bt_rt_tgt,
    synth_mvppe,
    synth_src_mt1_mt2,
    synth_src_mt_ref,
)
from .tags import (
    OK,
    BAD,
    f1_per_class,
    flatten_tags,
    mcc,
    pool_confusion,
    tags_from_alignment,
    unflatten_tags,
)

EXIT_OK = 0
EXIT_USAGE_IO = 1
EXIT_DATA_FORMAT = 2
EXIT_PROTOCOL = 3

_OP_LETTER = {MATCH: "M", SUB: "S", DEL: "D", INS: "I"}


class CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise CliError(EXIT_USAGE_IO, message)


def _read_raw_lines(path: str) -> list[str]:
    try:
        with open(path, encoding="utf-8") as handle:
            return handle.read().splitlines()
    except OSError as exc:
        raise CliError(EXIT_USAGE_IO, f"cannot read {path}: {exc}") from exc


def _read_token_lines(path: str) -> list[list[str]]:
    return [line.split() for line in _read_raw_lines(path)]


def _read_tag_lines(path: str) -> list[list[str]]:
    lines = _read_token_lines(path)
    for i, tags in enumerate(lines, start=1):
        if len(tags) % 2 == 0:
            raise CliError(EXIT_DATA_FORMAT, f"{path} line {i}: even tag count {len(tags)}")
        for tag in tags:
            if tag not in (OK, BAD):
                raise CliError(EXIT_DATA_FORMAT, f"{path} line {i}: unknown tag {tag!r}")
    return lines


def _require_aligned(a: list, b: list, a_path: str, b_path: str) -> None:
    if len(a) != len(b):
        raise CliError(
            EXIT_DATA_FORMAT,
            f"line count mismatch: {a_path} has {len(a)} lines, {b_path} has {len(b)}",
        )


def _write_lines(path: Optional[str], lines: Sequence[str]) -> None:
    text = "".join(line + "\n" for line in lines)
    if path is None:
        sys.stdout.write(text)
    else:
        try:
            Path(path).write_text(text, encoding="utf-8")
        except OSError as exc:
            raise CliError(EXIT_USAGE_IO, f"cannot write {path}: {exc}") from exc


def _map_chunks(worker: Callable, payloads: Sequence, workers: int) -> list:
    """Run one payload per worker process, merging results in order.

    The parent stays the single writer; worker count never changes any
    output byte, only wall time.
    """
    if workers <= 1 or len(payloads) <= 1:
        return [worker(payload) for payload in payloads]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(worker, payloads))


def _chunked(items: Sequence, workers: int) -> list:
    size = max(1, -(-len(items) // max(workers, 1)))
    return [items[i : i + size] for i in range(0, len(items), size)]


def _tag_chunk(pairs: list) -> list[str]:
    # Raw text pairs; tokenizing here keeps cross-process payloads small.
    out = []
    for mt_line, pe_line in pairs:
        mt = mt_line.split()
        script = ter_align(mt, pe_line.split(), allow_shifts=False)
        out.append(" ".join(flatten_tags(tags_from_alignment(script, len(mt)))))
    return out


def _align_chunk(payload: tuple) -> tuple[list[str], int, int]:
    offset, pairs, allow_shifts = payload
    lines = []
    edits = 0
    ref_tokens = 0
    for i, (mt_line, pe_line) in enumerate(pairs, start=offset):
        pe = pe_line.split()
        script = ter_align(mt_line.split(), pe, allow_shifts=allow_shifts)
        edits += script.cost
        ref_tokens += len(pe)
        lines.append(f"{i}\tcost={script.cost}\tops={_render_script(script)}")
    return lines, edits, ref_tokens


def _append_json(path: Optional[str], record: dict) -> None:
    if path is None:
        return
    try:
        with open(path, "a", encoding="utf-8") as handle:
            handle.write(json.dumps(record, ensure_ascii=False) + "\n")
    except OSError as exc:
        raise CliError(EXIT_USAGE_IO, f"cannot write {path}: {exc}") from exc


def _render_script(script: EditScript) -> str:
    parts = []
    for op in script.ops:
        if op.kind == SHIFT:
            start, length, dest = op.shift_span
            parts.append(f"SH({start},{length}->{dest})")
        else:
            parts.append(_OP_LETTER[op.kind])
    return " ".join(parts)


def cmd_align(args) -> int:
    mt_lines = _read_raw_lines(args.mt)
    pe_lines = _read_raw_lines(args.pe)
    _require_aligned(mt_lines, pe_lines, args.mt, args.pe)
    allow_shifts = args.shifts == "on"

    chunks = _chunked(list(zip(mt_lines, pe_lines)), args.workers)
    payloads = []
    offset = 0
    for chunk in chunks:
        payloads.append((offset, chunk, allow_shifts))
        offset += len(chunk)
    out: list[str] = []
    edits = 0
    ref_tokens = 0
    for lines, chunk_edits, chunk_ref_tokens in _map_chunks(_align_chunk, payloads, args.workers):
        out.extend(lines)
        edits += chunk_edits
        ref_tokens += chunk_ref_tokens
    corpus_ter = edits / ref_tokens if ref_tokens else (0.0 if edits == 0 else float("inf"))
    out.append(f"corpus_ter={corpus_ter:.4f} edits={edits} ref_tokens={ref_tokens}")
    _write_lines(args.out, out)
    _append_json(
        args.json,
        {"command": "align", "corpus_ter": corpus_ter, "edits": edits, "ref_tokens": ref_tokens},
    )
    return EXIT_OK


def cmd_tag(args) -> int:
    mt_lines = _read_raw_lines(args.mt)
    pe_lines = _read_raw_lines(args.pe)
    _require_aligned(mt_lines, pe_lines, args.mt, args.pe)

    chunks = _chunked(list(zip(mt_lines, pe_lines)), args.workers)
    out: list[str] = []
    for lines in _map_chunks(_tag_chunk, chunks, args.workers):
        out.extend(lines)
    _write_lines(args.out, out)
    return EXIT_OK


def cmd_convert_tags(args) -> int:
    token_lines = _read_token_lines(args.tokens)
    tag_lines = _read_tag_lines(args.tags)
    _require_aligned(token_lines, tag_lines, args.tokens, args.tags)

    out = []
    if args.to == "word":
        for i, (tokens, tags) in enumerate(zip(token_lines, tag_lines), start=1):
            try:
                sw = parse_subwords(tokens, marker=args.marker)
                out.append(" ".join(subword_to_word_tags(sw, tags)))
            except ValueError as exc:
                raise CliError(EXIT_DATA_FORMAT, f"line {i}: {exc}") from exc
    else:
        if args.word_tags is None:
            raise CliError(EXIT_USAGE_IO, "--to subword requires --word-tags")
        word_tag_lines = _read_tag_lines(args.word_tags)
        _require_aligned(token_lines, word_tag_lines, args.tokens, args.word_tags)
        for i, (tokens, tags, word_tags) in enumerate(
            zip(token_lines, tag_lines, word_tag_lines), start=1
        ):
            try:
                sw = parse_subwords(tokens, marker=args.marker)
                out.append(" ".join(heuristic_subword_tags(sw, tags, word_tags)))
            except ValueError as exc:
                raise CliError(EXIT_DATA_FORMAT, f"line {i}: {exc}") from exc
    _write_lines(args.out, out)
    return EXIT_OK


def cmd_eval(args) -> int:
    pred_lines = _read_tag_lines(args.pred)
    gold_lines = _read_tag_lines(args.gold)
    _require_aligned(pred_lines, gold_lines, args.pred, args.gold)
    pred = [unflatten_tags(line) for line in pred_lines]
    gold = [unflatten_tags(line) for line in gold_lines]
    try:
        counts = pool_confusion(pred, gold, scope=args.scope)
        score = mcc(counts)
        f1_ok, f1_bad = f1_per_class(counts)
    except ValueError as exc:
        raise CliError(EXIT_DATA_FORMAT, str(exc)) from exc

    out = [
        f"scope={args.scope} n={counts.n} tp={counts.tp} fp={counts.fp} tn={counts.tn} fn={counts.fn}",
        f"mcc={score:.6f}",
        f"f1_ok={f1_ok:.6f}",
        f"f1_bad={f1_bad:.6f}",
    ]
    _write_lines(args.out, out)
    _append_json(
        args.json,
        {
            "command": "eval",
            "scope": args.scope,
            "n": counts.n,
            "tp": counts.tp,
            "fp": counts.fp,
            "tn": counts.tn,
            "fn": counts.fn,
            "mcc": score,
            "f1_ok": f1_ok,
            "f1_bad": f1_bad,
        },
    )
    return EXIT_OK


def _make_translator(spec: Optional[str], flag: str) -> Translator:
    if spec is None:
        raise CliError(EXIT_USAGE_IO, f"missing translator spec {flag}")
    if spec == "identity":
        return IdentityTranslator()
    if spec.startswith("table:"):
        path = spec[len("table:") :]
        table = {}
        try:
            with open(path, encoding="utf-8") as handle:
                for i, line in enumerate(handle, start=1):
                    line = line.rstrip("\n").rstrip("\r")
                    if not line:
                        continue
                    if "\t" not in line:
                        raise CliError(EXIT_DATA_FORMAT, f"{path} line {i}: expected input<TAB>output")
                    src, out = line.split("\t", 1)
                    table[" ".join(src.split())] = out
        except OSError as exc:
            raise CliError(EXIT_USAGE_IO, f"cannot read {path}: {exc}") from exc
        return TableTranslator(table, name=Path(path).name)
    if spec.startswith("command:"):
        return CommandTranslator(spec[len("command:") :])
    raise CliError(EXIT_USAGE_IO, f"unknown translator spec {spec!r} for {flag}")


def _make_model(spec: Optional[str], flag: str) -> SequenceModel:
    if spec is None:
        raise CliError(EXIT_USAGE_IO, f"missing model spec {flag}")
    if spec.startswith("table:"):
        path = spec[len("table:") :]
        try:
            payload = json.loads(Path(path).read_text(encoding="utf-8"))
        except OSError as exc:
            raise CliError(EXIT_USAGE_IO, f"cannot read {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise CliError(EXIT_DATA_FORMAT, f"{path}: invalid JSON: {exc}") from exc
        try:
            entries = {
                (entry["input"], entry["prefix"]): entry["dist"]
                for entry in payload.get("entries", [])
            }
        except (KeyError, TypeError) as exc:
            raise CliError(
                EXIT_DATA_FORMAT, f"{path}: entries need input/prefix/dist keys"
            ) from exc
        return TableSequenceModel(entries, payload.get("default"), name=Path(path).name)
    raise CliError(EXIT_USAGE_IO, f"unknown model spec {spec!r} for {flag}")


def cmd_synth(args) -> int:
    result: SynthResult
    translators: list[Translator] = []

    def translator(spec, flag):
        made = _make_translator(spec, flag)
        translators.append(made)
        return made

    try:
        if args.method == "src-mt-ref":
            src = _read_token_lines(_required(args.src, "--src"))
            ref = _read_token_lines(_required(args.ref, "--ref"))
            _require_aligned(src, ref, args.src, args.ref)
            result = synth_src_mt_ref(list(zip(src, ref)), translator(args.mt_system, "--mt-system"))
        elif args.method == "bt-rt-tgt":
            tgt = _read_token_lines(_required(args.tgt, "--tgt"))
            result = synth_bt_rt_tgt(
                tgt,
                translator(args.bt_system, "--bt-system"),
                translator(args.fwd_system, "--fwd-system"),
            )
        elif args.method == "src-mt1-mt2":
            src = _read_token_lines(_required(args.src, "--src"))
            result = synth_src_mt1_mt2(
                src,
                translator(args.weak_system, "--weak-system"),
                translator(args.strong_system, "--strong-system"),
            )
        else:  # mvppe
            src = _read_token_lines(_required(args.src, "--src"))
            tgt = _read_token_lines(_required(args.tgt, "--tgt"))
            _require_aligned(src, tgt, args.src, args.tgt)
            try:
                weights = EnsembleWeights(args.lambda_t, args.lambda_p)
            except ValueError as exc:
                raise CliError(EXIT_USAGE_IO, str(exc)) from exc
            try:
                result = synth_mvppe(
                    list(zip(src, tgt)),
                    _make_model(args.model_t, "--model-t"),
                    _make_model(args.model_p, "--model-p"),
                    translator(args.mt_system, "--mt-system"),
                    weights,
                    beam=args.beam,
                    max_len=args.max_len,
                    length_normalize=args.length_normalize,
                )
            except ValueError as exc:  # non-normalized model table
                raise CliError(EXIT_DATA_FORMAT, str(exc)) from exc
    finally:
        for made in translators:
            if isinstance(made, CommandTranslator):
                made.close()

    rows = [
        " ".join(rec.src) + "\t" + " ".join(rec.mt) + "\t" + " ".join(rec.pe)
        for rec in result.records
    ]
    _write_lines(args.out, rows)

    ters = [ter_score(rec.mt, rec.pe) for rec in result.records if rec.pe]
    mean_ter = sum(ters) / len(ters) if ters else 0.0
    summary = (
        f"method={args.method} records={len(result.records)} skipped={result.skipped} "
        f"removed_identical={result.removed_identical} mean_ter={mean_ter:.4f}"
    )
    print(summary, file=sys.stderr)
    _append_json(
        args.json,
        {
            "command": "synth",
            "method": args.method,
            "records": len(result.records),
            "skipped": result.skipped,
            "removed_identical": result.removed_identical,
            "mean_ter": mean_ter,
        },
    )
    return EXIT_OK


def _required(value, flag: str):
    if value is None:
        raise CliError(EXIT_USAGE_IO, f"missing required input {flag}")
    return value


class _ScorerProvider:
    """Per-sentence scorer lookup plus cleanup of any shared process."""

    def __init__(self, spec: str, seed: int):
        self._shared: Optional[Scorer] = None
        self._targets: Optional[list[list[str]]] = None
        if spec == "random":
            self._shared = RandomScorer(seed)
        elif spec.startswith("random:"):
            self._shared = RandomScorer(int(spec[len("random:") :]))
        elif spec.startswith("oracle:"):
            self._targets = _read_token_lines(spec[len("oracle:") :])
        elif spec.startswith("command:"):
            self._shared = CommandScorer(spec[len("command:") :])
        else:
            raise CliError(EXIT_USAGE_IO, f"unknown scorer spec {spec!r}")

    def get(self, i: int) -> Scorer:
        if self._shared is not None:
            return self._shared
        if i >= len(self._targets):
            raise CliError(EXIT_DATA_FORMAT, f"oracle target file has no line {i}")
        return OracleScorer(self._targets[i])

    def close(self) -> None:
        if isinstance(self._shared, CommandScorer):
            self._shared.close()


def cmd_levt(args) -> int:
    src_lines = _read_token_lines(_required(args.src, "--src"))
    provider = _ScorerProvider(args.scorer, args.seed)
    out = []
    try:
        if args.mode == "decode":
            if args.init is not None:
                init_lines = _read_token_lines(args.init)
                _require_aligned(src_lines, init_lines, args.src, args.init)
            else:
                init_lines = [[] for _ in src_lines]
            for i, (src, y0) in enumerate(zip(src_lines, init_lines)):
                final, trace = decode(src, y0, provider.get(i), max_iters=args.max_iters)
                out.append(" ".join(final) + "\t" + str(len(trace)))
        else:  # qe
            mt_lines = _read_token_lines(_required(args.mt, "--mt"))
            _require_aligned(src_lines, mt_lines, args.src, args.mt)
            for i, (src, mt) in enumerate(zip(src_lines, mt_lines)):
                tags = qe_predict(
                    src, mt, provider.get(i), tau=args.tau, insertion_view=args.insertion_view
                )
                out.append(" ".join(flatten_tags(tags)))
    except (ScorerProtocolError, MalformedDistributionError) as exc:
        raise CliError(EXIT_PROTOCOL, str(exc)) from exc
    finally:
        provider.close()
    _write_lines(args.out, out)
    return EXIT_OK


def build_parser(defaults: Optional[dict] = None) -> argparse.ArgumentParser:
    parser = _Parser(prog="levqe", description=__doc__.splitlines()[0])
    parser.add_argument("--config", help="JSON file whose keys preset any flag defaults")
    sub = parser.add_subparsers(dest="command", required=True)
    subparsers = []

    p = sub.add_parser("align", help="edit scripts and corpus TER")
    subparsers.append(p)
    p.add_argument("mt", help="hypothesis (MT) file")
    p.add_argument("pe", help="reference (post-edit) file")
    p.add_argument("--shifts", choices=["on", "off"], default="on")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out")
    p.add_argument("--json", help="append a machine-readable summary to this JSON-lines file")
    p.set_defaults(func=cmd_align)

    p = sub.add_parser("tag", help="reference tag file from MT and post-edit")
    subparsers.append(p)
    p.add_argument("mt")
    p.add_argument("pe")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out")
    p.set_defaults(func=cmd_tag)

    p = sub.add_parser("convert-tags", help="convert tags between word and subword level")
    subparsers.append(p)
    p.add_argument("--to", choices=["word", "subword"], required=True)
    p.add_argument("tokens", help="subword token file (continuation-marked)")
    p.add_argument("tags", help="tag file at subword level (naive tags for --to subword)")
    p.add_argument("--word-tags", help="word-level tag file (required for --to subword)")
    p.add_argument("--marker", default="@@")
    p.add_argument("--out")
    p.set_defaults(func=cmd_convert_tags)

    p = sub.add_parser("eval", help="MCC and per-class F1 between tag files")
    subparsers.append(p)
    p.add_argument("pred")
    p.add_argument("gold")
    p.add_argument("--scope", choices=["all", "words", "gaps"], default="all")
    p.add_argument("--out")
    p.add_argument("--json")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("synth", help="synthesize translation triplets")
    subparsers.append(p)
    p.add_argument(
        "--method",
        choices=["src-mt-ref", "bt-rt-tgt", "src-mt1-mt2", "mvppe"],
        required=True,
    )
    p.add_argument("--src")
    p.add_argument("--ref")
    p.add_argument("--tgt")
    p.add_argument("--mt-system")
    p.add_argument("--bt-system")
    p.add_argument("--fwd-system")
    p.add_argument("--weak-system")
    p.add_argument("--strong-system")
    p.add_argument("--model-t")
    p.add_argument("--model-p")
    p.add_argument("--lambda-t", type=float, default=2.0)
    p.add_argument("--lambda-p", type=float, default=1.0)
    p.add_argument("--beam", type=int, default=4)
    p.add_argument("--max-len", type=int, default=128)
    p.add_argument("--length-normalize", action="store_true")
    p.add_argument("--out")
    p.add_argument("--json")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("levt", help="edit decoding or single-pass QE tagging")
    subparsers.append(p)
    p.add_argument("--mode", choices=["decode", "qe"], required=True)
    p.add_argument("--src")
    p.add_argument("--mt")
    p.add_argument("--init", help="initial target-side sequences for decode (default empty)")
    p.add_argument("--scorer", required=True, help="oracle:<file> | random:<seed> | command:<cmd>")
    p.add_argument("--tau", type=float, default=0.5)
    p.add_argument(
        "--insertion-view", choices=["original", "post-deletion"], default="original"
    )
    p.add_argument("--max-iters", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_levt)

    if defaults:
        clean = {k: v for k, v in defaults.items() if k not in ("func", "command", "config")}
        parser.set_defaults(**clean)
        for sp in subparsers:
            sp.set_defaults(**clean)

    return parser


def _configure_logging() -> None:
    level_name = os.environ.get("LEVQE_LOG", "warning").upper()
    level = getattr(logging, level_name, logging.WARNING)
    root = logging.getLogger("levqe")
    if not root.handlers:
        handler = logging.StreamHandler(sys.stderr)
        handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
        root.addHandler(handler)
    root.setLevel(level)


def main(argv: Optional[Sequence[str]] = None) -> int:
    _configure_logging()
    try:
        if argv is None:
            argv = sys.argv[1:]
        argv = list(argv)
        config_path = _peek_config(argv)
        defaults = _load_config(config_path) if config_path is not None else None
        parser = build_parser(defaults)
        args = parser.parse_args(argv)
        return args.func(args)
    except CliError as exc:
        print(f"levqe: {exc}", file=sys.stderr)
        return exc.code


def _peek_config(argv: list[str]) -> Optional[str]:
    for i, arg in enumerate(argv):
        if arg == "--config" and i + 1 < len(argv):
            return argv[i + 1]
        if arg.startswith("--config="):
            return arg[len("--config=") :]
    return None


def _load_config(path: str) -> dict:
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise CliError(EXIT_USAGE_IO, f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise CliError(EXIT_DATA_FORMAT, f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(payload, dict):
        raise CliError(EXIT_DATA_FORMAT, f"{path}: config must be a JSON object")
    return {key.replace("-", "_"): value for key, value in payload.items()}


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
