"""``asrforge`` command line.

Values resolve in this order: command-line flag, then the subcommand's
section of ``--config``, then its ``[DEFAULT]`` section, then built-in
defaults. Config keys are flag names without the leading dashes::

    [DEFAULT]
    lang = persian
    seed = 7

    [chunk]
    thresh = 0.75

``ASRFORGE_LOG`` sets log verbosity (DEBUG, INFO, WARNING; default WARNING).
"""

import argparse
import configparser
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import __version__
from .audio_io import load_16k, write_wav
from .corpus_manager import (
    UtteranceRecord,
    ingest,
    read_hypotheses,
    read_manifest,
    render_dataset_splits,
    render_overview,
    score,
    split,
    stats,
    write_hypotheses,
    write_manifest,
)
from .ctc_engine import BeamConfig, beam_decode, ctc_loss, greedy_decode, log_softmax, read_logits
from .errors import AsrForgeError, IoFailure
from .subword_bpe import (
    BpeModel,
    CtcSymbolTable,
    build_symbol_table,
    char_encode,
    decode_pieces,
    encode_sentence,
    train_bpe,
)
from .text_normalizer import LANGUAGES, load_profile, load_profile_file, normalize
from .vad import (
    ChunkingConfig,
    FrameConfig,
    SpeechChunk,
    chunk_segments,
    compute_speech_probs,
    cut_chunk,
    detect_segments,
    import_speech_probs,
    write_speech_probs,
)

log = logging.getLogger("asrforge")


class UsageError(Exception):
    pass


def _safe_name(uid: str) -> str:
    return uid.replace("/", "-")


def _profile(args):
    if getattr(args, "profile_file", None):
        return load_profile_file(args.profile_file, args.lang)
    return load_profile(args.lang)


def _require(args, *names):
    missing = [f"--{n.replace('_', '-')}" for n in names if getattr(args, n, None) in (None, "")]
    if missing:
        raise UsageError(f"the following arguments are required: {', '.join(missing)}")


def _read_text_lines(path):
    if path in (None, "-"):
        return sys.stdin.read().splitlines()
    return Path(path).read_text(encoding="utf-8").splitlines()


def _write_text(path, text):
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def _parse_kv(text: str) -> dict:
    out = {}
    for part in text.split(","):
        name, _, value = part.partition("=")
        if not value:
            raise UsageError(f"expected name=value in {text!r}")
        out[name.strip()] = float(value)
    return out


def _chunk_cfg(args) -> ChunkingConfig:
    return ChunkingConfig(
        min_chunk_s=args.min,
        max_chunk_s=args.max,
        speech_prob_threshold=args.thresh,
        merge_gap_s=args.merge_gap,
        onset_threshold=args.onset,
        offset_threshold=args.offset,
    )


# subcommands


def cmd_ingest(args):
    _require(args, "input", "lang", "dataset", "out")
    result = ingest(args.input, args.lang, args.dataset, split=args.split, jobs=args.jobs)
    write_manifest(result.records, args.out)
    print(f"records\t{len(result.records)}\nduplicates\t{len(result.duplicates)}")


def _vad_one(wav, out, frame_cfg):
    write_speech_probs(compute_speech_probs(load_16k(wav), frame_cfg), out)


def cmd_vad(args):
    frame_cfg = FrameConfig(args.frame_ms, args.hop_ms)
    if args.manifest:
        _require(args, "out_dir")
        out_dir = Path(args.out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        records = read_manifest(args.manifest)
        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            list(pool.map(lambda r: _vad_one(r.audio_path, out_dir / f"{_safe_name(r.id)}.probs", frame_cfg),
                          records))
        print(f"files\t{len(records)}")
    else:
        _require(args, "input", "out")
        _vad_one(args.input, args.out, frame_cfg)


def _chunk_one(probs_path, audio_path, source_id, cfg, wav_dir, lang, dataset):
    fp = import_speech_probs(probs_path)
    chunks = chunk_segments(detect_segments(fp, cfg), fp, cfg, source_id)
    records = []
    if wav_dir is not None:
        buf = load_16k(audio_path)
        for ch in chunks:
            path = Path(wav_dir) / ch.wav_name()
            write_wav(cut_chunk(buf, ch), path)
            records.append(UtteranceRecord(
                id=path.stem, audio_path=str(path), duration_s=ch.duration_s,
                lang=lang, dataset=dataset, split="pretrain",
            ))
    return chunks, records


def cmd_chunk(args):
    cfg = _chunk_cfg(args)
    wav_dir = args.wav_dir
    if wav_dir:
        _require(args, "manifest_out")
        Path(wav_dir).mkdir(parents=True, exist_ok=True)

    if args.manifest:
        _require(args, "probs_dir")
        sources = [(Path(args.probs_dir) / f"{_safe_name(r.id)}.probs", r.audio_path, _safe_name(r.id),
                    r.lang, r.dataset) for r in read_manifest(args.manifest)]
    else:
        _require(args, "probs")
        if wav_dir:
            _require(args, "audio", "lang", "dataset")
        sid = args.source_id or Path(args.audio or args.probs).stem
        sources = [(args.probs, args.audio, sid, args.lang, args.dataset)]

    with ThreadPoolExecutor(max_workers=args.jobs) as pool:
        results = list(pool.map(lambda s: _chunk_one(s[0], s[1], s[2], cfg, wav_dir, s[3], s[4]), sources))

    chunks = sorted((c for cs, _ in results for c in cs), key=lambda c: (c.source_id, c.start_s))
    records = sorted((r for _, rs in results for r in rs), key=lambda r: r.id)
    text = "".join(json.dumps(c.to_dict(), ensure_ascii=False, sort_keys=True) + "\n" for c in chunks)
    _write_text(args.out, text)
    if wav_dir:
        write_manifest(records, args.manifest_out)
    log.info("emitted %d chunks", len(chunks))


def cmd_stats(args):
    _require(args, "manifest")
    st = stats(read_manifest(args.manifest))
    text = render_overview(st, args.digits)
    langs = [args.lang] if args.lang else sorted({l for l, _, _ in st.cells}, key=LANGUAGES.index)
    for lang in langs:
        text += "\n" + render_dataset_splits(st, lang)
    _write_text(args.out, text)
    if args.csv:
        import csv

        with open(args.csv, "w", encoding="utf-8", newline="") as f:
            w = csv.DictWriter(f, fieldnames=["lang", "dataset", "split", "hours", "utterances"],
                               lineterminator="\n")
            w.writeheader()
            for row in st.rows():
                w.writerow({**row, "hours": f"{row['hours']:.6f}"})


def cmd_normalize(args):
    _require(args, "lang")
    profile = _profile(args)
    _write_text(args.out, "".join(normalize(line, profile) + "\n" for line in _read_text_lines(args.input)))


def cmd_bpe_train(args):
    _require(args, "corpus", "lang", "out")
    lines = _read_text_lines(args.corpus)
    if not args.no_normalize:
        profile = _profile(args)
        lines = [normalize(line, profile) for line in lines]
    model = train_bpe(lines, args.vocab, lang=args.lang, min_pair_count=args.min_pair_count)
    model.save(args.out)
    if args.table_out:
        build_symbol_table(model).save(args.table_out)
    print(f"pieces\t{len(model.pieces)}\nmerges\t{len(model.merges)}")


def _encoder(args):
    if args.model:
        model = BpeModel.load(args.model)
        return model.table, lambda s: encode_sentence(model, s)
    _require(args, "table")
    table = CtcSymbolTable.load(args.table)
    return table, lambda s: char_encode(table, s)


def cmd_encode(args):
    table, enc = _encoder(args)
    out = []
    for line in _read_text_lines(args.input):
        ids = enc(line)
        out.append(" ".join(table[i] if args.pieces else str(i) for i in ids))
    _write_text(args.out, "".join(o + "\n" for o in out))


def cmd_ctc_loss(args):
    _require(args, "logits")
    logp = log_softmax(read_logits(args.logits))
    if args.target is not None:
        target = [int(x) for x in args.target.split()]
    else:
        _require(args, "text")
        _, enc = _encoder(args)
        target = enc(args.text)
    loss, _ = ctc_loss(logp, target)
    print(f"loss\t{loss!r}\nfeasible\t{int(loss != float('inf'))}")


def _decode_file(path, table, beam):
    logp = log_softmax(read_logits(path))
    if beam > 0:
        best = beam_decode(logp, table, BeamConfig(beam_width=beam))
        ids = best[0][0] if best else []
    else:
        ids = greedy_decode(logp, table)
    return decode_pieces(table, ids)


def cmd_decode(args):
    _require(args, "table")
    table = CtcSymbolTable.load(args.table)
    if args.logits_dir:
        files = sorted(Path(args.logits_dir).glob("*.ctcl"))
    else:
        _require(args, "logits")
        files = [Path(args.logits)]
    with ThreadPoolExecutor(max_workers=args.jobs) as pool:
        texts = list(pool.map(lambda p: _decode_file(p, table, args.beam), files))
    hyps = {p.stem: t for p, t in zip(files, texts)}
    if args.out:
        write_hypotheses(hyps, args.out)
    else:
        for uid in sorted(hyps):
            print(f"{uid}\t{hyps[uid]}")
    log.info("decoder=%s", f"beam{args.beam}" if args.beam > 0 else "greedy")


def cmd_split(args):
    _require(args, "manifest", "out")
    if bool(args.ratios) == bool(args.hours):
        raise UsageError("give exactly one of --ratios or --hours")
    ratios = _parse_kv(args.ratios) if args.ratios else None
    hours = _parse_kv(args.hours) if args.hours else None
    records = read_manifest(args.manifest)
    write_manifest(split(records, ratios=ratios, hours=hours, seed=args.seed), args.out)


def cmd_score(args):
    _require(args, "refs", "hyps")
    records = [r for r in read_manifest(args.refs) if r.transcript is not None]
    if args.split:
        records = [r for r in records if r.split == args.split]
    profile = _profile(args) if args.profile_file else None
    report = score(records, read_hypotheses(args.hyps), mode=args.mode, profile=profile, jobs=args.jobs)
    _write_text(args.out, report.render())
    if args.csv:
        Path(args.csv).write_text(report.to_csv(), encoding="utf-8")


# parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="layered key=value config file")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--jobs", type=int, default=os.cpu_count())

    p = argparse.ArgumentParser(prog="asrforge", description=__doc__.split("\n")[0])
    p.add_argument("--version", action="version", version=f"asrforge {__version__}")
    sub = p.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    def add(name, func, help):
        sp = sub.add_parser(name, parents=[common], help=help)
        sp.set_defaults(func=func)
        return sp

    sp = add("ingest", cmd_ingest, "build a manifest from a directory or listing of WAV files")
    sp.add_argument("--in", dest="input")
    sp.add_argument("--lang", choices=LANGUAGES)
    sp.add_argument("--dataset")
    sp.add_argument("--split", default="pretrain", choices=("pretrain", "train", "valid", "test"))
    sp.add_argument("--out")

    sp = add("vad", cmd_vad, "per-frame speech probabilities")
    sp.add_argument("--in", dest="input")
    sp.add_argument("--out")
    sp.add_argument("--manifest")
    sp.add_argument("--out-dir")
    sp.add_argument("--frame-ms", type=int, default=30)
    sp.add_argument("--hop-ms", type=int, default=10)

    sp = add("chunk", cmd_chunk, "cut speech segments into training chunks")
    sp.add_argument("--probs")
    sp.add_argument("--audio")
    sp.add_argument("--source-id")
    sp.add_argument("--manifest")
    sp.add_argument("--probs-dir")
    sp.add_argument("--lang", choices=LANGUAGES)
    sp.add_argument("--dataset")
    sp.add_argument("--min", type=float, default=3.0)
    sp.add_argument("--max", type=float, default=32.0)
    sp.add_argument("--thresh", type=float, default=0.70)
    sp.add_argument("--merge-gap", type=float, default=0.30)
    sp.add_argument("--onset", type=float, default=0.60)
    sp.add_argument("--offset", type=float, default=0.40)
    sp.add_argument("--out", help="chunk listing (JSONL); stdout if omitted")
    sp.add_argument("--wav-dir", help="write one WAV per chunk here")
    sp.add_argument("--manifest-out", help="manifest of the chunk WAVs")

    sp = add("stats", cmd_stats, "hours and utterance counts")
    sp.add_argument("--manifest")
    sp.add_argument("--lang", choices=LANGUAGES)
    sp.add_argument("--digits", type=int, default=0)
    sp.add_argument("--out")
    sp.add_argument("--csv")

    sp = add("normalize", cmd_normalize, "normalize transcripts line by line")
    sp.add_argument("--lang", choices=LANGUAGES)
    sp.add_argument("--profile-file")
    sp.add_argument("--in", dest="input")
    sp.add_argument("--out")

    sp = add("bpe-train", cmd_bpe_train, "train a BPE subword model")
    sp.add_argument("--corpus")
    sp.add_argument("--lang", choices=LANGUAGES)
    sp.add_argument("--profile-file")
    sp.add_argument("--vocab", type=int, default=512)
    sp.add_argument("--min-pair-count", type=int, default=2)
    sp.add_argument("--no-normalize", action="store_true")
    sp.add_argument("--out")
    sp.add_argument("--table-out")

    sp = add("encode", cmd_encode, "encode sentences to CTC symbol indices")
    sp.add_argument("--model")
    sp.add_argument("--table", help="character symbol table (char mode)")
    sp.add_argument("--in", dest="input")
    sp.add_argument("--out")
    sp.add_argument("--pieces", action="store_true", help="print piece strings instead of indices")

    sp = add("ctc-loss", cmd_ctc_loss, "CTC loss of a target under a logit file")
    sp.add_argument("--logits")
    sp.add_argument("--target", help="space-separated symbol indices")
    sp.add_argument("--text")
    sp.add_argument("--model")
    sp.add_argument("--table")

    sp = add("decode", cmd_decode, "decode logit files to text")
    sp.add_argument("--logits")
    sp.add_argument("--logits-dir")
    sp.add_argument("--table")
    sp.add_argument("--beam", type=int, default=32, help="beam width; 0 selects greedy decoding")
    sp.add_argument("--out")

    sp = add("split", cmd_split, "stratified train/valid/test assignment")
    sp.add_argument("--manifest")
    sp.add_argument("--ratios", help="e.g. train=4.23,valid=0.73")
    sp.add_argument("--hours", help="e.g. train=60,test=10")
    sp.add_argument("--out")

    sp = add("score", cmd_score, "WER/CER report")
    sp.add_argument("--refs")
    sp.add_argument("--hyps")
    sp.add_argument("--split")
    sp.add_argument("--mode", default="subword", choices=("char", "subword"))
    sp.add_argument("--lang", choices=LANGUAGES)
    sp.add_argument("--profile-file")
    sp.add_argument("--out")
    sp.add_argument("--csv")

    return p


def _apply_config(parser, path, command):
    cp = configparser.ConfigParser()
    if not cp.read(path, encoding="utf-8"):
        raise IoFailure(f"cannot read config {path}")
    values = dict(cp.defaults())
    if cp.has_section(command):
        values.update(cp.items(command))
    sub = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction)).choices[command]
    known = {a.dest: a for a in sub._actions}
    defaults = {}
    for key, value in values.items():
        dest = key.replace("-", "_")
        if dest == "in":
            dest = "input"
        if dest not in known:
            continue
        if isinstance(known[dest], argparse._StoreTrueAction):
            defaults[dest] = cp._convert_to_boolean(value)
        else:
            defaults[dest] = value
    sub.set_defaults(**defaults)


def main(argv=None) -> int:
    logging.basicConfig(
        level=os.environ.get("ASRFORGE_LOG", "WARNING").upper(),
        format="%(levelname)s %(name)s: %(message)s",
    )
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        try:
            _apply_config(parser, args.config, args.command)
        except AsrForgeError as exc:
            print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
            return 1
        args = parser.parse_args(argv)

    effective = {k: v for k, v in vars(args).items() if k != "func"}
    log.info("asrforge %s config %s", __version__, json.dumps(effective, sort_keys=True, default=str))
    try:
        args.func(args)
    except UsageError as exc:
        sub = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction)).choices[args.command]
        sub.error(str(exc))
    except AsrForgeError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
