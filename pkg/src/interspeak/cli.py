"""Command-line front door: interleave, verify, simulate, report.

Every output file begins with a header line that reproduces the effective
run configuration, so any result can be traced back to the exact protocol
geometry and rate model that produced it.  Flag precedence is
defaults < config file (``--config`` or the INTERSPEAK_CONFIG environment
variable) < explicit flags.  Identical flags, files, and seed produce
byte-identical outputs.
"""

from __future__ import annotations

import argparse
import enum
import json
import os
import sys
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

from . import latency, pipeline
from .latency import DecodeParadigm, Jitter, RateModel
from .tokens import InterleaveConfig, TailPolicy

CONFIG_ENV_VAR = "INTERSPEAK_CONFIG"

_PARADIGM_ALIASES = {p.value: p for p in DecodeParadigm}


class OutputFormat(enum.Enum):
    TABLE = "table"
    DELIMITED = "csv"
    JSONL = "jsonl"


@dataclass(frozen=True)
class RunConfig:
    """The fully-resolved knobs for one CLI invocation."""

    interleave: InterleaveConfig
    rate: RateModel
    input_path: str | None = None
    output_path: str | None = None
    seed: int = 0
    output_format: OutputFormat = OutputFormat.TABLE

    def to_dict(self) -> dict:
        return {
            "interleave": self.interleave.to_dict(),
            "rate": self.rate.to_dict(),
            "input_path": self.input_path,
            "output_path": self.output_path,
            "seed": self.seed,
            "output_format": self.output_format.value,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        return cls(
            interleave=InterleaveConfig.from_dict(data["interleave"]),
            rate=RateModel.from_dict(data["rate"]),
            input_path=data.get("input_path"),
            output_path=data.get("output_path"),
            seed=int(data.get("seed", 0)),
            output_format=OutputFormat(data.get("output_format", "table")),
        )


def default_run_config() -> RunConfig:
    from .tokens import default_config

    return RunConfig(interleave=default_config(), rate=RateModel())


class CliError(Exception):
    """Invalid flag combination or unusable input; exits with code 1."""


def _parse_ratio(text: str) -> tuple[int, int]:
    try:
        p_str, q_str = text.split(":", 1)
        return int(p_str), int(q_str)
    except ValueError as exc:
        raise CliError(f"--ratio expects P:Q, got {text!r}") from exc


def _parse_window(text: str) -> tuple[int, int]:
    parts = text.split(":")
    try:
        if len(parts) == 1:
            length = int(parts[0])
            return length, length
        if len(parts) == 2:
            return int(parts[0]), int(parts[1])
    except ValueError:
        pass
    raise CliError(f"--window expects LEN or LEN:HOP, got {text!r}")


def _parse_sweep(text: str) -> list[float]:
    try:
        start_s, stop_s, step_s = text.split(":")
        start, stop, step = float(start_s), float(stop_s), float(step_s)
    except ValueError as exc:
        raise CliError(f"--sweep-g expects START:STOP:STEP, got {text!r}") from exc
    if step <= 0 or stop < start:
        raise CliError("--sweep-g requires START <= STOP and STEP > 0")
    count = int((stop - start) / step + 1e-9) + 1
    return [start + i * step for i in range(count)]


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="path to a run-config JSON file")
    parser.add_argument("--ratio", help="interleaving ratio as P:Q")
    parser.add_argument("--padding", type=int, help="padding tokens per cycle")
    parser.add_argument(
        "--no-markers", action="store_true", help="disable split markers"
    )
    parser.add_argument(
        "--tail-policy", choices=[t.value for t in TailPolicy], help="tail handling"
    )
    parser.add_argument("--g", type=float, help="generation rate, tokens/s")
    parser.add_argument("--c", type=float, help="playback rate, tokens/s")
    parser.add_argument("--fanout", type=int, help="audio tokens per response token")
    parser.add_argument("--window", help="decode window as LEN or LEN:HOP")
    parser.add_argument(
        "--padding-counted",
        action="store_true",
        help="charge padding tokens against the generation budget",
    )
    parser.add_argument("--jitter", type=float, help="log-normal jitter sigma")
    parser.add_argument("--seed", type=int, help="simulation seed")
    parser.add_argument(
        "--format", choices=[f.value for f in OutputFormat], help="output format"
    )


def _load_file_config(path: str | None) -> RunConfig:
    if path is None:
        path = os.environ.get(CONFIG_ENV_VAR)
    if not path:
        return default_run_config()
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        return RunConfig.from_dict(data)
    except FileNotFoundError as exc:
        raise CliError(f"config file not found: {path}") from exc
    except (json.JSONDecodeError, KeyError, ValueError) as exc:
        raise CliError(f"unreadable config file {path}: {exc}") from exc


def _resolve_config(args: argparse.Namespace) -> RunConfig:
    """defaults < config file < explicit flags."""
    cfg = _load_file_config(args.config)
    inter = cfg.interleave
    if args.ratio is not None:
        p, q = _parse_ratio(args.ratio)
        try:
            inter = replace(inter, p=p, q=q)
        except ValueError as exc:
            raise CliError(str(exc)) from exc
    if args.padding is not None:
        try:
            inter = replace(inter, padding_per_cycle=args.padding)
        except ValueError as exc:
            raise CliError(str(exc)) from exc
    if args.no_markers:
        inter = replace(inter, emit_markers=False)
    if args.tail_policy is not None:
        inter = replace(inter, tail_policy=TailPolicy(args.tail_policy))

    rate = cfg.rate
    updates: dict = {}
    if args.g is not None:
        updates["generation_rate_g"] = args.g
    if args.c is not None:
        updates["playback_rate_c"] = args.c
    if args.fanout is not None:
        updates["talker_fanout_f"] = args.fanout
    if args.window is not None:
        length, hop = _parse_window(args.window)
        updates["window_len_l"] = length
        updates["window_hop"] = hop
    if args.padding_counted:
        updates["padding_counted"] = True
    if args.jitter is not None:
        updates["jitter"] = Jitter(sigma=args.jitter)
    if updates:
        try:
            rate = replace(rate, **updates)
        except ValueError as exc:
            raise CliError(str(exc)) from exc

    return RunConfig(
        interleave=inter,
        rate=rate,
        input_path=getattr(args, "input", None) or cfg.input_path,
        output_path=getattr(args, "output", None) or cfg.output_path,
        seed=args.seed if args.seed is not None else cfg.seed,
        output_format=(
            OutputFormat(args.format) if args.format is not None else cfg.output_format
        ),
    )


def _header_line(cfg: RunConfig, fmt: OutputFormat) -> str:
    payload = json.dumps({"header": cfg.to_dict()})
    return payload if fmt is OutputFormat.JSONL else f"# {payload}"


def parse_header(path: str | Path) -> RunConfig:
    """Reconstruct the RunConfig echoed at the top of any output file."""
    with Path(path).open("r", encoding="utf-8") as fh:
        first = fh.readline().strip()
    if first.startswith("# "):
        first = first[2:]
    data = json.loads(first)
    return RunConfig.from_dict(data["header"])


def _format_cell(value) -> str:
    if value is None:
        return "-"
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


def _render_rows(
    rows: list[dict], columns: list[str], fmt: OutputFormat, cfg: RunConfig
) -> str:
    lines = [_header_line(cfg, fmt)]
    if fmt is OutputFormat.JSONL:
        lines.extend(json.dumps(row) for row in rows)
    elif fmt is OutputFormat.DELIMITED:
        lines.append(",".join(columns))
        for row in rows:
            lines.append(",".join(_format_cell(row.get(col)) for col in columns))
    else:
        cells = [columns] + [
            [_format_cell(row.get(col)) for col in columns] for row in rows
        ]
        widths = [max(len(r[i]) for r in cells) for i in range(len(columns))]
        for r in cells:
            lines.append("  ".join(cell.ljust(w) for cell, w in zip(r, widths)).rstrip())
    return "\n".join(lines) + "\n"


def _write_text(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(text, encoding="utf-8")


# ---------------------------------------------------------------- simulate

_SIM_COLUMNS = [
    "paradigm",
    "g",
    "c",
    "p",
    "q",
    "padding_per_cycle",
    "padding_counted",
    "M",
    "N",
    "seed",
    "first_audio_latency_s",
    "first_playback_s",
    "completion_time_s",
    "spoken_token_count",
    "total_generated_tokens",
    "control_token_count",
    "underrun_count",
    "response_emission_rate",
    "emission_rate_padding_excluded",
    "emission_rate_padding_counted",
    "break_even_padding_excluded",
    "break_even_padding_counted",
]


def _simulate_rows(cfg: RunConfig, paradigms: list[DecodeParadigm], m: int, n: int,
                   sweep: list[float] | None) -> list[dict]:
    rows = []
    g_values = sweep if sweep is not None else [cfg.rate.generation_rate_g]
    for g in g_values:
        rate = replace(cfg.rate, generation_rate_g=g)
        brk = latency.break_even_rate(cfg.interleave, rate)
        for paradigm in paradigms:
            report = latency.simulate_events(
                paradigm, m, n, cfg.interleave, rate, seed=cfg.seed
            )
            row = {
                "paradigm": paradigm.value,
                "g": g,
                "c": rate.playback_rate_c,
                "p": cfg.interleave.p,
                "q": cfg.interleave.q,
                "padding_per_cycle": cfg.interleave.padding_per_cycle,
                "padding_counted": rate.padding_counted,
                "M": m,
                "N": n,
                "seed": cfg.seed,
            }
            row.update(report.to_dict())
            del row["underrun_events"]
            row["break_even_padding_excluded"] = brk.padding_excluded
            row["break_even_padding_counted"] = brk.padding_counted
            rows.append(row)
    return rows


def _cmd_simulate(args: argparse.Namespace) -> int:
    cfg = _resolve_config(args)
    if args.M < 0 or args.N < 0:
        raise CliError("--M and --N must be non-negative")
    if args.paradigm == "all":
        paradigms = list(DecodeParadigm)
    else:
        paradigms = [_PARADIGM_ALIASES[args.paradigm]]
    sweep = _parse_sweep(args.sweep_g) if args.sweep_g else None
    rows = _simulate_rows(cfg, paradigms, args.M, args.N, sweep)
    text = _render_rows(rows, _SIM_COLUMNS, cfg.output_format, cfg)
    _write_text(cfg.output_path, text)
    return 0


# ------------------------------------------------------------------ report

_REPORT_COLUMNS = [
    "label",
    "first_audio_latency_s",
    "completion_time_s",
    "spoken_token_count",
    "total_generated_tokens",
    "spoken_total_ratio",
    "words",
    "ratio_vs_baseline",
    "flag",
]

_REQUIRED_ROW_KEYS = {
    "paradigm",
    "first_audio_latency_s",
    "completion_time_s",
    "spoken_token_count",
    "total_generated_tokens",
}


def _load_report_rows(paths: Sequence[str]) -> list[dict]:
    rows = []
    for path in paths:
        try:
            lines = Path(path).read_text(encoding="utf-8").splitlines()
        except OSError as exc:
            raise CliError(f"cannot read {path}: {exc}") from exc
        for line in lines[1:]:  # line 0 is the header echo
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CliError(f"{path} is not a jsonl simulation output: {exc}") from exc
            if not _REQUIRED_ROW_KEYS.issubset(obj):
                missing = sorted(_REQUIRED_ROW_KEYS - set(obj))
                raise CliError(f"{path}: row missing fields {missing}")
            rows.append(obj)
    return rows


def _cmd_report(args: argparse.Namespace) -> int:
    cfg = _resolve_config(args)
    tokens_per_word = args.tokens_per_word
    if tokens_per_word <= 0:
        raise CliError("--tokens-per-word must be positive")
    sim_rows = _load_report_rows(args.inputs or [])

    table: list[dict] = []
    for row in sim_rows:
        spoken = row["spoken_token_count"]
        total = row["total_generated_tokens"]
        table.append(
            {
                "label": row["paradigm"],
                "first_audio_latency_s": row["first_audio_latency_s"],
                "completion_time_s": row["completion_time_s"],
                "spoken_token_count": spoken,
                "total_generated_tokens": total,
                "spoken_total_ratio": (spoken / total) if total else None,
                "words": spoken / tokens_per_word,
            }
        )
    for item in args.external or []:
        label, _, words = item.partition(":")
        if not label or not words:
            raise CliError(f"--external expects LABEL:WORDS, got {item!r}")
        try:
            words_f = float(words)
        except ValueError as exc:
            raise CliError(f"--external expects numeric WORDS, got {item!r}") from exc
        table.append(
            {
                "label": label,
                "first_audio_latency_s": None,
                "completion_time_s": None,
                "spoken_token_count": None,
                "total_generated_tokens": None,
                "spoken_total_ratio": None,
                "words": words_f,
            }
        )
    if not table:
        raise CliError("report needs at least one input file or --external row")

    if args.baseline is not None:
        candidates = [r for r in table if r["label"] == args.baseline]
        if not candidates:
            raise CliError(f"baseline label {args.baseline!r} not found")
        baseline = candidates[0]
    else:
        baseline = max(table, key=lambda r: r["words"])
    base_words = baseline["words"]
    for row in table:
        ratio = row["words"] / base_words if base_words else None
        row["ratio_vs_baseline"] = ratio
        row["flag"] = "< 50%" if ratio is not None and ratio < 0.5 else ""

    text = _render_rows(table, _REPORT_COLUMNS, cfg.output_format, cfg)
    _write_text(cfg.output_path, text)

    if args.plot_data:
        series_lines = [_header_line(cfg, OutputFormat.DELIMITED), "series,label,value"]
        metrics = [
            "first_audio_latency_s",
            "completion_time_s",
            "spoken_token_count",
            "total_generated_tokens",
            "spoken_total_ratio",
            "words",
            "ratio_vs_baseline",
        ]
        for metric in metrics:
            for row in table:
                value = row.get(metric)
                if value is None:
                    continue
                series_lines.append(f"{metric},{row['label']},{_format_cell(value)}")
        _write_text(args.plot_data, "\n".join(series_lines) + "\n")
    return 0


# ------------------------------------------------------- interleave/verify

def _corpus_command(args: argparse.Namespace, write_training: bool) -> int:
    cfg = _resolve_config(args)
    if not cfg.input_path:
        raise CliError("--input is required")
    if not Path(cfg.input_path).exists():
        raise CliError(f"input path does not exist: {cfg.input_path}")
    header = cfg.to_dict()
    try:
        if write_training:
            if not cfg.output_path:
                raise CliError("--output is required")
            stats = pipeline.run_corpus(
                cfg.input_path,
                cfg.output_path,
                cfg.interleave,
                report_path=args.report,
                vocab_path=args.vocab,
                header=header,
            )
        else:
            report_path = args.report or cfg.output_path
            if not report_path:
                raise CliError("--output (report destination) is required")
            stats = pipeline.run_corpus(
                cfg.input_path,
                None,
                cfg.interleave,
                report_path=report_path,
                header=header,
            )
    except OSError as exc:
        raise CliError(f"I/O failure: {exc}") from exc
    print(f"{stats.passed} pass / {stats.rejected} reject")
    print(json.dumps(stats.to_dict()), file=sys.stderr)
    if stats.malformed:
        print(f"{stats.malformed} malformed line(s) skipped", file=sys.stderr)
    return 0 if stats.rejected == 0 and stats.malformed == 0 else 2


def _cmd_interleave(args: argparse.Namespace) -> int:
    return _corpus_command(args, write_training=True)


def _cmd_verify(args: argparse.Namespace) -> int:
    return _corpus_command(args, write_training=False)


# -------------------------------------------------------------------- main

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="interspeak",
        description=(
            "Interleaved reasoning/response decoding tools: dataset "
            "construction, protocol verification, and latency simulation."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_inter = sub.add_parser("interleave", help="build training records from a corpus")
    p_inter.add_argument("--input", help="input records (jsonl)")
    p_inter.add_argument("--output", help="training records destination (jsonl)")
    p_inter.add_argument("--report", help="verification report sidecar path")
    p_inter.add_argument("--vocab", help="vocabulary file path")
    _add_config_flags(p_inter)
    p_inter.set_defaults(func=_cmd_interleave)

    p_verify = sub.add_parser("verify", help="verification reports only")
    p_verify.add_argument("--input", help="input records (jsonl)")
    p_verify.add_argument("--output", help="report destination (jsonl)")
    p_verify.add_argument("--report", help="alias for --output")
    _add_config_flags(p_verify)
    p_verify.set_defaults(func=_cmd_verify)

    p_sim = sub.add_parser("simulate", help="latency reports per paradigm")
    p_sim.add_argument(
        "--paradigm",
        default="all",
        choices=["all"] + [p.value for p in DecodeParadigm],
    )
    p_sim.add_argument("--M", type=int, required=True, help="reasoning length")
    p_sim.add_argument("--N", type=int, required=True, help="response length")
    p_sim.add_argument("--sweep-g", help="sweep generation rate START:STOP:STEP")
    p_sim.add_argument("--output", help="output file (default stdout)")
    _add_config_flags(p_sim)
    p_sim.set_defaults(func=_cmd_simulate)

    p_rep = sub.add_parser("report", help="aggregate runs into a comparison table")
    p_rep.add_argument("--inputs", nargs="*", help="simulate outputs (jsonl)")
    p_rep.add_argument(
        "--external",
        action="append",
        help="extra comparison row as LABEL:WORDS (repeatable)",
    )
    p_rep.add_argument("--baseline", help="label of the baseline row")
    p_rep.add_argument(
        "--tokens-per-word", type=float, default=4.0, help="token/word conversion"
    )
    p_rep.add_argument("--plot-data", help="write plot-ready series (csv)")
    p_rep.add_argument("--output", help="output file (default stdout)")
    _add_config_flags(p_rep)
    p_rep.set_defaults(func=_cmd_report)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        print(f"run 'interspeak {args.command} --help' for usage", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
