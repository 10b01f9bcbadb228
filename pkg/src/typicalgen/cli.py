"""Command-line pipelines: train, generate, evaluate, epsilon, compare.

File conventions:
  * corpus files: UTF-8 text, one document per line;
  * models: the JSON format from :mod:`typicalgen.ngram`;
  * generations: JSONL, one self-describing record per line;
  * metric reports: flat ``key value`` text, floats at 6 decimals;
  * histograms and comparison tables: CSV/TSV, with PNG figures rendered
    alongside unless ``--no-figures`` is given.

Every output gets a ``<path>.manifest.json`` sidecar recording the command,
its parameters, and input/output digests. Outputs carry no timestamps, so a
rerun with identical inputs reproduces identical bytes. Exit codes: 0 on
success, 2 for usage or input errors, 1 for internal errors.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
import tempfile
from pathlib import Path

from . import __version__
from .dist import InvalidInputError
from .generation import batch_generate
from .metrics import (
    MetricsReport,
    UndefinedMetricError,
    epsilon_profile,
    evaluate_corpus,
    unk_fraction,
)
from .ngram import DEFAULT_ALPHA, DEFAULT_LAMBDAS, DEFAULT_ORDER, EOS, ModelFormatError
from . import corpus as corpus_mod
from . import ngram
from .strategies import STRATEGY_KINDS, StrategyConfig

REPORT_PRECISION = 6

# Common working values for each strategy; applied only when the matching
# strategy is selected, and echoed to stdout rather than silently.
STRATEGY_FLAG_DEFAULTS = {"temperature": 1.0, "k": 30, "n": 0.95, "tau": 0.95}

_REPORT_METRIC_FIELDS = (
    "ppl_g", "ppl_i", "rep", "rep_l16", "rep_l32", "rep_l128",
    "zipf", "diversity", "eps_mean",
)


class UsageError(ValueError):
    """Bad flag combination or unusable input; maps to exit code 2."""


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    try:
        return args.func(args)
    except (UsageError, InvalidInputError, ModelFormatError, UndefinedMetricError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # pragma: no cover - defensive
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


def entry_point() -> None:  # console script
    raise SystemExit(main())


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="typicalgen",
        description="Train n-gram models, decode with truncated sampling, and evaluate the output.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train an interpolated n-gram model")
    p.add_argument("--corpus", required=True, help="training text, one document per line")
    p.add_argument("--out", required=True, help="model file to write")
    p.add_argument("--order", type=int, default=DEFAULT_ORDER)
    p.add_argument("--lambdas", default=None,
                   help=f"comma-separated interpolation weights (default {','.join(map(str, DEFAULT_LAMBDAS))})")
    p.add_argument("--alpha", type=float, default=DEFAULT_ALPHA, help="uniform floor mass")
    p.add_argument("--min-count", type=int, default=1)
    p.add_argument("--keep-case", action="store_true", help="do not lowercase tokens")
    p.add_argument("--validation", default=None, help="held-out text for perplexity")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("generate", help="decode continuations from a trained model")
    p.add_argument("--model", required=True)
    p.add_argument("--strategy", required=True, choices=STRATEGY_KINDS)
    p.add_argument("--temperature", type=float, default=None,
                   help=f"for --strategy temperature (default {STRATEGY_FLAG_DEFAULTS['temperature']})")
    p.add_argument("--k", type=int, default=None,
                   help=f"for --strategy topk (default {STRATEGY_FLAG_DEFAULTS['k']})")
    p.add_argument("--n", type=float, default=None,
                   help=f"for --strategy nucleus (default {STRATEGY_FLAG_DEFAULTS['n']})")
    p.add_argument("--tau", type=float, default=None,
                   help=f"for --strategy typical (default {STRATEGY_FLAG_DEFAULTS['tau']})")
    p.add_argument("--seed", type=int, required=True, help="base seed; record i uses seed+i")
    p.add_argument("--max-len", type=int, required=True, help="maximum generated tokens per record")
    p.add_argument("--num", type=int, default=None, help="number of records (default: one per prompt)")
    p.add_argument("--prompt", default=None, help="literal prompt text")
    p.add_argument("--prompts", default=None, help="file of prompts, one per line")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", required=True, help="JSONL output path")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("evaluate", help="score a generations file with the metric suite")
    p.add_argument("--generations", required=True, help="JSONL from the generate command")
    p.add_argument("--model-g", required=True, help="model that generated the text")
    p.add_argument("--model-i", required=True, help="independent model for PPL(i)")
    p.add_argument("--reference", default=None, help="reference text to diff against")
    p.add_argument("--no-figures", action="store_true")
    p.add_argument("--out", required=True, help="key-value report path")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("epsilon", help="per-token deviation histogram for a text file")
    p.add_argument("--model", required=True)
    p.add_argument("--text", required=True, help="text to score, one document per line")
    p.add_argument("--no-figures", action="store_true")
    p.add_argument("--out", required=True, help="CSV histogram path")
    p.set_defaults(func=cmd_epsilon)

    p = sub.add_parser("compare", help="generate + evaluate a list of strategies into one table")
    p.add_argument("--model-g", required=True)
    p.add_argument("--model-i", required=True)
    p.add_argument("--strategies", required=True,
                   help="comma list like 'typical:0.95,nucleus:0.95,topk:30,temperature:1.0,greedy'")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--max-len", type=int, required=True)
    p.add_argument("--num", type=int, default=None)
    p.add_argument("--prompts", default=None)
    p.add_argument("--reference", default=None)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--no-figures", action="store_true")
    p.add_argument("--out", required=True, help="TSV table path")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("synth-corpus", help="write a deterministic synthetic corpus")
    p.add_argument("--lines", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--vocab-size", type=int, default=4000)
    p.add_argument("--zipf-exponent", type=float, default=1.1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth_corpus)

    return parser


# ---------------------------------------------------------------------------
# commands

def cmd_train(args) -> int:
    lines = _read_lines(args.corpus)
    lambdas = _parse_lambdas(args.lambdas, args.order)
    model = ngram.train(
        lines,
        order=args.order,
        lambdas=lambdas,
        alpha=args.alpha,
        min_count=args.min_count,
        lowercase=not args.keep_case,
    )
    data = ngram.save(model)
    _atomic_write(Path(args.out), data)

    n_tokens = sum(model.context_totals[0].values())
    print(f"trained order-{model.order} model: {n_tokens} tokens, "
          f"{len(model.vocab)} vocabulary entries (incl. 3 reserved)")
    extra_inputs = {}
    if args.validation is not None:
        val_lines = _read_lines(args.validation)
        seqs = [
            model.vocab.encode(ngram.tokenize(line, model.lowercase)) + [EOS]
            for line in val_lines
        ]
        from .metrics import corpus_perplexity

        ppl = corpus_perplexity(model, seqs)
        print(f"held-out perplexity: {ppl:.{REPORT_PRECISION}f}")
        extra_inputs["validation"] = args.validation

    _write_manifest(
        Path(args.out),
        command="train",
        parameters={
            "order": args.order,
            "lambdas": list(lambdas),
            "alpha": args.alpha,
            "min_count": args.min_count,
            "lowercase": not args.keep_case,
        },
        inputs={"corpus": args.corpus, **extra_inputs},
        outputs={"model": str(args.out)},
    )
    return 0


def cmd_generate(args) -> int:
    cfg = _resolve_strategy(args)
    model = _load_model(args.model)
    prompt_texts = _resolve_prompts(args, model)
    print(f"strategy: {cfg.label()}  seed: {args.seed}  records: {len(prompt_texts)}")

    prompts = [
        model.vocab.encode(ngram.tokenize(text, model.lowercase)) for text in prompt_texts
    ]
    records = batch_generate(
        model, cfg, prompts, max_len=args.max_len, base_seed=args.seed, workers=args.workers
    )

    lines = []
    for text, record in zip(prompt_texts, records):
        lines.append(json.dumps(_record_to_json(model, text, record), ensure_ascii=False))
    _atomic_write(Path(args.out), ("\n".join(lines) + "\n").encode("utf-8"))

    _write_manifest(
        Path(args.out),
        command="generate",
        parameters={
            "strategy": cfg.to_dict(),
            "seed": args.seed,
            "max_len": args.max_len,
            "num": len(prompt_texts),
            "prompt": args.prompt,
            "prompts": args.prompts,
        },
        inputs={"model": args.model},
        outputs={"generations": str(args.out)},
    )
    return 0


def cmd_evaluate(args) -> int:
    model_g = _load_model(args.model_g)
    model_i = _load_model(args.model_i)
    records = _read_jsonl(args.generations)
    if not records:
        raise UsageError(f"generations file {args.generations!r} contains no records")
    sequences = [ngram.tokenize(r["text"], model_g.lowercase) for r in records]

    for name, model in (("model-g", model_g), ("model-i", model_i)):
        frac = unk_fraction(model, sequences)
        if frac > 0:
            print(f"warning: {frac:.1%} of tokens are outside the {name} vocabulary "
                  f"(scored as UNK)", file=sys.stderr)

    report = evaluate_corpus(model_g, model_i, sequences)
    out = Path(args.out)
    kv = report_lines(report)

    reference_path = {}
    if args.reference is not None:
        ref_sequences = [
            ngram.tokenize(line, model_g.lowercase) for line in _read_lines(args.reference)
        ]
        ref_report = evaluate_corpus(model_g, model_i, ref_sequences)
        kv += [(f"reference_{k}", v) for k, v in report_lines(ref_report)]
        kv += _delta_lines(report, ref_report)
        reference_path["reference"] = args.reference

    _atomic_write(out, format_kv(kv).encode("utf-8"))
    outputs = {"report": str(out)}

    hist_csv = _sibling(out, ".eps_hist.csv")
    _atomic_write(hist_csv, _histogram_csv(report.eps_histogram).encode("utf-8"))
    outputs["eps_histogram"] = str(hist_csv)

    if not args.no_figures:
        from .figures import save_epsilon_histogram

        fig_path = _sibling(out, ".eps_hist.png")
        save_epsilon_histogram(report.eps_histogram, report.eps_mean, fig_path)
        outputs["eps_figure"] = str(fig_path)

    for key, value in kv:
        print(f"{key} {value}")

    _write_manifest(
        out,
        command="evaluate",
        parameters={"figures": not args.no_figures},
        inputs={
            "generations": args.generations,
            "model_g": args.model_g,
            "model_i": args.model_i,
            **reference_path,
        },
        outputs=outputs,
    )
    return 0


def cmd_epsilon(args) -> int:
    model = _load_model(args.model)
    lines = _read_lines(args.text)
    sequences = [
        model.vocab.encode(ngram.tokenize(line, model.lowercase)) + [EOS] for line in lines
    ]
    profile = epsilon_profile(model, sequences)

    out = Path(args.out)
    _atomic_write(out, _histogram_csv(profile.histogram).encode("utf-8"))
    outputs = {"histogram": str(out)}
    if not args.no_figures:
        from .figures import save_epsilon_histogram

        fig_path = out.with_suffix(".png")
        save_epsilon_histogram(profile.histogram, profile.mean, fig_path)
        outputs["figure"] = str(fig_path)

    print(f"tokens {profile.n_tokens} mean_eps {profile.mean:.{REPORT_PRECISION}f} unit nats")
    _write_manifest(
        out,
        command="epsilon",
        parameters={
            "figures": not args.no_figures,
            "mean_eps": round(profile.mean, REPORT_PRECISION),
            "n_tokens": profile.n_tokens,
        },
        inputs={"model": args.model, "text": args.text},
        outputs=outputs,
    )
    return 0


def cmd_compare(args) -> int:
    model_g = _load_model(args.model_g)
    model_i = _load_model(args.model_i)
    configs = _parse_strategies(args.strategies)
    prompt_texts = _resolve_prompts(args, model_g, allow_literal=False)
    prompts = [
        model_g.vocab.encode(ngram.tokenize(text, model_g.lowercase)) for text in prompt_texts
    ]
    out = Path(args.out)

    rows: list[tuple[str, MetricsReport]] = []
    outputs = {}
    if args.reference is not None:
        ref_sequences = [
            ngram.tokenize(line, model_g.lowercase) for line in _read_lines(args.reference)
        ]
        rows.append(("reference", evaluate_corpus(model_g, model_i, ref_sequences)))

    for cfg in configs:
        records = batch_generate(
            model_g, cfg, prompts, max_len=args.max_len, base_seed=args.seed,
            workers=args.workers,
        )
        gen_path = _sibling(out, f".gen.{_slug(cfg)}.jsonl")
        lines = [
            json.dumps(_record_to_json(model_g, text, rec), ensure_ascii=False)
            for text, rec in zip(prompt_texts, records)
        ]
        _atomic_write(gen_path, ("\n".join(lines) + "\n").encode("utf-8"))
        outputs[f"generations_{_slug(cfg)}"] = str(gen_path)

        sequences = [
            [model_g.vocab.id_to_token[i] for i in rec.generated if i != EOS]
            for rec in records
        ]
        try:
            rows.append((cfg.label(), evaluate_corpus(model_g, model_i, sequences)))
        except UndefinedMetricError as exc:
            # Degenerate output (e.g. greedy collapsing to one token type)
            # gets a row of NaNs instead of aborting the table.
            print(f"warning: {cfg.label()}: {exc}; emitting NaN row", file=sys.stderr)
            rows.append((cfg.label(), None))
        print(f"evaluated {cfg.label()}")

    table = _comparison_table(rows)
    _atomic_write(out, table.encode("utf-8"))
    outputs["table"] = str(out)
    print(table, end="")

    if not args.no_figures:
        from .figures import save_strategy_comparison

        fig_path = out.with_suffix(".png")
        save_strategy_comparison(
            [(label, _report_dict(rep) if rep is not None else {}) for label, rep in rows],
            fig_path,
        )
        outputs["figure"] = str(fig_path)

    _write_manifest(
        out,
        command="compare",
        parameters={
            "strategies": [cfg.to_dict() for cfg in configs],
            "seed": args.seed,
            "max_len": args.max_len,
            "num": len(prompt_texts),
        },
        inputs={
            "model_g": args.model_g,
            "model_i": args.model_i,
            **({"prompts": args.prompts} if args.prompts else {}),
            **({"reference": args.reference} if args.reference else {}),
        },
        outputs=outputs,
    )
    return 0


def cmd_synth_corpus(args) -> int:
    lines = corpus_mod.synthetic_corpus(
        n_lines=args.lines,
        seed=args.seed,
        vocab_size=args.vocab_size,
        zipf_exponent=args.zipf_exponent,
    )
    data = ("\n".join(lines) + "\n").encode("utf-8")
    _atomic_write(Path(args.out), data)
    print(f"wrote {len(lines)} lines ({len(data)} bytes)")
    _write_manifest(
        Path(args.out),
        command="synth-corpus",
        parameters={
            "lines": args.lines,
            "seed": args.seed,
            "vocab_size": args.vocab_size,
            "zipf_exponent": args.zipf_exponent,
        },
        inputs={},
        outputs={"corpus": str(args.out)},
    )
    return 0


# ---------------------------------------------------------------------------
# report serialization

def report_lines(report: MetricsReport) -> list[tuple[str, str]]:
    """Flat key-value rows for a report, floats fixed at 6 decimals."""
    rows: list[tuple[str, str]] = [
        ("n_sequences", str(report.n_sequences)),
        ("n_tokens", str(report.n_tokens)),
    ]
    values = _report_dict(report)
    for key in _REPORT_METRIC_FIELDS:
        rows.append((key, f"{values[key]:.{REPORT_PRECISION}f}"))
    rows.append(("eps_unit", "nats"))
    return rows


def format_kv(rows: list[tuple[str, str]]) -> str:
    return "".join(f"{k} {v}\n" for k, v in rows)


def parse_kv(text: str) -> dict[str, str]:
    out = {}
    for line in text.splitlines():
        if line.strip():
            key, value = line.split(" ", 1)
            out[key] = value
    return out


def _report_dict(report: MetricsReport) -> dict[str, float]:
    d = {
        "ppl_g": report.ppl_g,
        "ppl_i": report.ppl_i,
        "rep": report.rep,
        "zipf": report.zipf,
        "diversity": report.diversity,
        "eps_mean": report.eps_mean,
    }
    for w, v in report.rep_per_l.items():
        d[f"rep_l{w}"] = v
    return d


def _delta_lines(report: MetricsReport, ref: MetricsReport) -> list[tuple[str, str]]:
    # Deltas are taken between the rounded (serialized) values so the file is
    # internally consistent.
    a, b = _report_dict(report), _report_dict(ref)
    out = []
    for key in _REPORT_METRIC_FIELDS:
        delta = round(a[key], REPORT_PRECISION) - round(b[key], REPORT_PRECISION)
        out.append((f"delta_{key}", f"{delta:.{REPORT_PRECISION}f}"))
    return out


def _comparison_table(rows: list[tuple[str, MetricsReport | None]]) -> str:
    cols = ("ppl_g", "ppl_i", "rep", "zipf", "diversity", "eps_mean")
    lines = ["\t".join(("strategy",) + cols + ("n_sequences", "n_tokens"))]
    for label, report in rows:
        if report is None:
            lines.append("\t".join([label] + ["nan"] * (len(cols) + 2)))
            continue
        values = _report_dict(report)
        cells = [label]
        cells += [f"{values[c]:.{REPORT_PRECISION}f}" for c in cols]
        cells += [str(report.n_sequences), str(report.n_tokens)]
        lines.append("\t".join(cells))
    return "\n".join(lines) + "\n"


def _histogram_csv(histogram) -> str:
    lines = ["bin_lo,bin_hi,count"]
    for lo, hi, count in histogram:
        hi_txt = "inf" if math.isinf(hi) else f"{hi:.1f}"
        lines.append(f"{lo:.1f},{hi_txt},{count}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# helpers

def _record_to_json(model, prompt_text: str, record) -> dict:
    generated = [i for i in record.generated if i != EOS]
    return {
        "prompt": prompt_text,
        "text": " ".join(model.vocab.id_to_token[i] for i in generated),
        "token_ids": list(record.generated),
        "seed": record.seed,
        "strategy": record.strategy.to_dict(),
        "terminated_by": record.terminated_by,
        "q_log_probs": [t.log_prob_model for t in record.per_token],
        "entropies": [t.entropy for t in record.per_token],
        "epsilons": [t.epsilon for t in record.per_token],
    }


def _resolve_strategy(args) -> StrategyConfig:
    given = {
        name: getattr(args, name)
        for name in ("temperature", "k", "n", "tau")
        if getattr(args, name) is not None
    }
    needed = {"temperature": "temperature", "topk": "k", "nucleus": "n", "typical": "tau"}
    param = needed.get(args.strategy)
    for name in given:
        if name != param:
            raise UsageError(
                f"--{name} does not apply to strategy {args.strategy!r}"
            )
    kwargs = {}
    if param is not None:
        kwargs[param] = given.get(param, STRATEGY_FLAG_DEFAULTS[param])
    return StrategyConfig(args.strategy, **kwargs)


def _resolve_prompts(args, model, allow_literal: bool = True) -> list[str]:
    if allow_literal and args.prompt is not None and args.prompts is not None:
        raise UsageError("--prompt and --prompts are mutually exclusive")
    if args.prompts is not None:
        texts = _read_lines(args.prompts)
        if not texts:
            raise UsageError(f"prompts file {args.prompts!r} is empty")
    elif allow_literal and args.prompt is not None:
        texts = [args.prompt]
    else:
        texts = [""]
    num = args.num if args.num is not None else len(texts)
    if num < 1:
        raise UsageError(f"--num must be >= 1, got {num}")
    return [texts[i % len(texts)] for i in range(num)]


def _parse_strategies(raw: str) -> list[StrategyConfig]:
    configs = []
    for part in raw.split(","):
        part = part.strip()
        if not part:
            continue
        name, _, raw = part.partition(":")
        if name not in STRATEGY_KINDS:
            raise UsageError(f"unknown strategy {name!r} in --strategies")
        if name in ("greedy", "ancestral"):
            if raw:
                raise UsageError(f"strategy {name!r} takes no parameter")
            configs.append(StrategyConfig(name))
            continue
        if not raw:
            raise UsageError(f"strategy {name!r} needs a parameter, e.g. '{name}:0.95'")
        value = int(raw) if name == "topk" else float(raw)
        field = {"temperature": "temperature", "topk": "k", "nucleus": "n", "typical": "tau"}[name]
        configs.append(StrategyConfig(name, **{field: value}))
    if not configs:
        raise UsageError("--strategies selected no strategy")
    return configs


def _slug(cfg: StrategyConfig) -> str:
    if cfg.param is None:
        return cfg.kind
    return f"{cfg.kind}_{cfg.param:g}".replace(".", "p")


def _parse_lambdas(raw: str | None, order: int) -> tuple[float, ...]:
    if raw is None:
        if order == DEFAULT_ORDER:
            return DEFAULT_LAMBDAS
        raise UsageError(f"--lambdas is required when --order is not {DEFAULT_ORDER}")
    try:
        values = tuple(float(x) for x in raw.split(","))
    except ValueError as exc:
        raise UsageError(f"could not parse --lambdas {raw!r}: {exc}") from None
    return values


def _load_model(path: str):
    return ngram.load(Path(path).read_bytes())


def _read_lines(path: str) -> list[str]:
    return Path(path).read_text(encoding="utf-8").splitlines()


def _read_jsonl(path: str) -> list[dict]:
    records = []
    for i, line in enumerate(_read_lines(path), start=1):
        if not line.strip():
            continue
        try:
            records.append(json.loads(line))
        except json.JSONDecodeError as exc:
            raise UsageError(f"{path}:{i}: invalid JSON record: {exc}") from None
    return records


def _sibling(path: Path, suffix: str) -> Path:
    return path.parent / (path.stem + suffix)


def _atomic_write(path: Path, data: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".")
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _sha256(path: str) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _write_manifest(out: Path, command: str, parameters: dict, inputs: dict, outputs: dict) -> None:
    manifest = {
        "artifact": "typicalgen",
        "version": __version__,
        "command": command,
        "parameters": parameters,
        "inputs": {k: {"path": str(v), "sha256": _sha256(v)} for k, v in inputs.items()},
        "outputs": {k: {"path": str(v), "sha256": _sha256(v)} for k, v in outputs.items()},
    }
    data = (json.dumps(manifest, indent=2, sort_keys=True) + "\n").encode("utf-8")
    _atomic_write(Path(str(out) + ".manifest.json"), data)
