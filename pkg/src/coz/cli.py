"""Command line entry points.

Exit codes: 0 on success, 1 on configuration errors, 2 when the run finished
but some steps or metric cells failed and were substituted.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .backends import make_backend
from .chain import ConfigError, ZoomConfig, make_initial_state, run_chain
from .geometry import GeometryError
from .grpo import ToyPromptPolicy, save_curve_csv, train_toy
from .harness import (
    HarnessError,
    RunSpec,
    apply_env_endpoints,
    ingest,
    load_runspec,
    run_protocol,
)
from .montage import load_transcript_states, render_montage, save_montage
from .niqe import NiqeError, fit_niqe_model, save_model
from .prompts import NullPrompter, TagPrompter, VlmPrompter
from .rewards import offline_breakdown
from .wire import PromptClient, load_png

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_PARTIAL = 2


def _endpoints_from_args(args) -> dict[str, str]:
    endpoints = {}
    if getattr(args, "sr_url", None):
        endpoints["sr"] = args.sr_url
    if getattr(args, "vlm_url", None):
        endpoints["prompt"] = args.vlm_url
    if getattr(args, "prompt_url", None):
        endpoints["prompt"] = args.prompt_url
    if getattr(args, "metric_url", None):
        endpoints["metric"] = args.metric_url
    return apply_env_endpoints(endpoints)


def cmd_run(args) -> int:
    spec = load_runspec(args.config)
    result = run_protocol(spec)
    print(f"wrote {Path(spec.output_dir) / 'report.csv'} ({len(result.rows)} rows)")
    for line in result.skipped:
        print(f"skipped: {line}")
    return EXIT_PARTIAL if result.had_failures else EXIT_OK


def cmd_chain(args) -> int:
    endpoints = _endpoints_from_args(args)
    config = ZoomConfig(
        scale_s=args.scale,
        recursions_n=args.recursions,
        base_resolution=args.base_resolution,
        prompt_mode=args.prompt_mode,
        backend_id=args.backend,
        seed=args.seed,
    )
    config.validate()
    backend = make_backend(args.backend, sr_url=endpoints.get("sr"), timeout_s=args.timeout)
    if args.prompt_mode == "vlm":
        if not endpoints.get("prompt"):
            raise ConfigError("prompt-mode vlm requires --vlm-url or COZ_PROMPT_URL")
        prompter = VlmPrompter(PromptClient(endpoints["prompt"], timeout_s=args.timeout),
                               seed=args.seed)
    elif args.prompt_mode == "tags":
        if not args.tags:
            raise ConfigError("prompt-mode tags requires --tags")
        prompter = TagPrompter([t.strip() for t in args.tags.split(",")])
    else:
        prompter = NullPrompter()

    raw = load_png(args.input)
    if raw.shape[0] != args.base_resolution or raw.shape[1] != args.base_resolution:
        from .harness import prepare_raster

        raw, flags = prepare_raster(raw, args.base_resolution)
        for flag in flags:
            print(f"note: {flag}")
    image_id = Path(args.input).stem
    x0 = make_initial_state(raw, args.base_resolution)
    transcript = run_chain(x0, config, backend, prompter, image_id=image_id)

    out_dir = Path(args.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    tpath = transcript.save_json(out_dir / f"{image_id}_transcript.json")
    written = transcript.save_images(out_dir)
    print(f"wrote {tpath} and {len(written)} step rasters")
    for state in transcript.states:
        print(f"  step {state.index}: x{int(state.cumulative_factor)} "
              f"rect={state.source_rect.as_tuple()}")
    for err in transcript.errors:
        print(f"error at step {err.step} ({err.stage}): {err.message}")
    return EXIT_PARTIAL if transcript.errors else EXIT_OK


def cmd_eval(args) -> int:
    zoom = ZoomConfig(
        scale_s=args.scale,
        recursions_n=args.recursions,
        base_resolution=args.base_resolution,
        prompt_mode="null",
        backend_id=args.backend,
        seed=args.seed,
    )
    spec = RunSpec(
        input_dir=args.input_dir,
        output_dir=args.output_dir,
        zoom=zoom,
        methods=tuple(args.methods.split(",")),
        metrics=tuple(args.metrics.split(",")),
        endpoints=_endpoints_from_args(args),
        seed=args.seed,
        tags_file=args.tags_file,
        niqe_model_path=args.niqe_model,
        parallelism=args.parallelism,
        timeout_s=args.timeout,
    )
    result = run_protocol(spec)
    print(f"wrote {Path(args.output_dir) / 'report.csv'} ({len(result.rows)} rows)")
    return EXIT_PARTIAL if result.had_failures else EXIT_OK


def cmd_fit_niqe(args) -> int:
    prepared, skipped = ingest(args.corpus, args.base_resolution)
    model = fit_niqe_model(
        [p.image for p in prepared],
        patch_size=args.patch,
        sharpness_fraction=args.sharpness,
        min_images=args.min_images,
    )
    save_model(model, args.out)
    print(f"wrote {args.out} ({model.fit_meta.get('num_patches', 0)} patches "
          f"from {len(prepared)} images)")
    for line in skipped:
        print(f"skipped: {line}")
    return EXIT_PARTIAL if skipped else EXIT_OK


def cmd_grpo_toy(args) -> int:
    vocab_path = Path(args.vocab)
    if vocab_path.suffix.lower() == ".json":
        vocabulary = json.loads(vocab_path.read_text(encoding="utf-8"))
    else:
        vocabulary = [ln for ln in vocab_path.read_text(encoding="utf-8").splitlines() if ln]
    if not vocabulary:
        raise ConfigError(f"no candidates in {args.vocab}")
    policy = ToyPromptPolicy.uniform(vocabulary, learning_rate=args.lr)
    curve = train_toy(policy, offline_breakdown, iterations=args.iters,
                      n_gen=args.ngen, seed=args.seed)
    save_curve_csv(curve, args.out)
    probs = policy.probs()
    best = max(range(len(vocabulary)), key=lambda i: probs[i])
    print(f"wrote {args.out} ({len(curve)} rows)")
    print(f"expected reward {curve[0]['expected_reward']:.4f} -> "
          f"{curve[-1]['expected_reward']:.4f}")
    print(f"top candidate: {vocabulary[best]!r} (p={probs[best]:.4f})")
    return EXIT_OK


def cmd_montage(args) -> int:
    states, image_id = load_transcript_states(args.transcript, args.images_dir)
    result = render_montage(states, image_id=image_id)
    save_montage(result, args.out)
    print(f"wrote {args.out} ({len(result.labels)} panels: {', '.join(result.labels)})")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="coz",
        description="Recursive zoom super-resolution chains, rewards, and evaluation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute a full run from a config file")
    p_run.add_argument("--config", required=True)
    p_run.set_defaults(func=cmd_run)

    p_chain = sub.add_parser("chain", help="run one zoom chain on one image")
    p_chain.add_argument("--input", required=True)
    p_chain.add_argument("--scale", type=int, default=4)
    p_chain.add_argument("--recursions", type=int, default=4)
    p_chain.add_argument("--base-resolution", type=int, default=512)
    p_chain.add_argument("--prompt-mode", choices=["null", "tags", "vlm"], default="null")
    p_chain.add_argument("--backend", choices=["nearest", "bicubic", "remote"],
                         default="bicubic")
    p_chain.add_argument("--tags", default=None, help="comma-separated tag list")
    p_chain.add_argument("--sr-url", default=None)
    p_chain.add_argument("--vlm-url", default=None)
    p_chain.add_argument("--output-dir", default="chain_out")
    p_chain.add_argument("--seed", type=int, default=0)
    p_chain.add_argument("--timeout", type=float, default=30.0)
    p_chain.set_defaults(func=cmd_chain)

    p_eval = sub.add_parser("eval", help="evaluate methods over an image directory")
    p_eval.add_argument("--input-dir", required=True)
    p_eval.add_argument("--output-dir", default="eval_out")
    p_eval.add_argument("--methods", default="nn_interp,coz_null")
    p_eval.add_argument("--metrics", default="niqe")
    p_eval.add_argument("--scale", type=int, default=4)
    p_eval.add_argument("--recursions", type=int, default=4)
    p_eval.add_argument("--base-resolution", type=int, default=512)
    p_eval.add_argument("--backend", choices=["nearest", "bicubic", "remote"],
                        default="bicubic")
    p_eval.add_argument("--tags-file", default=None)
    p_eval.add_argument("--niqe-model", default=None)
    p_eval.add_argument("--sr-url", default=None)
    p_eval.add_argument("--prompt-url", default=None)
    p_eval.add_argument("--metric-url", default=None)
    p_eval.add_argument("--seed", type=int, default=0)
    p_eval.add_argument("--parallelism", type=int, default=1)
    p_eval.add_argument("--timeout", type=float, default=30.0)
    p_eval.set_defaults(func=cmd_eval)

    p_fit = sub.add_parser("fit-niqe", help="fit a quality model from a pristine corpus")
    p_fit.add_argument("--corpus", required=True)
    p_fit.add_argument("--out", required=True)
    p_fit.add_argument("--base-resolution", type=int, default=512)
    p_fit.add_argument("--patch", type=int, default=96)
    p_fit.add_argument("--sharpness", type=float, default=0.75)
    p_fit.add_argument("--min-images", type=int, default=20)
    p_fit.set_defaults(func=cmd_fit_niqe)

    p_toy = sub.add_parser("grpo-toy", help="train the toy categorical prompt policy")
    p_toy.add_argument("--vocab", required=True, help="text file (one per line) or JSON list")
    p_toy.add_argument("--iters", type=int, default=300)
    p_toy.add_argument("--ngen", type=int, default=2)
    p_toy.add_argument("--lr", type=float, default=0.1)
    p_toy.add_argument("--seed", type=int, default=0)
    p_toy.add_argument("--out", default="grpo_curve.csv")
    p_toy.set_defaults(func=cmd_grpo_toy)

    p_mont = sub.add_parser("montage", help="render a zoom strip from a transcript")
    p_mont.add_argument("--transcript", required=True)
    p_mont.add_argument("--images-dir", default=None)
    p_mont.add_argument("--out", default="montage.png")
    p_mont.set_defaults(func=cmd_montage)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, HarnessError, GeometryError, NiqeError, ValueError,
            FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
