"""Command line entry point.

Examples:
  coz-server --mode stub --port 8900
  coz-server --mode stub --roles sr --port 8900
  coz-server --mode stub --prompt-text "fur, whiskers" --metric niqe=9.8260
  coz-server --mode real --prompt-model Qwen/Qwen2.5-VL-3B-Instruct \
      --critic-model Qwen/Qwen2.5-VL-3B-Instruct --roles prompt,critic --device cuda
"""

from __future__ import annotations

import argparse
import sys

from .app import ModelServer, ServerStartupError
from .config import ConfigError, ROLES, ServerConfig, load_config


def _parse_metric_pairs(pairs: list[str]) -> dict[str, float]:
    values = {}
    for pair in pairs:
        name, sep, val = pair.partition("=")
        if not sep or not name:
            raise ConfigError(f"--metric expects name=value, got {pair!r}")
        try:
            values[name] = float(val)
        except ValueError as exc:
            raise ConfigError(f"--metric value for {name!r} is not a number") from exc
    return values


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="coz-server",
                                 description="Serve the three zoom-chain endpoints")
    ap.add_argument("--config", default=None, help="JSON or TOML config file")
    ap.add_argument("--mode", choices=["stub", "real"], default=None)
    ap.add_argument("--host", default=None)
    ap.add_argument("--port", type=int, default=None)
    ap.add_argument("--roles", default=None,
                    help=f"comma-separated subset of {','.join(ROLES)}")
    ap.add_argument("--device", default=None)
    ap.add_argument("--max-concurrent", type=int, default=None)
    ap.add_argument("--prompt-text", default=None, help="stub prompt reply")
    ap.add_argument("--critic-text", default=None, help="stub critic reply")
    ap.add_argument("--metric", action="append", default=[],
                    help="stub metric value as name=value; repeatable")
    ap.add_argument("--default-metric", type=float, default=None)
    for role in ROLES:
        ap.add_argument(f"--{role}-model", default=None,
                        help=f"model path/id for the {role} role (real mode)")
    return ap


def build_config(args: argparse.Namespace) -> ServerConfig:
    config = load_config(args.config) if args.config else ServerConfig()
    if args.mode is not None:
        config.mode = args.mode
    if args.host is not None:
        config.host = args.host
    if args.port is not None:
        config.port = args.port
    if args.roles is not None:
        config.roles = tuple(r.strip() for r in args.roles.split(",") if r.strip())
    if args.device is not None:
        config.device = args.device
    if args.max_concurrent is not None:
        config.max_concurrent = args.max_concurrent
    if args.prompt_text is not None:
        config.stub_prompt_text = args.prompt_text
    if args.critic_text is not None:
        config.stub_critic_text = args.critic_text
    if args.metric:
        config.stub_metrics = {**config.stub_metrics, **_parse_metric_pairs(args.metric)}
    if args.default_metric is not None:
        config.stub_default_metric = args.default_metric
    for role in ROLES:
        model = getattr(args, f"{role}_model")
        if model is not None:
            config.models[role] = model
    config.validate()
    return config


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = build_config(args)
        server = ModelServer(config)
    except (ConfigError, ServerStartupError, OSError,
            FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    roles = ",".join(r for r in ROLES if r in server.engines)
    print(f"serving {config.mode} mode [{roles}] on {server.url}", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.close()
    return 0


if __name__ == "__main__":
    sys.exit(main())
