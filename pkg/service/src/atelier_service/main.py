"""CLI launcher: flags or a JSON config file mirroring ServiceConfig."""

from __future__ import annotations

import argparse

import uvicorn

from .app import create_app
from .config import Mode, ServiceConfig


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="atelier-refiner-service")
    parser.add_argument("--config", help="JSON config file (flags override it)")
    parser.add_argument("--mode", choices=[m.value for m in Mode])
    parser.add_argument("--host")
    parser.add_argument("--port", type=int)
    parser.add_argument("--max-tile-px", type=int)
    parser.add_argument("--model", help="TorchScript model path for real modes")
    return parser


def config_from_args(args) -> ServiceConfig:
    base = ServiceConfig.from_file(args.config) if args.config else ServiceConfig()
    return ServiceConfig(
        mode=Mode(args.mode) if args.mode else base.mode,
        max_tile_px=args.max_tile_px or base.max_tile_px,
        model=args.model or base.model,
        host=args.host or base.host,
        port=args.port if args.port is not None else base.port,
        texture_amplitude_lsb=base.texture_amplitude_lsb)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    config = config_from_args(args)
    uvicorn.run(create_app(config), host=config.host, port=config.port,
                log_level="info")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
