"""Launcher: mmsurrogate-adapter --transport stdio --model synthetic:<path>."""

from __future__ import annotations

import argparse
import sys

from .config import AdapterConfig
from .models import load_model
from .server import serve_http, serve_stdio


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="mmsurrogate-adapter",
        description="Reference predictor server for the mask-only wire protocol",
    )
    parser.add_argument("--transport", choices=("stdio", "http"), default="stdio")
    parser.add_argument(
        "--model", required=True, help="synthetic:<model.json> | hook:<module-or-file>"
    )
    parser.add_argument("--placeholder", default="¤masked¤",
                        help="word substituted for inactivated tokens")
    parser.add_argument("--mean-std-k", dest="mean_std_k", type=float, default=2.0)
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8972)
    args = parser.parse_args(argv)
    try:
        config = AdapterConfig(
            transport=args.transport,
            model=args.model,
            placeholder=args.placeholder,
            mean_std_k=args.mean_std_k,
            host=args.host,
            port=args.port,
        )
        model = load_model(config.model)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if config.transport == "stdio":
        return serve_stdio(model, config)
    return serve_http(model, config)


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
