import argparse
import sys

from .config import DEFAULT_MAX_LEN, DEFAULT_TEMPLATE, AdapterConfig, ConfigError
from .serve import serve


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="metatune-hf-adapter",
        description="Serve Yes/No probabilities over the metatune line protocol.",
    )
    parser.add_argument(
        "--model", default="stub:hash",
        help="HuggingFace model id, or stub:hash | stub:constant:<p> | stub:equal",
    )
    parser.add_argument("--device", default="cpu")
    parser.add_argument("--max-len", type=int, default=DEFAULT_MAX_LEN)
    parser.add_argument(
        "--template", default=DEFAULT_TEMPLATE,
        help="prompt template with {question} and {context} slots, each exactly once",
    )
    args = parser.parse_args(argv)
    try:
        config = AdapterConfig(model=args.model, device=args.device,
                               max_len=args.max_len, template=args.template)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    return serve(config)


if __name__ == "__main__":
    sys.exit(main())
