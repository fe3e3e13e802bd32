"""Command-line interface.

Exit codes: 0 on success (including an empty input directory), 1 on a
contract violation or unavailable model, 2 when the batch finished but
skipped some images.
"""

from __future__ import annotations

import argparse
import sys

from .config import AdapterConfig, load_classes
from .errors import AdapterError
from .runner import predict_masks

EXIT_OK = 0
EXIT_CONTRACT = 1
EXIT_PARTIAL = 2


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="seg-adapter",
        description="Segment a directory of images into indexed PNG masks.")
    parser.add_argument("--model", required=True,
                        help="backend name; 'luma-bands' is the builtin")
    parser.add_argument("--classes", required=True,
                        help="text file, one class name per line in label order")
    parser.add_argument("--in", dest="input_dir", required=True,
                        help="directory of input images")
    parser.add_argument("--out", dest="output_dir", required=True,
                        help="directory to write <pair_id>.png masks into")
    parser.add_argument("--device", default="cpu")
    parser.add_argument("--prompt-template", default="{name}",
                        help="text prompt per class; '{name}' is replaced")
    return parser


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        config = AdapterConfig(model=args.model,
                               class_names=load_classes(args.classes),
                               input_dir=args.input_dir,
                               output_dir=args.output_dir,
                               device=args.device,
                               prompt_template=args.prompt_template)
        report = predict_masks(config)
    except AdapterError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONTRACT
    print(f"wrote {len(report.written)} masks to {config.output_dir}")
    for pair_id, reason in report.skipped:
        print(f"skipped {pair_id}: {reason}", file=sys.stderr)
    return EXIT_PARTIAL if report.skipped else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
