#!/usr/bin/env python3
"""
Chromosome Straightening Startup Script

Runs the straightkit command line from a source checkout without
installing the package:
    python start_straightening.py pipeline --input chromosome.png --out results
"""

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent.absolute() / "src"))

from straightkit.cli import build_parser, main  # noqa: E402

EXAMPLES = (
    "python start_straightening.py synth --canvas 64 --count 5 --out synth_cases --no-invert",
    "python start_straightening.py backbone --input chromosome.png --out backbone",
    "python start_straightening.py pipeline --input chromosome.png --out results --k 1000",
    "python start_straightening.py eval --cases synth_cases --out report",
)


if __name__ == "__main__":
    if len(sys.argv) == 1:
        build_parser().print_help()
        for example in EXAMPLES:
            print(f"\n🔍 Example: {example}")
        sys.exit(0)
    sys.exit(main(sys.argv[1:]))
