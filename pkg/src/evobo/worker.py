"""Wire-protocol worker entry for the native reference optimizers.

Usage: python -m evobo.worker <name>

Speaks the ask/tell protocol on standard streams, so the reference
optimizers can be exercised through the exact same path as external
candidates.
"""

from __future__ import annotations

import sys

from .optimizers import REGISTRY
from .protocol import worker_main


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    if len(argv) != 1:
        print(f"usage: python -m evobo.worker <{'|'.join(sorted(REGISTRY))}>", file=sys.stderr)
        return 2
    name = argv[0]
    factory = REGISTRY.get(name)
    if factory is None:
        print(f"unknown optimizer {name!r}; registered: {sorted(REGISTRY)}", file=sys.stderr)
        return 2
    return worker_main(factory, sys.stdin, sys.stdout)


if __name__ == "__main__":
    sys.exit(main())
