#!/usr/bin/env python3
"""Generate a synthetic legal corpus plus benchmark files.

Writes ``corpus/<domain>/<doc>.txt`` and ``benchmarks/<domain>.json``
under the destination directory. The output is a pure function of the
seed, so regenerating with the same arguments is byte-stable.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from lexrag import synthetic


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("dest", type=Path, help="directory to write the dataset into")
    parser.add_argument("--seed", type=int, default=7)
    parser.add_argument("--queries", type=int, default=100)
    parser.add_argument("--docs-per-domain", type=int, default=5)
    parser.add_argument("--min-doc-chars", type=int, default=2000)
    args = parser.parse_args(argv)

    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")

    data = synthetic.generate(
        seed=args.seed,
        n_queries=args.queries,
        docs_per_domain=args.docs_per_domain,
        min_doc_chars=args.min_doc_chars,
    )
    written = synthetic.write_dataset(data, args.dest)
    print(f"corpus files:    {len(written['corpus'])}")
    print(f"benchmark files: {len(written['benchmarks'])}")
    print(f"queries:         {len(data.queries)}")
    print(f"root:            {args.dest}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
