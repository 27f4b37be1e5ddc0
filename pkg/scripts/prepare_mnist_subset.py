"""Write the 5000-digit MNIST subset shipped inside mlxtend as IDX files.

The full MNIST files are not needed for the desk-scale experiments; this
subset (500 examples per class, raw 0-255 pixels) is converted once into
``train-images-idx3-ubyte.gz`` / ``train-labels-idx1-ubyte.gz`` so that the
rest of the pipeline reads the same format as the full dataset.

    pip install mlxtend
    python scripts/prepare_mnist_subset.py data/mnist5k
"""

import argparse
import gzip
import importlib.util
from pathlib import Path

import numpy as np

from lowres.data import write_idx


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("out_dir", type=Path)
    args = ap.parse_args()

    found = importlib.util.find_spec("mlxtend")
    if found is None:
        raise SystemExit("mlxtend is not installed (pip install mlxtend)")
    src = Path(found.origin).parent / "data" / "data" / "mnist_5k.csv.gz"
    table = np.loadtxt(src, delimiter=",", dtype=np.int64)
    images = table[:, :-1].astype(np.uint8).reshape(-1, 28, 28)
    labels = table[:, -1].astype(np.uint8)

    args.out_dir.mkdir(parents=True, exist_ok=True)
    for name, arr in (("train-images-idx3-ubyte.gz", images), ("train-labels-idx1-ubyte.gz", labels)):
        # mtime=0 keeps the gzip bytes reproducible
        with gzip.GzipFile(args.out_dir / name, "wb", mtime=0) as f:
            f.write(write_idx(arr))
    print(f"wrote {len(labels)} examples to {args.out_dir}")


if __name__ == "__main__":
    main()
