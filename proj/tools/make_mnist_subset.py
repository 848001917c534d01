#!/usr/bin/env python3
"""Write a gzipped IDX3 image file from the 5k-sample MNIST CSV shipped in mlxtend.

The CSV rows hold 784 pixel values followed by the label. Usage:

    pip download mlxtend --no-deps -d /tmp/mlx
    python3 tools/make_mnist_subset.py /tmp/mlx/mlxtend-*.whl tests/data/mnist-2500-images-idx3-ubyte.gz --count 2500
"""
import argparse
import gzip
import struct
import zipfile

CSV_MEMBER = "mlxtend/data/data/mnist_5k.csv.gz"


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("wheel")
    parser.add_argument("out")
    parser.add_argument("--count", type=int, default=2500)
    args = parser.parse_args()

    with zipfile.ZipFile(args.wheel) as whl:
        rows = gzip.decompress(whl.read(CSV_MEMBER)).decode().strip().split("\n")
    rows = rows[: args.count]

    payload = bytearray(struct.pack(">IIII", 0x00000803, len(rows), 28, 28))
    for row in rows:
        values = [int(float(v)) for v in row.split(",")[:784]]
        payload.extend(bytes(values))
    with gzip.GzipFile(args.out, "wb", mtime=0) as f:
        f.write(payload)


if __name__ == "__main__":
    main()
