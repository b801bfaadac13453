#!/usr/bin/env python3
"""Convert the digit JSON files shipped in the `mnist` npm package into IDX.

The npm package stores each 28x28 image as 784 floats rounded to three
decimals of byte/255, so the original bytes are recovered exactly by
round(v * 255).

    npm pack mnist && tar xzf mnist-*.tgz
    python3 tools/import_npm_mnist.py package/src/digits data/mnist --digits 1,7
"""
import argparse
import json
import pathlib
import struct


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("digits_dir")
    ap.add_argument("out_prefix")
    ap.add_argument("--digits", default="0,1,2,3,4,5,6,7,8,9")
    args = ap.parse_args()

    images, labels = bytearray(), bytearray()
    count = 0
    for digit in (int(d) for d in args.digits.split(",")):
        flat = json.loads(pathlib.Path(args.digits_dir, f"{digit}.json").read_text())["data"]
        if len(flat) % 784:
            raise SystemExit(f"{digit}.json: length {len(flat)} is not a multiple of 784")
        for v in flat:
            b = round(v * 255)
            if not 0 <= b <= 255 or abs(b / 255 - v) > 6e-4:
                raise SystemExit(f"{digit}.json: value {v} is not a quantized byte")
            images.append(b)
        n = len(flat) // 784
        labels.extend([digit] * n)
        count += n

    out = pathlib.Path(args.out_prefix)
    out.parent.mkdir(parents=True, exist_ok=True)
    pathlib.Path(f"{out}-images.idx3-ubyte").write_bytes(
        struct.pack(">IIII", 0x803, count, 28, 28) + bytes(images))
    pathlib.Path(f"{out}-labels.idx1-ubyte").write_bytes(
        struct.pack(">II", 0x801, count) + bytes(labels))
    print(f"wrote {count} images to {out}-*")


if __name__ == "__main__":
    main()
