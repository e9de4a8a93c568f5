#!/usr/bin/env python3
"""Write FMX1 reference files with the standard library only.

usage: fmx_golden.py OUT_DIR
"""
import json
import struct
import sys
from pathlib import Path


def write_fmx(path, header, rows):
    body = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    payload = b"".join(struct.pack("<%df" % len(r), *r) for r in rows)
    path.write_bytes(b"FMX1" + struct.pack("<I", len(body)) + body + payload)


def main():
    out = Path(sys.argv[1])
    out.mkdir(parents=True, exist_ok=True)
    rows = [[0.5, -1.25, 3.0], [1024.0, 0.0, -0.0078125]]
    write_fmx(out / "golden_labelled.fmx",
              {"rows": 2, "cols": 3, "ids": ["img_a", "img_b"], "labels": ["n01443537", "n02084071"],
               "model": "resnet50", "layer": "avgpool"},
              rows)
    write_fmx(out / "golden_unlabelled.fmx",
              {"rows": 2, "cols": 3, "ids": ["img_a", "img_b"], "labels": None},
              rows)
    # Header claims 2x3 but carries only 5 floats.
    body = json.dumps({"rows": 2, "cols": 3, "ids": ["a", "b"], "labels": None}, sort_keys=True).encode()
    (out / "truncated.fmx").write_bytes(b"FMX1" + struct.pack("<I", len(body)) + body + struct.pack("<5f", *range(5)))
    (out / "bad_magic.fmx").write_bytes(b"XXXX" + struct.pack("<I", 2) + b"{}")
    with open(out / "golden.csv", "w") as f:
        f.write("id,label,f0,f1,f2\n")
        for i, r in zip(["img_a", "img_b"], rows):
            f.write(",".join([i, "n01443537" if i == "img_a" else "n02084071"] + [repr(v) for v in r]) + "\n")


if __name__ == "__main__":
    main()
