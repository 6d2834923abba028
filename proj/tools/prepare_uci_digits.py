#!/usr/bin/env python3
"""Convert the UCI Multiple Features (mfeat) files into a dmvc dataset.

Expects mfeat-fou, mfeat-fac, mfeat-kar, mfeat-pix, mfeat-zer and mfeat-mor
(whitespace-separated, 2000 rows, 200 per digit in order) in --src.
Writes one CSV per view, labels.txt and manifest.json into --out.
"""

import argparse
import json
import pathlib
import sys

VIEWS = {"pix": 240, "fou": 76, "fac": 216, "zer": 47, "kar": 64, "mor": 6}


def read_view(path, dim):
    rows = []
    with open(path) as f:
        for line_no, line in enumerate(f, 1):
            cells = line.split()
            if not cells:
                continue
            if len(cells) != dim:
                sys.exit(f"{path}:{line_no}: expected {dim} values, got {len(cells)}")
            rows.append(cells)
    return rows


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--src", required=True, type=pathlib.Path, help="directory holding the mfeat-* files")
    ap.add_argument("--out", default="data/uci-digits", type=pathlib.Path)
    ap.add_argument("--views", nargs="+", default=list(VIEWS), choices=list(VIEWS))
    args = ap.parse_args()

    args.out.mkdir(parents=True, exist_ok=True)
    manifest = {"name": "uci-digits", "n": 2000, "clusters": 10, "likelihood": "gaussian", "views": [],
                "labels": "labels.txt"}
    for name in args.views:
        path = args.src / f"mfeat-{name}"
        if not path.exists():
            sys.exit(f"missing {path}")
        rows = read_view(path, VIEWS[name])
        if len(rows) != 2000:
            sys.exit(f"{path}: expected 2000 rows, got {len(rows)}")
        with open(args.out / f"{name}.csv", "w") as f:
            f.writelines(",".join(r) + "\n" for r in rows)
        manifest["views"].append({"name": name, "dim": VIEWS[name], "path": f"{name}.csv"})

    with open(args.out / "labels.txt", "w") as f:
        f.writelines(f"{i // 200}\n" for i in range(2000))
    with open(args.out / "manifest.json", "w") as f:
        json.dump(manifest, f, indent=2)
        f.write("\n")
    print(f"wrote {args.out / 'manifest.json'}")


if __name__ == "__main__":
    main()
