#!/usr/bin/env python3
"""Write one experiment config per A/D/U toggle combination.

Usage: ablation_grid.py BASE_CONFIG OUT_DIR [--zcae PATH]

Each config is the base with its A, D and U toggles set and "output" pointing
at a per-combination run directory. C keeps the base config's value. A run.sh next to them runs every
combination (pretrain when U is on, then finetune).
"""
import argparse
import itertools
import json
import os
import shlex


def combo_name(a, d, u):
    name = "".join(flag for flag, on in zip("ADU", (a, d, u)) if on)
    return name or "baseline"


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("base")
    parser.add_argument("out")
    parser.add_argument("--zcae", default="zcae", help="path to the zcae binary")
    args = parser.parse_args()

    with open(args.base) as f:
        base = json.load(f)
    base_dir = os.path.dirname(os.path.abspath(args.base))
    os.makedirs(args.out, exist_ok=True)

    data = base.get("data", {})
    for key in ("train", "test", "unlabeled"):
        if key in data:
            data[key] = [p if os.path.isabs(p) else os.path.join(base_dir, p) for p in data[key]]

    lines = ["#!/bin/sh", "set -e"]
    for a, d, u in itertools.product((False, True), repeat=3):
        name = combo_name(a, d, u)
        cfg = json.loads(json.dumps(base))
        augment = cfg.setdefault("augment", {})
        augment.update({"A": a, "D": d, "U": u})
        cfg["output"] = os.path.join("runs", name)
        path = os.path.join(args.out, name + ".json")
        with open(path, "w") as f:
            json.dump(cfg, f, indent=2)
            f.write("\n")
        quoted = shlex.quote(name + ".json")
        if u:
            lines.append(f"{shlex.quote(args.zcae)} pretrain --config {quoted}")
        lines.append(f"{shlex.quote(args.zcae)} finetune --config {quoted}")
    script = os.path.join(args.out, "run.sh")
    with open(script, "w") as f:
        f.write("\n".join(lines) + "\n")
    os.chmod(script, 0o755)
    print(f"wrote 8 configs and {script}")


if __name__ == "__main__":
    main()
