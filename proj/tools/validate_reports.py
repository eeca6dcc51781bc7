#!/usr/bin/env python3
"""Validate stdd JSON reports and artifacts against the schemas directory."""
import argparse
import json
import pathlib
import sys

import jsonschema

KIND_TO_SCHEMA = {
    "selftest": "selftest",
    "flops": "flops",
    "runtime": "runtime",
    "encode": "encode",
    "zeroshot": "zeroshot",
    "train": "train",
    "askg_build": "askg_build",
    "askg_prompts": "askg_prompts",
}


def schema_for(doc):
    if "kind" in doc:
        return KIND_TO_SCHEMA.get(doc["kind"])
    if "triples" in doc:
        return "graph"
    if "combined" in doc:
        return "prompt_bank"
    return None


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("schemas", type=pathlib.Path)
    ap.add_argument("files", nargs="+", type=pathlib.Path)
    ap.add_argument("--schema", help="force one schema name for every file")
    args = ap.parse_args()

    failed = 0
    for path in args.files:
        try:
            doc = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as e:
            print(f"FAIL {path}: {e}")
            failed += 1
            continue
        name = args.schema or schema_for(doc)
        if name is None:
            print(f"FAIL {path}: cannot tell which schema applies")
            failed += 1
            continue
        schema = json.loads((args.schemas / f"{name}.schema.json").read_text())
        errors = sorted(jsonschema.Draft202012Validator(schema).iter_errors(doc), key=lambda e: list(e.path))
        if errors:
            failed += 1
            for e in errors[:5]:
                print(f"FAIL {path} [{name}] /{'/'.join(map(str, e.path))}: {e.message}")
        else:
            print(f"ok   {path} [{name}]")
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
