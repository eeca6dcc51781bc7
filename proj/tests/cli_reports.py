#!/usr/bin/env python3
"""Run every stdd subcommand, check report contents and validate them against the schemas."""
import json
import pathlib
import subprocess
import sys
import tempfile

stdd, source = sys.argv[1], pathlib.Path(sys.argv[2])
failures = []


def run(name, *args, code=0):
    out = work / f"{name}.json"
    proc = subprocess.run([stdd, "--report", str(out), *args], capture_output=True, text=True)
    if code is not None and proc.returncode != code:
        failures.append(f"{name}: exit {proc.returncode}, expected {code}\n{proc.stderr[-1000:]}")
    return out


def check(cond, msg):
    if not cond:
        failures.append(msg)


with tempfile.TemporaryDirectory() as tmp:
    work = pathlib.Path(tmp)
    reports = [
        run("selftest", "selftest"),
        run("flops", "bench-flops"),
        run("encode", "encode", "--synthetic", "moving_square"),
        run("zeroshot_a", "zeroshot"),
        run("zeroshot_b", "zeroshot", "--threads", "2"),
        run("train", "--set", "steps=5", "train-toy", code=None),
        run("askg_build", "askg", "build", "--classes", str(source / "data/classes.txt"),
            "--fixtures", str(source / "data/fixtures/askg"), "--out", str(work / "graphs")),
        run("askg_prompts", "askg", "prompts", "--graph", str(work / "graphs"), "--out", str(work / "prompts")),
    ]
    runtime = work / "runtime.json"
    subprocess.run([stdd, "--report", str(runtime), "bench-runtime", "--frames", "1", "2", "--patches", "4",
                    "--repeats", "1"], capture_output=True)
    reports.append(runtime)

    check((work / "zeroshot_a.json").read_bytes() == (work / "zeroshot_b.json").read_bytes(),
          "zeroshot reports differ between runs")
    graphs = sorted((work / "graphs").glob("*.json"))
    check(len(graphs) == 3, f"expected 3 graphs, got {len(graphs)}")
    banks = {b["action"]: (b["spatial"], b["temporal"])
             for b in json.loads((work / "askg_prompts.json").read_text())["banks"]}
    check(banks == {"archery": (13, 6), "surfing": (13, 6), "clean and jerk": (18, 4)}, f"bank counts {banks}")
    feats = json.loads((work / "encode.json").read_text())["features"]
    check(all(abs(sum(x * x for x in row) - 1) < 1e-9 for row in feats), "encode rows are not unit norm")

    files = [str(p) for p in reports if p.exists()] + [str(p) for p in graphs]
    files += [str(p) for p in sorted((work / "prompts").glob("*.json"))]
    proc = subprocess.run([sys.executable, str(source / "tools/validate_reports.py"), str(source / "schemas"), *files],
                          capture_output=True, text=True)
    print(proc.stdout, end="")
    check(proc.returncode == 0, "schema validation failed")

for f in failures:
    print("FAIL", f)
sys.exit(1 if failures else 0)
