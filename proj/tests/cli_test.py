"""Command-line checks: exit codes, determinism and JSON schema conformance."""

import argparse
import json
import os
import pathlib
import subprocess
import sys

import jsonschema
from referencing import Registry, Resource

parser = argparse.ArgumentParser()
parser.add_argument("--cli", required=True)
parser.add_argument("--schemas", required=True)
parser.add_argument("--workdir", required=True)
args = parser.parse_args()

work = pathlib.Path(args.workdir)
work.mkdir(parents=True, exist_ok=True)

schemas = {}
for path in pathlib.Path(args.schemas).glob("*.schema.json"):
    doc = json.loads(path.read_text())
    schemas[path.name.removesuffix(".schema.json")] = doc
registry = Registry().with_resources(
    (doc["$id"], Resource.from_contents(doc)) for doc in schemas.values()
)

failures = []


def check(cond, what):
    print(("ok   " if cond else "FAIL ") + what)
    if not cond:
        failures.append(what)


def run(*argv, env=None):
    full_env = dict(os.environ)
    full_env.pop("TRILOCAL_SEED", None)
    full_env.pop("TRILOCAL_THREADS", None)
    if env:
        full_env.update(env)
    return subprocess.run([args.cli, *argv], capture_output=True, text=True, env=full_env)


def validate(name, doc, what):
    try:
        validator = jsonschema.Draft202012Validator(schemas[name], registry=registry)
        validator.validate(doc)
        check(True, f"{what} matches {name} schema")
    except jsonschema.ValidationError as err:
        check(False, f"{what} matches {name} schema: {err.message}")


# Exit codes.
r = run("--json", "classify", "--e1", "0", "--e2", "1", "--e3", "0")
check(r.returncode == 10, "classify GHZ exits 10")
validate("verdict", json.loads(r.stdout), "classify GHZ")
r = run("classify", "--e1", "0", "--e2", "0", "--e3", "0")
check(r.returncode == 0 and "ConjecturedLocal" in r.stdout, "classify U exits 0")
r = run("--json", "classify", "--e1", "1", "--e2", "1", "--e3", "-1")
check(r.returncode == 2, "invalid behavior exits 2")
validate("verdict", json.loads(r.stdout), "classify invalid")
check(run("classify", "--e1", "0", "--bogus", "1").returncode == 2, "unknown flag exits 2")
check(run("w5", "--e1", "1", "--e2", "-1").returncode == 2, "w5 outside tetrahedron exits 2")
check(run("fit", "--target", "0,0").returncode == 2, "malformed target exits 2")

# Rounded input near the known tangency.
r = run("--json", "w5", "--e1", "0.3333333", "--e2", "-0.1851852")
doc = json.loads(r.stdout)
check(r.returncode == 0 and doc["status"] == "Feasible" and abs(doc["e3"] + 0.5556) < 1e-4,
      "w5 at rounded (1/3, -5/27) gives e3 = -0.5556")
validate("w5_solution", doc, "w5 feasible")
r = run("--json", "w5", "--e1", "0", "--e2", "0")
validate("w5_solution", json.loads(r.stdout), "w5 infeasible")

# Boundary samples.
r = run("--json", "--seed", "3", "sample-boundary", "--family", "w3-flipped", "--n", "5")
validate("boundary_samples", json.loads(r.stdout), "sample-boundary")
r = run("--csv", "--seed", "3", "sample-boundary", "--family", "ghz", "--n", "4")
lines = r.stdout.strip().splitlines()
check(lines[0] == "family,x,y,e1,e2,e3" and len(lines) == 5, "sample-boundary CSV layout")

# Fits: schema, determinism and thread independence.
fit = ["fit", "--target", "0.1,0.2,-0.1", "--cards", "2,2,2", "--restarts", "8"]
a = run("--json", "--seed", "5", *fit)
b = run("--json", "--seed", "5", "--threads", "3", *fit)
c = run("--json", *fit, env={"TRILOCAL_SEED": "5"})
validate("search_result", json.loads(a.stdout), "fit")
check(a.stdout == b.stdout, "fit output independent of thread count")
check(a.stdout == c.stdout, "seed from environment")
check(run("--json", "--seed", "6", *fit).stdout != a.stdout, "different seed changes fit")
out_file = work / "fit.json"
run("--json", "--seed", "5", "--out", str(out_file), *fit)
check(out_file.read_text() == a.stdout, "--out writes the same bytes")

# Configuration files.
cfg = work / "config.json"
cfg.write_text(json.dumps({"restarts": 8, "cards": [2, 2, 2]}))
d = run("--json", "--seed", "5", "--config", str(cfg), "fit", "--target", "0.1,0.2,-0.1")
check(d.stdout == a.stdout, "config file supplies search defaults")
cfg.write_text(json.dumps({"restart": 8}))
check(run("--config", str(cfg), "fit", "--target", "0,0,0").returncode == 2,
      "unknown config key exits 2")

# Scan.
scan = ["scan", "--plane", "anchors:U,Dplus,W", "--res", "3", "--cards", "2,2,2",
        "--restarts", "4"]
s1 = run("--json", "--seed", "1", *scan)
s2 = run("--json", "--seed", "1", "--threads", "2", *scan)
doc = json.loads(s1.stdout)
validate("scan_report", doc, "scan")
validate("search_config", doc["config"], "scan config")
scan_lines = [l for l in s1.stdout.splitlines() if '"threads"' not in l]
check(scan_lines == [l for l in s2.stdout.splitlines() if '"threads"' not in l],
      "scan identical across thread counts apart from the echoed setting")
check(run("scan", "--plane", "E4=0").returncode == 2, "bad plane exits 2")
r = run("--csv", "--seed", "1", "scan", "--plane", "3E1+E3=0", "--res", "2", "--cards", "2,2,2",
        "--restarts", "2")
check(r.stdout.splitlines()[0] == "e1,e2,e3,rms", "scan CSV header")

# Validation.
v = run("--json", "--seed", "2", "validate", "--family", "ghz", "--n", "2", "--disp", "0.01",
        "--cards", "2,2,2", "--restarts", "4")
validate("validation_report", json.loads(v.stdout), "validate")

# Figure data.
fig_dir = work / "figures"
r = run("--seed", "1", "--out", str(fig_dir), "figures", "--res", "2", "--n", "1",
        "--cards", "2,2,2", "--restarts", "2")
expected = ["plane_3e1+e3=0.csv", "plane_e1+e2-e3=1.csv", "plane_e1=0.csv",
            "plane_e1-2e2+e3=0.csv", "boundary_samples.csv", "nsi_curve.csv",
            "e1zero_boundary.csv"]
check(r.returncode == 0 and all((fig_dir / f).is_file() for f in expected),
      "figures writes every data file")

print(f"{len(failures)} failure(s)")
sys.exit(1 if failures else 0)
