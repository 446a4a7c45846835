"""Runs each CLI command on small synthetic inputs and validates every JSON
output against the shipped schemas."""

import json
import math
import random
import subprocess
import sys
import tempfile
from pathlib import Path

import jsonschema
from referencing import Registry, Resource

GRID = ["--lambda", "1e-4,1e-2", "--mu", "0.01,0.1,1", "--folds", "5"]


def load_schemas(schema_dir):
    schemas = {}
    for path in sorted(Path(schema_dir).glob("*.schema.json")):
        schemas[path.name] = json.loads(path.read_text())
    registry = Registry().with_resources(
        (name, Resource.from_contents(s)) for name, s in schemas.items()
    )
    return schemas, registry


def validate(doc_path, schema_name, schemas, registry):
    cls = jsonschema.validators.validator_for(schemas[schema_name])
    cls.check_schema(schemas[schema_name])
    validator = cls(schemas[schema_name], registry=registry)
    errors = sorted(validator.iter_errors(json.loads(Path(doc_path).read_text())), key=str)
    for e in errors:
        print(f"{doc_path}: {schema_name}: {e.message} at {list(e.absolute_path)}")
    return not errors


def run(tool, *args):
    proc = subprocess.run([tool, *args], capture_output=True, text=True)
    if proc.returncode != 0:
        print(f"command failed ({proc.returncode}): {' '.join(args)}\n{proc.stderr}")
        sys.exit(1)


def main():
    tool, schema_dir = sys.argv[1], sys.argv[2]
    schemas, registry = load_schemas(schema_dir)
    with tempfile.TemporaryDirectory() as tmp:
        out = Path(tmp)
        common = ["--seed", "3", "--out-dir", str(out)]
        run(tool, "gen", "--curve", "sigmoid", "--n", "100", "--sigma", "0.3", *common)
        run(tool, "fit", str(out / "gen.csv"), *GRID, *common)
        run(tool, "test", str(out / "gen.csv"), "--R", "20", *GRID, *common)

        rng = random.Random(5)
        t = sorted(rng.random() for _ in range(40))
        with open(out / "matrix.csv", "w") as f:
            f.write("time,up,wave\n")
            for v in t:
                f.write(f"{v},{v + rng.gauss(0, 0.05)},{math.sin(6 * v) + rng.gauss(0, 0.05)}\n")
        (out / "ann.csv").write_text("series,term\nup,A\nwave,A\nwave,B\n")
        run(tool, "screen", str(out / "matrix.csv"), "--annotation", str(out / "ann.csv"),
            "--R", "10", *GRID, *common)

        (out / "fit_spec.json").write_text(json.dumps({
            "experiment": "fit", "curves": ["x2", "SE-1"], "sigmas": [0.5], "n": 40, "R": 3,
            "baseline": "smoothing_spline", "strategy": "shrinkage",
            "grid": {"mu": [0.01, 0.1], "lambda": [1e-4, 1e-2], "k": [0.5, 0.9], "folds": 5}}))
        run(tool, "simulate", str(out / "fit_spec.json"), "--out", "simfit", *common)
        (out / "sp_spec.json").write_text(json.dumps({
            "experiment": "size_power", "curves": ["x"], "sigmas": [0.1], "ns": [40], "n_sims": 2,
            "R": 5, "grid": {"mu": [0.01, 0.1], "lambda": [1e-4, 1e-2], "folds": 5}}))
        run(tool, "simulate", str(out / "sp_spec.json"), "--out", "simsp", *common)

        checks = [
            ("fit.json", "fit.schema.json"),
            ("test.json", "test.schema.json"),
            ("screen.json", "screen.schema.json"),
            ("simfit_diagnostics.json", "simulate.schema.json"),
            ("simsp_diagnostics.json", "simulate.schema.json"),
        ]
        checks += [(p.name, "manifest.schema.json") for p in sorted(out.glob("*.manifest.json"))]
        ok = all([validate(out / doc, schema, schemas, registry) for doc, schema in checks])
        print(f"validated {len(checks)} documents: {'ok' if ok else 'FAILED'}")
        sys.exit(0 if ok else 1)


if __name__ == "__main__":
    main()
