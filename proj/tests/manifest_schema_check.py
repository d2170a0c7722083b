#!/usr/bin/env python3
# Bakes a small bundle with the CLI and validates its manifest against the
# published JSON schema. Usage: manifest_schema_check.py <featvid> <scene> <schema> <workdir>
import json
import pathlib
import shutil
import subprocess
import sys

import jsonschema

cli, scene, schema_path, work = sys.argv[1:5]
work = pathlib.Path(work)
shutil.rmtree(work, ignore_errors=True)
work.mkdir(parents=True)

schema = json.loads(pathlib.Path(schema_path).read_text())
jsonschema.Draft202012Validator.check_schema(schema)
validator = jsonschema.Draft202012Validator(schema)

failures = 0
for label, extra in (("lossless", []), ("q4", ["--q", "4"]), ("split", ["--theta", "1400"])):
    out = work / label
    subprocess.run([cli, "--workers", "1", "bake", "--scene", scene, "--out", str(out), *extra], check=True,
                   stdout=subprocess.DEVNULL)
    manifest = json.loads((out / "manifest.json").read_text())
    errors = sorted(validator.iter_errors(manifest), key=str)
    for e in errors:
        print(f"{label}: {e.json_path}: {e.message}")
    failures += len(errors)
    # every uri resolves to a file of the stated size
    refs = [manifest["mlp"]] + [g[k] for g in manifest["groups"] for k in ("stream", "mapping", "occupancy")]
    for r in refs:
        size = (out / r["uri"]).stat().st_size
        if size != r["bytes"]:
            print(f"{label}: {r['uri']} is {size} bytes, manifest says {r['bytes']}")
            failures += 1
    print(f"{label}: {len(manifest['groups'])} groups, {len(errors)} schema errors")

# a manifest with an unknown key must be rejected
manifest["unexpected"] = 1
if validator.is_valid(manifest):
    print("schema accepted an unknown top-level key")
    failures += 1

sys.exit(1 if failures else 0)
