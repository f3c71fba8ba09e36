#!/usr/bin/env python3
"""Validate `uncertain report --format json` against docs/report.schema.json.

Builds a mixed synthetic corpus (every archetype, three threshold modes),
renders reports from replay stats and from a campaign summary, and checks
both the schema and the cross-field rules a schema cannot express.

usage: check_report_schema.py <uncertain-binary> <schema.json> <workdir>
"""

import json
import shutil
import subprocess
import sys
from pathlib import Path

import jsonschema

ARCHETYPES = ["flooder", "virus", "spyware", "trojan", "worm", "benign-io", "benign-cpu", "apt"]
THRESHOLDS = ["0.10", "0.50", "dynamic"]


def run(cli, *args):
    proc = subprocess.run([cli, *args], capture_output=True, text=True)
    if proc.returncode != 0:
        sys.exit(f"{' '.join(args)} exited {proc.returncode}: {proc.stderr}")
    return proc.stdout


def semantic_errors(report):
    errs = []
    modes = report["modes"]
    rows = report["rows"]
    if rows[-1]["group"] != "total":
        errs.append("last row is not 'total'")
    if report["grouping"] == "byCategory":
        groups = [r["group"] for r in rows]
        if groups != ["file", "network", "process", "total"]:
            errs.append(f"byCategory rows are {groups}")
    for row in rows:
        if sorted(row["cells"]) != sorted(modes):
            errs.append(f"{row['group']}: cells {sorted(row['cells'])} do not match modes")
        for mode, cell in row["cells"].items():
            for metric, c in cell.items():
                where = f"{row['group']}/{mode}/{metric}"
                if c["perturbed"] > c["total"]:
                    errs.append(f"{where}: perturbed exceeds total")
                want = 100.0 * c["perturbed"] / c["total"] if c["total"] else 0.0
                if abs(c["percent"] - want) > 1e-9:
                    errs.append(f"{where}: percent {c['percent']} != {want}")
            for metric in ("connection", "buffer"):
                if cell[metric]["total"] > cell["all"]["total"]:
                    errs.append(f"{row['group']}/{mode}: {metric} total exceeds all")
    for mode in modes:
        for metric in report["metrics"]:
            for key in ("total", "perturbed"):
                s = sum(r["cells"][mode][metric][key] for r in rows[:-1])
                if s != rows[-1]["cells"][mode][metric][key]:
                    errs.append(f"total row {mode}/{metric}/{key} is not the column sum")
    return errs


def main():
    cli, schema_path, work = sys.argv[1], Path(sys.argv[2]), Path(sys.argv[3])
    schema = json.loads(schema_path.read_text())
    jsonschema.Draft202012Validator.check_schema(schema)
    validator = jsonschema.Draft202012Validator(schema)
    shutil.rmtree(work, ignore_errors=True)
    work.mkdir(parents=True)

    stats = []
    for i, arch in enumerate(ARCHETYPES):
        trace = work / f"{arch}.jsonl"
        run(cli, "gen", "--archetype", arch, "--events", "3000", "--seed", str(i), "--out", str(trace))
        for sset in ("intrusive", "non-intrusive"):
            for t in THRESHOLDS:
                out = work / f"{arch}-{sset}-{t}"
                run(cli, "replay", str(trace), "--threshold", t, "--strategy-set", sset, "--seed", "1",
                    "--out", str(out))
                stats.append(str(out / "stats.json"))

    corpus = {"entries": [{"id": a, "trace": f"{a}.jsonl", "repetitions": 2} for a in ARCHETYPES[:3]]}
    (work / "corpus.json").write_text(json.dumps(corpus))
    run(cli, "campaign", "--corpus", str(work / "corpus.json"), "--out", str(work / "campaign"))

    inputs = {
        "replay stats": stats,
        "campaign summary": [str(work / "campaign" / "summary.json")],
    }
    failures = 0
    for name, files in inputs.items():
        for grouping in ("byArchetype", "byCategory"):
            for sset in ("intrusive", "non-intrusive"):
                report = json.loads(run(cli, "report", "--format", "json", "--grouping", grouping,
                                        "--strategy-set", sset, *files))
                errs = [e.message for e in validator.iter_errors(report)] + semantic_errors(report)
                label = f"{name} {grouping} {sset}"
                if name == "replay stats" and grouping == "byArchetype":
                    groups = {r["group"] for r in report["rows"]}
                    if groups != set(ARCHETYPES) | {"total"}:
                        errs.append(f"rows {sorted(groups)} do not cover the corpus")
                for e in errs:
                    print(f"{label}: {e}")
                failures += len(errs)
                print(f"{label}: {'ok' if not errs else 'INVALID'}")
    sys.exit(1 if failures else 0)


if __name__ == "__main__":
    main()
