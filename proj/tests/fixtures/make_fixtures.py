#!/usr/bin/env python3
"""Regenerates the checked-in binary and JSON fixtures.

Standalone writer of the RSD1 dump layout, kept independent of the C++ code
so the reader is tested against a second implementation.
"""
import json
import math
import struct
from pathlib import Path

HERE = Path(__file__).resolve().parent

LABELS = {"non_conflict": 0, "role_setting": 1, "role_profile": 2,
          "factual_knowledge": 3, "absent_knowledge": 4}


def header(model_id, hidden_dim, count, magic=b"RSD1", version=1, dtype=0):
    mid = model_id.encode()
    return (magic + struct.pack("<HBI", version, dtype, hidden_dim)
            + struct.pack("<I", len(mid)) + mid + struct.pack("<Q", count))


def record(query_id, label, layer, position, values):
    qid = query_id.encode()
    return (struct.pack("<I", len(qid)) + qid + struct.pack("<BHi", label, layer, position)
            + struct.pack("<%df" % len(values), *values))


def golden_values(q, layer, hidden):
    # Multiples of 1/16 are exact in 32-bit floats.
    return [((q * 7 + layer * 5 + k * 3) % 33 - 16) / 16.0 for k in range(hidden)]


def write_golden():
    hidden, layers = 32, [0, 1]
    queries = [("q0", "non_conflict"), ("q1", "role_setting"),
               ("q2", "factual_knowledge"), ("q3", "absent_knowledge")]
    recs, manifest_records = [], []
    for qi, (qid, label) in enumerate(queries):
        for layer in layers:
            vals = golden_values(qi, layer, hidden)
            recs.append(record(qid, LABELS[label], layer, -1, vals))
            manifest_records.append({"query_id": qid, "label": label, "layer": layer,
                                     "position": -1, "values": vals})
    data = header("tiny-test-model", hidden, len(recs)) + b"".join(recs)
    (HERE / "golden_dump.rsd").write_bytes(data)
    manifest = {"model_id": "tiny-test-model", "hidden_dim": hidden, "n_records": len(recs),
                "per_layer_counts": {str(l): len(queries) for l in layers},
                "file_size": len(data), "records": manifest_records}
    (HERE / "golden_dump.manifest.json").write_text(json.dumps(manifest, indent=1) + "\n")
    (HERE / "empty_dump.rsd").write_bytes(header("tiny-test-model", hidden, 0))


def write_malformed():
    hidden = 4
    good = record("q0", 0, 0, -1, [0.5, -0.5, 1.0, 2.0])
    out = HERE / "malformed"
    cases = {
        "bad_magic.rsd": header("m", hidden, 1, magic=b"RSD0") + good,
        "bad_version.rsd": header("m", hidden, 1, version=2) + good,
        "truncated.rsd": (header("m", hidden, 1) + good)[:-3],
        "trailing_bytes.rsd": header("m", hidden, 1) + good + b"\x00\x00",
        "bad_label.rsd": header("m", hidden, 1) + record("q0", 9, 0, -1, [0.5, -0.5, 1.0, 2.0]),
    }
    expected = {"bad_magic.rsd": "BadMagic", "bad_version.rsd": "UnsupportedVersion",
                "truncated.rsd": "TruncatedFile", "trailing_bytes.rsd": "DimensionMismatch",
                "bad_label.rsd": "InvariantViolation"}
    for name, data in cases.items():
        (out / name).write_bytes(data)
    (out / "expected_errors.json").write_text(json.dumps(expected, indent=1, sort_keys=True) + "\n")


def quantile_linear(values, p):
    s = sorted(values)
    pos = p * (len(s) - 1)
    lo = math.floor(pos)
    hi = min(lo + 1, len(s) - 1)
    return s[lo] + (pos - lo) * (s[hi] - s[lo])


def write_direction():
    diffs = [[1.0, 0.5, -2.0, 0.0, 3.0, 1.0],
             [1.5, -0.5, -1.0, 0.25, 1.0, 1.0],
             [0.5, 1.5, -3.0, -0.25, 2.0, 1.0],
             [1.0, 0.5, -2.0, 0.0, 6.0, 1.0]]
    n, d = len(diffs), len(diffs[0])
    center = [sum(v[k] for v in diffs) / n for k in range(d)]
    var = [sum((v[k] - center[k]) ** 2 for v in diffs) / n for k in range(d)]
    q = 0.5
    cut = quantile_linear(var, 1.0 - q)
    mask = [v > cut for v in var]
    vector = [0.0 if m else c for c, m in zip(center, mask)]
    (HERE / "direction_input.json").write_text(json.dumps({"diffs": diffs, "mask_quantile": q}, indent=1) + "\n")
    golden = {"format": "rsteer-direction", "version": 1, "dim": d, "layer": 2,
              "source_model_id": "fixture", "target_model_id": "", "n_conflict": n,
              "n_nonconflict": n, "mask_quantile": q, "vector": vector, "mask": mask}
    (HERE / "golden_direction.json").write_text(json.dumps(golden, indent=2) + "\n")


TYPES = ["non_conflict", "role_setting", "role_profile", "factual_knowledge", "absent_knowledge"]


def corpus_line(i, qt, series, behavior=None, reference="ref", query=None, **extra):
    rec = {"id": f"r{i:03d}", "role": f"role{i % 3}", "series": series, "query_type": qt,
           "query": query if query is not None else f"question {i} about {qt}",
           "reference": reference,
           "expected_behavior": behavior or ("answer" if qt == "non_conflict" else "refuse")}
    rec.update(extra)
    return json.dumps(rec, sort_keys=True)


def write_corpus():
    out = HERE / "corpus"
    out.mkdir(exist_ok=True)
    # 5 per type over two series; conflicts alternate refuse/caveat.
    lines = []
    for t, qt in enumerate(TYPES):
        for k in range(5):
            i = 5 * t + k
            behavior = None if qt == "non_conflict" else ("refuse" if k % 2 == 0 else "caveat")
            lines.append(corpus_line(i, qt, "alpha" if k < 3 else "beta", behavior))
    (out / "five_each.jsonl").write_text("\n".join(lines) + "\n")
    (out / "five_each.expected.json").write_text(json.dumps(
        {"counts": [5, 5, 5, 5, 5], "per_series": {"alpha": 15, "beta": 10}}, indent=1) + "\n")

    dup = [corpus_line(0, "non_conflict", "alpha", query="same text"),
           corpus_line(1, "role_setting", "alpha"),
           corpus_line(2, "factual_knowledge", "beta"),
           corpus_line(3, "role_profile", "beta", query="same text")]
    (out / "duplicate.jsonl").write_text("\n".join(dup) + "\n")

    bad = [corpus_line(0, "non_conflict", "alpha", reference=""),
           corpus_line(1, "absent_knowledge", "alpha", reference=""),
           "{not json",
           json.dumps({"id": "r002", "role": "x", "series": "y"}),
           corpus_line(3, "sideways", "alpha"),
           corpus_line(4, "role_setting", "alpha", behavior="answer"),
           corpus_line(5, "non_conflict", "alpha", behavior="refuse"),
           "",
           corpus_line(6, "role_profile", "beta", id=7),
           corpus_line(8, "role_setting", "beta"),
           corpus_line(8, "role_profile", "beta", query="other text")]
    (out / "malformed.jsonl").write_text("\n".join(bad) + "\n")
    (out / "malformed.expected.json").write_text(json.dumps(
        {"kept": ["r000", "r008"], "malformed": 8,
         "drop_reasons": {"empty_reference": 1, "invalid_json": 1, "missing_query_type": 1, "bad_query_type": 1,
                          "behavior_mismatch": 2, "bad_id": 1, "duplicate_id": 1}}, indent=1, sort_keys=True) + "\n")


# Published per-type cells and averages (Non-Conflict, Role Setting, Role
# Profile, Factual Knowledge, Absent Knowledge, Average).
PROMPTING_SCORES = {
    "Qwen2-7B-Instruct": ("1.85", "1.39", "1.20", "0.89", "0.88", "1.24"),
    "Qwen2-72B-Instruct": ("1.94", "1.98", "1.72", "1.20", "0.98", "1.56"),
    "Mistral-7B-Instruct-v0.2": ("1.88", "1.94", "1.62", "1.16", "1.26", "1.57"),
    "Mixtral-8x7B-Instruct-v0.1": ("1.92", "1.96", "1.76", "1.12", "0.92", "1.54"),
    "Llama-3-8B-Instruct": ("1.88", "1.94", "1.62", "1.03", "0.75", "1.44"),
    "Llama-3-72B-Instruct": ("1.96", "1.99", "1.80", "1.36", "1.16", "1.65"),
    "Llama-3.1-8B-Instruct": ("1.87", "1.97", "1.61", "1.08", "0.88", "1.48"),
    "Llama-3.1-72B-Instruct": ("1.95", "1.99", "1.80", "1.28", "1.20", "1.64"),
    "GPT3.5-Turbo": ("1.89", "1.82", "1.71", "1.44", "1.38", "1.65"),
    "GPT4o-mini": ("1.97", "1.97", "1.78", "1.25", "1.16", "1.63"),
    "GPT4o": ("1.98", "1.99", "1.81", "1.49", "1.38", "1.73"),
}

# Representation-editing rows with the published change marks versus prompting.
EDITING_SCORES = {
    "Llama-3.1-8B-Instruct": (("1.87", "1.96", "1.70", "1.18", "1.01", "1.54"),
                              ("0.00", "↓0.01", "↑0.09", "↑0.10", "↑0.13", "↑0.06")),
    "Llama-3-8B-Instruct": (("1.87", "1.96", "1.69", "1.17", "0.89", "1.52"),
                            ("↓0.01", "↑0.02", "↑0.07", "↑0.14", "↑0.14", "↑0.08")),
    "Mistral-7B-Instruct-v0.2": (("1.87", "1.95", "1.69", "1.20", "1.34", "1.61"),
                                 ("↓0.01", "↑0.01", "↑0.07", "↑0.04", "↑0.08", "↑0.04")),
    "Qwen2-7B-Instruct": (("1.85", "1.91", "1.55", "1.03", "1.04", "1.48"),
                          ("0.00", "↑0.52", "↑0.35", "↑0.14", "↑0.16", "↑0.24")),
}


def write_published_scores():
    rows = [{"model": m, "cells": [float(c) for c in v[:5]], "average": v[5]} for m, v in PROMPTING_SCORES.items()]
    editing = [{"model": m, "cells": [float(c) for c in v[:5]], "average": v[5], "marks": list(marks)}
               for m, (v, marks) in EDITING_SCORES.items()]
    doc = {"prompting": rows, "editing_before": [r for r in rows if r["model"] in EDITING_SCORES],
           "editing_after": editing}
    (HERE / "published_scores.json").write_text(json.dumps(doc, indent=1, ensure_ascii=False) + "\n")
    for name, model, cells in [("report_prompting.json", "Llama-3.1-8B-Instruct", PROMPTING_SCORES["Llama-3.1-8B-Instruct"]),
                               ("report_editing.json", "Llama-3.1-8B-Instruct",
                                EDITING_SCORES["Llama-3.1-8B-Instruct"][0])]:
        payload = {"model": model, "cells": {t: float(c) for t, c in zip(TYPES, cells[:5])}}
        (HERE / name).write_text(json.dumps(payload, indent=1) + "\n")


if __name__ == "__main__":
    write_golden()
    write_malformed()
    write_direction()
    write_corpus()
    write_published_scores()
