"""JSON Schema of ``report.json`` written by ``fssk run``.

CSV outputs are described by their column tuples:
``metrics.CSV_FIELDS`` for ``metrics.csv`` and ``cli.MASK_STATS_FIELDS`` for
``fssk mask-stats``.
"""

_NUM = {"type": "number"}
_INT = {"type": "integer", "minimum": 0}

MASKING_SCHEMA = {
    "type": "object",
    "required": ["block", "strategy", "total_cells", "masked_cells", "masked_columns", "ratio"],
    "additionalProperties": False,
    "properties": {
        "block": _INT,
        "strategy": {"enum": ["none", "dicm", "cyctr"]},
        "total_cells": _INT,
        "masked_cells": _INT,
        "masked_columns": _INT,
        "ratio": {"type": "number", "minimum": 0, "maximum": 1},
    },
}

EPISODE_SCHEMA = {
    "type": "object",
    "required": ["name", "class_id", "k", "masking", "warnings", "metrics"],
    "additionalProperties": False,
    "properties": {
        "name": {"type": "string"},
        "class_id": {"type": "integer"},
        "k": {"type": "integer", "minimum": 1},
        "masking": {"type": "array", "items": MASKING_SCHEMA},
        "warnings": {"type": "array", "items": {"type": "string"}},
        "metrics": {
            "oneOf": [
                {"type": "null"},
                {"type": "object", "required": ["prior_ce", "iou"],
                 "additionalProperties": False,
                 "properties": {"prior_ce": _NUM,
                                "iou": {"type": "number", "minimum": 0, "maximum": 1}}},
            ]
        },
    },
}

SUMMARY_SCHEMA = {
    "oneOf": [
        {"type": "null"},
        {"type": "object", "required": ["miou", "fb_iou", "ce_mean", "ce_std", "n"],
         "additionalProperties": False,
         "properties": {"miou": _NUM, "fb_iou": _NUM, "ce_mean": _NUM, "ce_std": _NUM,
                        "n": {"type": "integer", "minimum": 1}}},
    ]
}

REPORT_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "fssk run report",
    "type": "object",
    "required": ["config", "episodes", "summary"],
    "additionalProperties": False,
    "properties": {
        "config": {
            "type": "object",
            "required": ["delta", "strategy", "blocks", "cab", "seed", "epsilon"],
            "additionalProperties": False,
            "properties": {
                "delta": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "strategy": {"enum": ["none", "dicm", "cyctr"]},
                "blocks": {"type": "integer", "minimum": 1},
                "cab": _INT,
                "seed": {"type": "integer"},
                "epsilon": _NUM,
            },
        },
        "episodes": {"type": "array", "minItems": 1, "items": EPISODE_SCHEMA},
        "summary": SUMMARY_SCHEMA,
    },
}
