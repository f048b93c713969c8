#!/usr/bin/env python3
"""Well-behaved external detector: scores everything zero."""
import json
import sys


def emit(obj):
    sys.stdout.write(json.dumps(obj) + "\n")
    sys.stdout.flush()


for line in sys.stdin:
    msg = json.loads(line)
    kind = msg["type"]
    if kind == "hello":
        emit({"type": "hello", "name": "zeros", "protocol": 1})
    elif kind == "fit":
        emit({"type": "fit_done"})
    elif kind == "score":
        emit({"type": "scores", "id": msg["id"], "scores": [0.0] * len(msg["values"])})
    elif kind == "shutdown":
        sys.exit(0)
