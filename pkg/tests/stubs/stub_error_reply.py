#!/usr/bin/env python3
"""Detector that reports a structured error during fit."""
import json
import sys


def emit(obj):
    sys.stdout.write(json.dumps(obj) + "\n")
    sys.stdout.flush()


for line in sys.stdin:
    msg = json.loads(line)
    kind = msg["type"]
    if kind == "hello":
        emit({"type": "hello", "name": "grumpy", "protocol": 1})
    elif kind == "fit":
        emit({"type": "error", "message": "cannot fit this"})
    elif kind == "shutdown":
        sys.exit(0)
