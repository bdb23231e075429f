"""Replies to every evaluate with a protocol-level error message."""
import json
import sys

for line in sys.stdin:
    msg = json.loads(line)
    if msg["type"] == "shutdown":
        break
    if msg["type"] == "evaluate":
        reply = {"type": "error", "id": msg["id"], "message": "synthetic failure"}
        sys.stdout.write(json.dumps(reply) + "\n")
        sys.stdout.flush()
