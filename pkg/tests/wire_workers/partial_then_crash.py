"""Worker that completes three evaluations and then dies without done."""
import json
import sys

init = json.loads(sys.stdin.readline())["init"]
dim = init["dim"]

for i in range(3):
    sys.stdout.write(json.dumps({"ask": [float(i)] * dim}) + "\n")
    sys.stdout.flush()
    json.loads(sys.stdin.readline())
sys.stderr.write("simulated mid-run crash\n")
sys.exit(1)
