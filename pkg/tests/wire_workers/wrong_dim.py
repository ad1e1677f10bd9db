"""Worker whose ask has one coordinate too many."""
import json
import sys

init = json.loads(sys.stdin.readline())["init"]
dim = init["dim"]

sys.stdout.write(json.dumps({"ask": [0.0] * (dim + 1)}) + "\n")
sys.stdout.flush()
sys.stdin.readline()
