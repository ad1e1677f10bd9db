"""Worker that dies before reading anything."""
import sys

sys.stderr.write("boom: simulated startup crash\n")
sys.exit(1)
