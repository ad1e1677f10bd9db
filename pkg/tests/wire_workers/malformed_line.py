"""Worker that answers the init with a non-protocol line."""
import sys

sys.stdin.readline()
sys.stdout.write("this is not a protocol message\n")
sys.stdout.flush()
sys.stdin.readline()
