import sys

from candidate_shim.cli import main

sys.exit(main())
