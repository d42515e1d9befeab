import sys

from curvem.cli import main

sys.exit(main())
