#!/usr/bin/env python3
"""
curvem - curved virtual element solver and benchmarks
Run this file for the command line interface (see `main.py --help`)
"""

import sys

from curvem.cli import main

if __name__ == '__main__':
    sys.exit(main())
