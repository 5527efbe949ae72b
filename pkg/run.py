#!/usr/bin/env python3
"""Launch the post-dantzig command line.

Usage:
    python run.py [--debug] [--trace] [--verbose] <command> [options]
"""
import sys

from src.main import main

if __name__ == "__main__":
    sys.exit(main())
