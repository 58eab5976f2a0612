#!/usr/bin/env python3
"""
Run the meterguard pipeline from a checkout without installing the package.

Usage:
    python workbench.py reproduce --seed 7
    python workbench.py evaluate --config desk.conf --jobs 4
"""
from meterguard.cli import main

if __name__ == "__main__":
    main()
