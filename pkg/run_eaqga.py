#!/usr/bin/env python
"""
Simple launcher script for the eaqga command line.
"""

from eaqga.main import main

if __name__ == "__main__":
    main()
