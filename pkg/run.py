#!/usr/bin/env python3
"""
Convenience script to run the codedfog CLI
Usage: python run.py unified --nodes 18 --mu 1/3
"""
import sys

from codedfog.main import main

if __name__ == "__main__":
    sys.exit(main())
