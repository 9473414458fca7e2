#!/usr/bin/env python3
"""
jetcartan - CLI Utility
Runs the jetcartan command line from a source checkout without installing.

Examples:
  ./jetcartan_cli.py check fixtures/schwarzschild.jc
  ./jetcartan_cli.py compute fixtures/schwarzschild.jc einstein
  ./jetcartan_cli.py report fixtures/random-metric.jc --seed 42
"""

from jetcartan.main import main

if __name__ == "__main__":
    main()
