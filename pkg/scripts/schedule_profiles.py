"""Diffusion coefficient curves sigma(t) for the DSBS schedules and the SMLD/DDPM baselines.

Writes plot-ready CSV (scheme,t,sigma); same output as ``dsbs schedule-profile``.
"""

import sys

from dsbs.cli import main

if __name__ == "__main__":
    sys.exit(main(["schedule-profile", *sys.argv[1:]]))
