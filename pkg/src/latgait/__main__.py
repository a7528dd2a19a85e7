"""Module entry: python -m latgait."""

import sys

from .cli import main

sys.exit(main())
