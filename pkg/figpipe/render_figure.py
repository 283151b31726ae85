#!/usr/bin/env python3
"""Entry script: render_figure.py --spec fig3.spec.json --data DIR --out fig3.png

Works both installed and straight from a checkout (falls back to src/).
"""

import os
import sys

try:
    from figpipe.cli import main
except ImportError:
    sys.path.insert(0, os.path.join(os.path.dirname(os.path.abspath(__file__)), "src"))
    from figpipe.cli import main

if __name__ == "__main__":
    sys.exit(main())
