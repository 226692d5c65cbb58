"""Allow ``python -m hiercl``."""

import sys

from hiercl.cli import main

sys.exit(main())
