import sys

from spdqml.cli import main

sys.exit(main())
