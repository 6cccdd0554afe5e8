import sys

from tickforge.cli import main

sys.exit(main())
