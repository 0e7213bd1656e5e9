import sys

from mipdrive.harness.cli import main

sys.exit(main())
