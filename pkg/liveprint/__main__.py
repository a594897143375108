import sys

from liveprint.cli import main

sys.exit(main())
