import sys

from outage_lab.cli import main

sys.exit(main())
