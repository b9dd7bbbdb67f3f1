import sys

from simfilter.cli import main

sys.exit(main())
