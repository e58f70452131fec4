import sys

from resgrid.cli import main

sys.exit(main())
