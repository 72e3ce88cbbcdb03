import sys

from ilid.cli import main

sys.exit(main())
