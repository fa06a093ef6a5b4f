import sys

from crossscreen.cli import main

sys.exit(main())
