import sys

from qcat.cli import main

sys.exit(main())
