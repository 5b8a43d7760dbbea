import sys

from hyperhorn.cli import main

sys.exit(main())
