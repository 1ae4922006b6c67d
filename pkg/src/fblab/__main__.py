import sys

from fblab.cli import main

sys.exit(main())
