import sys

from abcd.cli import main

sys.exit(main())
