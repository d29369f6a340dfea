import sys

from olslab.cli import main

sys.exit(main())
