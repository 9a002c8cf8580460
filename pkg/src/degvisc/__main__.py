import sys

from degvisc.cli import main

sys.exit(main())
