import sys

from rotcouette.cli import main

sys.exit(main())
