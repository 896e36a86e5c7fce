import sys

from slflab.cli.main import main

sys.exit(main())
