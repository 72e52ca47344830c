import sys

from fedcc.cli import main

sys.exit(main())
