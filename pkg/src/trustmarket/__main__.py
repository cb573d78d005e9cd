import sys

from trustmarket.cli import main

sys.exit(main())
