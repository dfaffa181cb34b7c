import sys

from dyport.cli import main

sys.exit(main())
