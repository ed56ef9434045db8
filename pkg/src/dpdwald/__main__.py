import sys

from dpdwald.cli import main

sys.exit(main())
