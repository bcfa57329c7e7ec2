import sys

from fopid_avr.cli import main

sys.exit(main())
