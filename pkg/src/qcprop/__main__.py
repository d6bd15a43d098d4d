import sys

from qcprop.cli import main

sys.exit(main())
