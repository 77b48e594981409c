import sys

from ssl_label_selection.cli import main

sys.exit(main())
