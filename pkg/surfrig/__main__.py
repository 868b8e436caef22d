import sys

from surfrig.main import main

sys.exit(main())
