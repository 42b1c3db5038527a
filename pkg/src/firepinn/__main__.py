import sys

from firepinn.main import main

sys.exit(main())
