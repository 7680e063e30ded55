# ~/dirkde/main.py
# .env is loaded by config on import, before any other module reads the environment
import sys

from cli import main

if __name__ == "__main__":
    sys.exit(main())
