import sys

from wws import main


if __name__ == "__main__":
    sys.exit(main())
