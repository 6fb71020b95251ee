import sys

from dstg_grounding.cli import main


if __name__ == "__main__":
    sys.exit(main())
