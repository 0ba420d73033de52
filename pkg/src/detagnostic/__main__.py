"""Allow ``python -m detagnostic`` as an alias for the console script."""

from .cli import main

main()
