"""Allow ``python -m junctionsim`` as an alias for the console script."""

from .cli import main

main()
