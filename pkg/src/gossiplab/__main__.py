"""python -m gossiplab delegates to the CLI."""

from .cli import entry

if __name__ == "__main__":
    entry()
