"""Entry point for python -m statpriv."""

from statpriv.cli import main

if __name__ == "__main__":
    main(prog_name="statpriv")
