from dotenv import load_dotenv
import sys

load_dotenv(".env.local")

from app.cli.cli import cli_main


def main() -> None:
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
