from dotenv import load_dotenv
import sys

# Load .env before importing the package so the logging and pool settings apply
load_dotenv('.env')

from simplex_unmix.cli import main

if __name__ == "__main__":
    sys.exit(main())
