"""
Parameter-less hBOA - Main Entry Point
Command-line harness for runs, bisection, sweeps and spin-glass tooling
"""

import logging
import sys

from dotenv import load_dotenv

# Load environment variables
load_dotenv()

from app.core.config import get_settings
from app.controllers.cli_routes import main as cli_main

# Configure logging
logging.basicConfig(
    level=get_settings().log_level.upper(),
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
)


if __name__ == "__main__":
    sys.exit(cli_main(sys.argv[1:]))
