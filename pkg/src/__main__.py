"""Allow running with python -m src."""
import asyncio
import sys

from src.runner import main

sys.exit(asyncio.run(main()))
