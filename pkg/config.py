import logging
import os
from dotenv import load_dotenv

load_dotenv()

VERSION = "0.1.0"

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
LOG_LEVEL = os.getenv("AVGSAMP_LOG_LEVEL", "INFO").upper()
OUT_DIR = os.getenv("AVGSAMP_OUT_DIR", "results")
THREADS = int(os.getenv("AVGSAMP_THREADS", "1"))
TRIALS = int(os.getenv("AVGSAMP_TRIALS", "2000"))

DATABASE_URL = os.getenv("AVGSAMP_DATABASE_URL")
if DATABASE_URL and DATABASE_URL.startswith("postgres://"):
    DATABASE_URL = DATABASE_URL.replace("postgres://", "postgresql://", 1)


def setup_logging(level: str = LOG_LEVEL) -> None:
    logging.basicConfig(format=LOG_FORMAT, level=getattr(logging, level, logging.INFO))
