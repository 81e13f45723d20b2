"""
RelayBeam — Relay Selection and Beam Management Service
=======================================================

FastAPI entry point.
Start with:  uvicorn main:app --reload

Environment:
    RELAYBEAM_LOG_LEVEL      logging level name (default INFO)
    RELAYBEAM_CORS_ORIGINS   comma-separated allowed origins (default *)
    RELAYBEAM_THREADS        worker processes per sweep (default 1)
"""

import logging
import os

from fastapi import FastAPI
from fastapi.middleware.cors import CORSMiddleware

from app import __version__
from app.api.routes import router
from app.core.config import build_config
from app.policies.registry import list_policies

# ── Logging ────────────────────────────────────────────────────────
logging.basicConfig(
    level=os.environ.get("RELAYBEAM_LOG_LEVEL", "INFO").upper(),
    format="%(asctime)s | %(levelname)-8s | %(name)s | %(message)s",
)
logger = logging.getLogger("relaybeam")

# ── App ────────────────────────────────────────────────────────────
app = FastAPI(
    title="RelayBeam",
    description=(
        "Joint relay selection and beam management for mmWave vehicular "
        "links.  Computes alignment budgets and blockage statistics, and "
        "runs Monte-Carlo comparisons of the DDPG threshold learner "
        "against genie, direct-link and fixed-threshold baselines."
    ),
    version=__version__,
)

origins = [o.strip() for o in os.environ.get("RELAYBEAM_CORS_ORIGINS", "*").split(",") if o.strip()]
app.add_middleware(
    CORSMiddleware,
    allow_origins=origins,
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)

app.include_router(router, prefix="/api")

DEFAULT_CONFIG_HASH = build_config({}).config_hash()
logger.info("RelayBeam %s ready (default config %s)", __version__, DEFAULT_CONFIG_HASH[:12])


@app.get("/")
async def root():
    return {
        "name": "RelayBeam",
        "version": __version__,
        "status": "running",
        "policies": list_policies(),
        "default_config_hash": DEFAULT_CONFIG_HASH,
        "docs": "/docs",
    }
