"""
Sampling Kantorovich Thermography Toolkit - FastAPI Main Entry Point

Creates the app instance, maps toolkit errors to HTTP responses and
registers routes.

Author: SK Thermography Team

Usage:
    uvicorn app.main:app --reload --port 8000
"""

from contextlib import asynccontextmanager
from typing import AsyncGenerator

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from app import __version__
from app.api.v1 import router as api_router
from app.config import PRESETS, settings
from app.errors import InvalidParameterError, NumericError, SKError
from app.logging_config import get_logger
from app.models.schemas import ErrorResponse
from app.services.sk_engine import resolve_threads

logger = get_logger(__name__)


# ===========================================
# Application Lifespan (Startup/Shutdown)
# ===========================================

@asynccontextmanager
async def lifespan(app: FastAPI) -> AsyncGenerator:
    """
    On startup logs the effective settings; kernels and their
    normalization constants are built lazily on first request.
    """
    # ===== STARTUP =====
    logger.info("Starting SK Thermography API...")
    logger.info(f"Debug mode: {settings.debug}")
    logger.info(f"Enhance worker threads: {resolve_threads()}")
    logger.info(f"Presets: {', '.join(sorted(PRESETS))}")
    logger.info("[DOCS] API documentation: http://localhost:8000/docs")

    yield  # Application runs here

    # ===== SHUTDOWN =====
    logger.info("Shutting down SK Thermography API...")


# ===========================================
# Create FastAPI Application
# ===========================================

app = FastAPI(
    title="SK Thermography API",
    description="""
    Thermographic image enhancement and thermal-bridge analysis:

    * **Enhancement** - sampling Kantorovich operator with B-spline, Jackson or Fejer kernels
    * **Segmentation** - histogram valley threshold, bridge mask and contours
    * **Energy index** - incidence factor I_tb and raw vs enhanced comparison
    """,
    version=__version__,
    lifespan=lifespan,
    docs_url="/docs",
    redoc_url="/redoc",
)


# ===========================================
# Error Handlers
# ===========================================

def _error_response(status_code: int, exc: SKError) -> JSONResponse:
    body = ErrorResponse(detail=exc.message, error_code=exc.error_code, diagnostic=exc.diagnostic)
    return JSONResponse(status_code=status_code, content=body.model_dump(mode="json", exclude_none=True))


@app.exception_handler(InvalidParameterError)
async def invalid_parameter_handler(request: Request, exc: InvalidParameterError) -> JSONResponse:
    logger.warning(f"{request.url.path}: {exc.message}")
    return _error_response(422, exc)


@app.exception_handler(NumericError)
async def numeric_error_handler(request: Request, exc: NumericError) -> JSONResponse:
    logger.error(f"{request.url.path}: {exc.message}")
    return _error_response(500, exc)


# ===========================================
# Register API Routes
# ===========================================

app.include_router(api_router, prefix="/api/v1", tags=["API v1"])


# ===========================================
# Root Endpoints
# ===========================================

@app.get("/", tags=["Root"])
async def root():
    """
    Root endpoint - returns welcome message and API info.
    """
    return {
        "message": "Welcome to SK Thermography API",
        "version": __version__,
        "docs": "/docs",
        "health": "/api/v1/health",
    }


@app.get("/health", tags=["Health"])
async def health_check():
    return {
        "status": "healthy",
        "service": "sk-thermography-api",
    }
