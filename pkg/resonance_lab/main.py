"""
FastAPI application for Resonance Lab
Exposes the symbol and study registries, study runs and slope fits
"""

import time
from datetime import datetime
from typing import Any, Dict, Optional

from fastapi import Body, FastAPI, HTTPException, status
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from resonance_lab.config import settings
from resonance_lab.errors import BlowUpError
from resonance_lab.models import ErrorResponse, FitRequest, FitVerdict, HealthCheckResponse, StudyRunResponse, StudySpec
from resonance_lab.studies import fit_series, json_ready, run_study, study_registry
from resonance_lab.symbols import symbol_registry
from resonance_lab.utils import configure_logging

configure_logging()

# Initialize FastAPI app
app = FastAPI(
    title=settings.APP_NAME,
    version=settings.APP_VERSION,
    description="Pseudospectral experiments for the fourth-order Schrödinger equation",
    docs_url="/docs",
    redoc_url="/redoc",
    openapi_url="/openapi.json"
)

app.add_middleware(
    CORSMiddleware,
    allow_origins=["*"],
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)


@app.exception_handler(Exception)
async def global_exception_handler(request, exc):
    """Anything a route did not map to an HTTP error becomes a 500 ErrorResponse"""
    return JSONResponse(
        status_code=status.HTTP_500_INTERNAL_SERVER_ERROR,
        content=ErrorResponse(
            error="Unhandled lab error",
            detail=f"{type(exc).__name__}: {exc}" if settings.DEBUG_MODE else "see server log",
            timestamp=datetime.now().isoformat()
        ).model_dump()
    )


# ===== Endpoints =====

@app.get("/", response_model=Dict[str, str])
async def root():
    """Service name, version and where to look next"""
    return {
        "service": settings.APP_NAME,
        "version": settings.APP_VERSION,
        "docs": "/docs",
        "health": "/health"
    }


@app.get("/health", response_model=HealthCheckResponse)
async def health_check():
    """Health check endpoint with registry sizes"""
    return HealthCheckResponse(
        status="healthy",
        version=settings.APP_VERSION,
        studies_available=len(study_registry.get_study_names()),
        symbols_available=len(symbol_registry.get_symbol_names())
    )


@app.get("/stats", response_model=Dict[str, Any])
async def get_budgets():
    """Numerical budgets and run defaults"""
    return {
        **settings.get_budget_summary(),
        "default_seed": settings.DEFAULT_SEED,
        "output_directory": settings.OUTPUT_DIRECTORY,
    }


@app.get("/symbols", response_model=Dict[str, Any])
async def list_symbols():
    """All registered multiplier symbols"""
    return {
        "status": "success",
        "total_symbols": len(symbol_registry.get_symbol_names()),
        "symbols": symbol_registry.get_symbol_names(),
        "schemas": symbol_registry.get_all_schemas()
    }


@app.get("/studies", response_model=Dict[str, Any])
async def list_studies():
    """All registered studies with their defaults, checks and CSV columns"""
    return {
        "status": "success",
        "total_studies": len(study_registry.get_study_names()),
        "studies": study_registry.get_study_names(),
        "schemas": study_registry.get_all_schemas()
    }


@app.post("/studies/{name}", response_model=StudyRunResponse)
def run_named_study(name: str, params: Optional[Dict[str, Any]] = Body(default=None)):
    """
    Run a study from a JSON body of StudySpec fields

    Nothing is written to disk; the response carries the checks and the summary.
    Runs in the worker thread pool because studies are CPU bound.
    """
    if study_registry.get_study(name) is None:
        raise HTTPException(
            status_code=status.HTTP_404_NOT_FOUND,
            detail=f"Unknown study '{name}'. Known: {', '.join(study_registry.get_study_names())}"
        )
    try:
        spec = StudySpec(**{**(params or {}), "name": name})
        start = time.time()
        outcome, _ = run_study(spec, write=False)
        # strict JSON: non-finite measurements come back as null
        payload = json_ready({"checks": [c.model_dump(mode="json") for c in outcome.checks],
                              "summary": outcome.summary})
        return StudyRunResponse(
            study=name,
            verdict=outcome.verdict,
            exit_code=outcome.exit_code,
            checks=payload["checks"],
            summary=payload["summary"],
            processing_time_seconds=round(time.time() - start, 3)
        )
    except BlowUpError as e:
        raise HTTPException(status_code=status.HTTP_422_UNPROCESSABLE_ENTITY, detail=str(e))
    except ValueError as e:
        raise HTTPException(status_code=status.HTTP_400_BAD_REQUEST, detail=str(e))
    except Exception as e:
        raise HTTPException(
            status_code=status.HTTP_500_INTERNAL_SERVER_ERROR,
            detail=f"Study run failed: {str(e)}"
        )


@app.post("/fit", response_model=FitVerdict)
async def fit_posted_series(request: FitRequest):
    """Log-log slope fit and verdict for a posted series"""
    try:
        return fit_series(request.times, request.values, request.expected_slope, request.tolerance)
    except ValueError as e:
        raise HTTPException(status_code=status.HTTP_400_BAD_REQUEST, detail=str(e))


# Server startup
if __name__ == "__main__":
    import uvicorn
    uvicorn.run(
        "resonance_lab.main:app",
        host="0.0.0.0",
        port=8000,
        reload=settings.DEBUG_MODE
    )
