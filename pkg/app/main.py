from fastapi import FastAPI
from fastapi.middleware.cors import CORSMiddleware

from app import __version__
from app.config import settings
from app.routers import coreset, estimate, graphs, solve, status, stream

app = FastAPI(
    title="Sublinear Cut API",
    description="Core-sets, LP estimation and two-pass streaming for MaxCut and MAX-AGREE clustering",
    version=__version__,
)

# CORS middleware
app.add_middleware(
    CORSMiddleware,
    allow_origins=settings.cors_origins_list,
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)

# Include routers
app.include_router(graphs.router, prefix="/api/graphs", tags=["Graphs"])
app.include_router(coreset.router, prefix="/api/coreset", tags=["Core-sets"])
app.include_router(estimate.router, prefix="/api/estimate", tags=["Estimation"])
app.include_router(solve.router, prefix="/api/solve", tags=["Solvers"])
app.include_router(stream.router, prefix="/api/stream", tags=["Streaming"])
app.include_router(status.router, prefix="/api", tags=["Status"])


@app.get("/")
async def root():
    return {
        "message": "Sublinear Cut API",
        "version": __version__,
        "status": "running"
    }


@app.get("/health")
async def health_check():
    return {"status": "healthy"}


if __name__ == "__main__":
    import uvicorn
    uvicorn.run(
        "app.main:app",
        host=settings.api_host,
        port=settings.api_port,
        reload=True
    )
