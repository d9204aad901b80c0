"""
Development server runner
"""
import uvicorn
from app.config import configure_logging, settings

if __name__ == "__main__":
    configure_logging()
    uvicorn.run(
        "app.main:app",
        host=settings.api_host,
        port=settings.api_port,
        reload=True,
        log_level=settings.log_level.lower()
    )
