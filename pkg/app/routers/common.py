from contextlib import contextmanager

from fastapi import HTTPException, status

from app.errors import GraphFormatError, InputValidationError, SolverError, SublinearError


@contextmanager
def service_errors():
    """Translate service exceptions into HTTP errors"""
    try:
        yield
    except GraphFormatError as e:
        raise HTTPException(status_code=status.HTTP_422_UNPROCESSABLE_ENTITY, detail=str(e))
    except InputValidationError as e:
        raise HTTPException(status_code=status.HTTP_400_BAD_REQUEST, detail=str(e))
    except SolverError as e:
        raise HTTPException(status_code=status.HTTP_500_INTERNAL_SERVER_ERROR, detail=str(e))
    except SublinearError as e:
        raise HTTPException(status_code=status.HTTP_400_BAD_REQUEST, detail=str(e))
