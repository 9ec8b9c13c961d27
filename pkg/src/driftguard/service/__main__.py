"""`python3 -m driftguard.service` starts the HTTP service."""

import os

import uvicorn

from .app import app


def main() -> None:
    uvicorn.run(app,
                host=os.environ.get("DRIFTGUARD_HOST", "127.0.0.1"),
                port=int(os.environ.get("DRIFTGUARD_PORT", "8000")))


if __name__ == "__main__":
    main()
