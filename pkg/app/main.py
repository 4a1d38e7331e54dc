"""Entry point for fastAPI APP"""
from fastapi import FastAPI, APIRouter

from app.routes.primitives import router as primitives_router

app = FastAPI(title="Structured Shape Completion API")


api = APIRouter(prefix="/api")
api.include_router(primitives_router)

app.include_router(api)
