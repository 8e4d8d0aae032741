"""HTTP scoring service exposing the reward engine to external trainers.

POST /v1/score scores batches of rollouts and returns rewards, group-relative
advantages, and per-rollout component breakdowns; responses are numerically
identical to calling ``score_rollout_batch`` in process because the handler
calls exactly that, and floats are serialized at full double precision.
GET /v1/health reports version, mock mode, and judge-backend reachability.
"""

from __future__ import annotations

import threading

import requests as _requests
from fastapi import FastAPI
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from . import __version__
from .backends import BackendError
from .config import ServiceConfig
from .dataset import DatasetError, ProductPair
from .judges import JudgeError, make_judge_provider, mock_judge_score
from .pipelines import score_rollout_batch
from .reward import RewardWeights


class PairBody(BaseModel):
    base_title: str
    compared_title: str
    brand: str | None = None


class ItemBody(BaseModel):
    pair: PairBody
    gold: int = Field(ge=0, le=1)
    rollouts: list[str] = Field(min_length=1)


class WeightsBody(BaseModel):
    format: float = Field(ge=0)
    correctness: float = Field(ge=0)
    judge: float = Field(ge=0)


class ScoreRequest(BaseModel):
    items: list[ItemBody] = Field(min_length=1)
    weights: WeightsBody | None = None


def _probe_judge_backend(config: ServiceConfig) -> tuple[bool, str | None]:
    if config.mock_mode:
        return True, None
    try:
        _requests.get(config.judge_backend.endpoint, timeout=2.0)
        return True, None
    except _requests.RequestException as exc:
        return False, str(exc)


def create_app(config: ServiceConfig, judge_provider=None) -> FastAPI:
    """Build the service app; ``judge_provider`` may be injected for tests."""
    if judge_provider is None:
        judge_provider = (mock_judge_score if config.mock_mode
                          else make_judge_provider(config.judge_backend))
    gate = threading.BoundedSemaphore(config.concurrency_cap)
    app = FastAPI(title="product-mapping reward service", version=__version__)

    @app.exception_handler(RequestValidationError)
    async def _validation_400(request, exc):
        return JSONResponse(status_code=400, content={"error": str(exc)})

    @app.post("/v1/score")
    def score(req: ScoreRequest):
        if not gate.acquire(blocking=False):
            return JSONResponse(status_code=503, content={"error": "over capacity"})
        try:
            weights = (RewardWeights(**req.weights.model_dump())
                       if req.weights else config.weights)
            items = []
            for i, item in enumerate(req.items):
                pair = ProductPair(
                    base_title=item.pair.base_title,
                    compared_title=item.pair.compared_title,
                    brand=item.pair.brand,
                    pair_id=f"req-{i}",
                )
                items.append((pair, item.gold, item.rollouts))
            groups = score_rollout_batch(items, judge_provider, weights)
        except (DatasetError, ValueError) as exc:
            return JSONResponse(status_code=400, content={"error": str(exc)})
        except (JudgeError, BackendError) as exc:
            return JSONResponse(status_code=502, content={"error": str(exc)})
        finally:
            gate.release()

        return {
            "items": [
                {
                    "rewards": g.rewards,
                    "advantages": g.advantages,
                    "breakdowns": [
                        {
                            "s_fmt": b.s_fmt,
                            "s_cls": b.s_cls,
                            "s_judge": b.s_judge,
                            "judge_scores": {
                                "core": b.judge_scores[0].score,
                                "identifier": b.judge_scores[1].score,
                                "variant": b.judge_scores[2].score,
                            },
                        }
                        for b in g.breakdowns
                    ],
                }
                for g in groups
            ]
        }

    @app.get("/v1/health")
    def health():
        reachable, reason = _probe_judge_backend(config)
        return {
            "healthy": reachable,
            "version": __version__,
            "mock_mode": config.mock_mode,
            "judge_backend": {"reachable": reachable, "reason": reason},
        }

    return app


def serve(config: ServiceConfig) -> None:
    import uvicorn

    host, port = config.host_port()
    uvicorn.run(create_app(config), host=host, port=port)
