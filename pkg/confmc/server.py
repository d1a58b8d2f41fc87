"""FastAPI server that exposes the confmc commands over HTTP.

Usage::

    confmc-server
    confmc-server --port 8080 --model-cache 32 --lp-backend exact

Endpoints::

    GET  /health
        Returns {"status": "ok", "version": ...}.

    POST /step | /explore | /check-csmt | /check-msct
        Accepts {"model": <model file>, "query": <query file>, ...overrides}.
        Returns a ResultRecord.

Invalid models or queries answer 422; LP or solver failures answer 502.

Example request body::

    {
        "model": {"states": ["q0", "q1", "q2"], "actions": ["a", "b"],
                  "transitions": {"a": [...], "b": [...]}},
        "query": {"initial": ["1", "0", "0"], "semantics": "msmt",
                  "scheduler": {"kind": "constant", "weights": {"a": "2/5", "b": "3/5"}}}
    }
"""

from __future__ import annotations

import argparse
import hashlib
import sys
import threading
from typing import Dict, List, Optional

from confmc.core import MdpModel

# ---------------------------------------------------------------------------
# Parsed-model cache
# ---------------------------------------------------------------------------

class _ModelCache:
    """Thread-safe LRU cache of validated models keyed by their canonical JSON."""

    def __init__(self, max_size: int = 16):
        self._cache: Dict[str, MdpModel] = {}
        self._order: List[str] = []            # LRU order (most-recent last)
        self._max_size = max_size
        self._lock = threading.Lock()

    def get(self, key: str) -> Optional[MdpModel]:
        with self._lock:
            if key in self._cache:
                self._order.remove(key)
                self._order.append(key)
                return self._cache[key]
        return None

    def put(self, key: str, m: MdpModel) -> None:
        if self._max_size <= 0:
            return
        with self._lock:
            if key in self._cache:
                self._order.remove(key)
            elif len(self._cache) >= self._max_size:
                evict = self._order.pop(0)
                del self._cache[evict]
            self._cache[key] = m
            self._order.append(key)

    def load(self, spec) -> MdpModel:
        """Return the model for a ModelFile, validating it on a miss."""
        from confmc.modelfile import model_from_spec

        key = hashlib.sha256(spec.model_dump_json().encode()).hexdigest()
        m = self.get(key)
        if m is not None:
            return m
        m = model_from_spec(spec)
        self.put(key, m)
        return m

    def __len__(self) -> int:
        with self._lock:
            return len(self._cache)


# ---------------------------------------------------------------------------
# Pydantic models (request)
# ---------------------------------------------------------------------------

try:
    from pydantic import BaseModel

    from confmc.modelfile import ModelFile, QueryFile

    class _Problem(BaseModel):
        model: ModelFile
        query: QueryFile

    class StepRequest(_Problem):
        semantics: Optional[str] = None
        method: str = "compositional"

    class ExploreRequest(_Problem):
        semantics: Optional[str] = None
        depth: Optional[int] = None

    class CsmtRequest(_Problem):
        K: Optional[int] = None
        L: Optional[int] = None
        loop_limit: Optional[int] = None
        seed: Optional[int] = None

    class MsctRequest(_Problem):
        threshold: Optional[str] = None
        degree: Optional[int] = None
        timeout: Optional[float] = None
        samples: int = 10_000
        seed: Optional[int] = None

except ImportError:
    pass  # Proper error is raised inside _build_app when pydantic is missing


# ---------------------------------------------------------------------------

def _build_app(
    model_cache_size: int = 16,
    lp_backend: Optional[str] = None,
    solver_cmd: Optional[str] = None,
    max_depth: int = 50,
):
    """Construct and return the FastAPI application."""
    try:
        from fastapi import FastAPI, HTTPException
    except ImportError as exc:
        raise ImportError(
            "fastapi and pydantic are required for the server. "
            "Install with: pip install 'confmc[server]'"
        ) from exc

    from confmc import __version__
    from confmc.antichain import PullbackConfig
    from confmc.cli import run_check_csmt, run_check_msct, run_explore, run_step
    from confmc.errors import BackendFailure, InvalidInput
    from confmc.modelfile import ResultRecord, parse_rational, query_from_spec
    from confmc.semantics import SemanticsId
    from confmc.synthesis import SynthesisConfig

    app = FastAPI(title="confmc", version=__version__)
    _cache = _ModelCache(max_size=model_cache_size)

    # ------------------------------------------------------------------
    # Helpers
    # ------------------------------------------------------------------

    def _solve(body: _Problem, fn):
        try:
            m = _cache.load(body.model)
            q = query_from_spec(body.query, m)
            return fn(m, q)
        except InvalidInput as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        except BackendFailure as exc:
            raise HTTPException(status_code=502, detail=str(exc)) from exc

    def _semantics(name: Optional[str]):
        if name is None:
            return None
        try:
            return SemanticsId.parse(name)
        except InvalidInput as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc

    # ------------------------------------------------------------------
    # Routes
    # ------------------------------------------------------------------

    @app.get("/health")
    def health():
        return {"status": "ok", "version": __version__, "cached_models": len(_cache)}

    @app.post("/step", response_model=ResultRecord)
    def step(body: StepRequest):
        s = _semantics(body.semantics)
        return _solve(body, lambda m, q: run_step(m, q, s, method=body.method))

    @app.post("/explore", response_model=ResultRecord)
    def explore(body: ExploreRequest):
        s = _semantics(body.semantics)
        depth = body.depth if body.depth is not None else body.query.options.depth
        if depth > max_depth:
            raise HTTPException(status_code=422, detail=f"depth {depth} exceeds server limit {max_depth}")
        return _solve(body, lambda m, q: run_explore(m, q, depth, s))

    @app.post("/check-csmt", response_model=ResultRecord)
    def check_csmt(body: CsmtRequest):
        o = body.query.options
        cfg = PullbackConfig(
            k=body.K if body.K is not None else o.k,
            l=body.L if body.L is not None else o.l,
            loop_limit=body.loop_limit if body.loop_limit is not None else o.loop_limit,
            backend=lp_backend,
            seed=body.seed if body.seed is not None else o.seed,
        )
        return _solve(body, lambda m, q: run_check_csmt(m, q, cfg))

    @app.post("/check-msct", response_model=ResultRecord)
    def check_msct(body: MsctRequest):
        o = body.query.options
        try:
            cfg = SynthesisConfig(
                gamma=parse_rational(o.gamma),
                degree=body.degree if body.degree is not None else o.degree,
                solver_cmd=solver_cmd,
                timeout=body.timeout,
                samples=body.samples,
                seed=body.seed if body.seed is not None else o.seed,
            )
            threshold = parse_rational(body.threshold) if body.threshold is not None else None
        except InvalidInput as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        return _solve(body, lambda m, q: run_check_msct(m, q, cfg, threshold=threshold))

    return app


# ---------------------------------------------------------------------------
# CLI entry point
# ---------------------------------------------------------------------------

def _parse_args(argv=None):
    parser = argparse.ArgumentParser(
        description="Serve the confmc commands over HTTP."
    )
    parser.add_argument(
        "--host", default="0.0.0.0", metavar="HOST",
        help="Bind host (default: 0.0.0.0).",
    )
    parser.add_argument(
        "--port", type=int, default=8000, metavar="PORT",
        help="Bind port (default: 8000).",
    )
    parser.add_argument(
        "--model-cache", type=int, default=16, metavar="N",
        help="Max number of parsed models to keep in memory (default: 16).",
    )
    parser.add_argument(
        "--lp-backend", default=None, choices=["scipy", "exact"],
        help="LP backend for /check-csmt (default: $CONFMC_LP_BACKEND or scipy).",
    )
    parser.add_argument(
        "--solver-cmd", default=None, metavar="CMD",
        help="SMT solver command for /check-msct (default: $CONFMC_SOLVER_CMD or 'z3 -in -smt2').",
    )
    parser.add_argument(
        "--max-depth", type=int, default=50, metavar="K",
        help="Largest exploration depth accepted by /explore (default: 50).",
    )
    parser.add_argument(
        "--reload", action="store_true", default=False,
        help="Enable uvicorn auto-reload (development only).",
    )
    return parser.parse_args(argv)


def main(argv=None):
    """Entry point for the ``confmc-server`` command."""
    args = _parse_args(argv)

    try:
        import uvicorn
    except ImportError:
        print(
            "uvicorn is required to run the server. "
            "Install with: pip install 'confmc[server]'",
            file=sys.stderr,
        )
        sys.exit(1)

    print(f"  Model cache    : {args.model_cache} models")
    print(f"  LP backend     : {args.lp_backend or 'default'}")
    print(f"  Max depth      : {args.max_depth}")
    print(f"  Listening on   : http://{args.host}:{args.port}")

    app = _build_app(
        model_cache_size=args.model_cache,
        lp_backend=args.lp_backend,
        solver_cmd=args.solver_cmd,
        max_depth=args.max_depth,
    )

    uvicorn.run(
        app,
        host=args.host,
        port=args.port,
        reload=args.reload,
    )


if __name__ == "__main__":
    main()
