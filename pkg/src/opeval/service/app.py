"""HTTP facade over the evaluation library.

Endpoints mirror the CLI subcommands one to one; the CLI is a thin client
of this app.  Model-level failures (unidentifiable instances, zero
propensities) map to 409 with code "model-error"; malformed inputs map to
400 with code "input-error".
"""

from __future__ import annotations

from fastapi import FastAPI, HTTPException

from .. import __version__, analytics, core, estimators, montecarlo, reductions, verify
from . import models


def _model_error(exc: Exception, **extra):
    return HTTPException(status_code=409,
                         detail={"code": "model-error", "message": str(exc), **extra})


def _input_error(exc: Exception):
    return HTTPException(status_code=400,
                         detail={"code": "input-error", "message": str(exc)})


def create_app() -> FastAPI:
    app = FastAPI(title="opeval", version=__version__)

    @app.get("/health")
    def health():
        return {"status": "ok", "version": __version__}

    @app.post("/analytic", response_model=models.AnalyticResponse)
    def analytic(req: models.AnalyticRequest):
        try:
            instance = req.instance.to_instance()
        except core.InputError as exc:
            raise _input_error(exc)
        if not instance.is_identifiable:
            raise _model_error(
                core.UnidentifiableInstanceError(instance.unidentifiable_actions),
                actions=list(instance.unidentifiable_actions),
            )
        try:
            report = analytics.analytic_report(instance, req.n)
        except core.ModelError as exc:
            raise _model_error(exc)
        return models.AnalyticResponse(value=core.policy_value(instance),
                                       **report.to_dict())

    @app.post("/estimate", response_model=models.EstimateResponse)
    def estimate(req: models.EstimateRequest):
        try:
            instance = req.instance.to_instance()
            data = core.Dataset(req.actions, req.rewards, instance.k)
        except core.InputError as exc:
            raise _input_error(exc)
        except core.ModelError as exc:
            raise _input_error(exc)
        try:
            lr = estimators.lr_estimate(instance.target, instance.behavior, data)
            reg = estimators.reg_estimate(instance.target, data)
            rew = estimators.reg_estimate_reweighted(instance.target, data)
        except estimators.ZeroPropensityError as exc:
            raise _model_error(exc, actions=list(exc.actions))
        def conv(rep):
            return models.EstimateReportModel(
                value=rep.value, weights=list(rep.weights),
                unseen_actions=sorted(rep.unseen_actions))
        return models.EstimateResponse(lr=conv(lr), reg=conv(reg),
                                       reg_reweighted=conv(rew))

    @app.post("/simulate", response_model=models.SimulateResponse)
    def simulate(req: models.SimulateRequest):
        try:
            instance = req.instance.to_instance()
            config = montecarlo.McConfig(
                sample_sizes=tuple(req.config.sample_sizes),
                replications=req.config.replications,
                seed=req.config.seed,
                estimators=tuple(req.config.estimators),
                threads=req.config.threads,
            )
        except (core.InputError, core.ModelError) as exc:
            raise _input_error(exc)
        try:
            result = montecarlo.run_mc(instance, config,
                                       instance_id=req.instance_id,
                                       experiment=req.experiment)
        except core.UnidentifiableInstanceError as exc:
            raise _model_error(exc, actions=list(exc.actions))
        rows = [models.McRowModel(**r.__dict__) for r in result.rows]
        return models.SimulateResponse(rows=rows, csv=result.to_csv())

    @app.post("/figure", response_model=models.FigureResponse)
    def figure(req: models.FigureRequest):
        if req.experiment == "comparison":
            bundle = montecarlo.experiment_estimator_comparison(
                replications=req.replications or 10000,
                seed=req.seed if req.seed is not None else 7001,
                threads=req.threads,
            )
            files = {"fig1_left.csv": bundle.result.to_csv()}
        else:
            bundle = montecarlo.experiment_k_scaling(
                ks=tuple(req.ks) if req.ks else montecarlo.DEFAULT_KSCALING_KS,
                replications=req.replications or 10000,
                seed=req.seed if req.seed is not None else 7002,
                threads=req.threads,
            )
            files = {"fig1_right.csv": bundle.result.to_csv()}
        return models.FigureResponse(files=files, constants=bundle.constants)

    @app.post("/verify", response_model=models.VerifyResponse)
    def run_verify(req: models.VerifyRequest):
        try:
            report = verify.run_verify(suites=req.suites)
        except core.InputError as exc:
            raise _input_error(exc)
        return models.VerifyResponse(
            all_passed=report.all_passed,
            results=[models.SuiteResultModel(**r.__dict__) for r in report.results],
        )

    @app.post("/locks", response_model=models.LocksResponse)
    def locks(req: models.LocksRequest):
        try:
            lock = reductions.combination_lock(req.N, req.p_star, rmax=req.rmax,
                                               horizon=req.H)
        except core.ModelError as exc:
            raise _input_error(exc)
        return models.LocksResponse(
            mdp=reductions.mdp_to_dict(lock.mdp),
            behavior=lock.behavior.tolist(),
            target=lock.target.tolist(),
        )

    return app


app = create_app()
