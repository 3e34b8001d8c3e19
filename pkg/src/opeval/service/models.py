"""Pydantic request/response models for the HTTP service.

Instance documents use the same field names as the on-disk JSON format, so
a file can be posted verbatim.
"""

from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field

from .. import core


class RewardSpecModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: Literal["point", "bernoulli", "normal"]
    r: Optional[float] = None
    p: Optional[float] = None
    mean: Optional[float] = None
    var: Optional[float] = None

    def to_spec(self) -> core.RewardSpec:
        return core._spec_from_dict(self.model_dump(exclude_none=True))


class InstanceModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    K: int
    behavior: list[float]
    target: list[float]
    rewards: list[RewardSpecModel]
    rmax: Optional[float] = None

    def to_instance(self) -> core.BanditInstance:
        return core.instance_from_dict(self.model_dump(exclude_none=False))


class AnalyticRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    instance: InstanceModel
    n: int = Field(ge=1)


class AnalyticResponse(BaseModel):
    value: float
    v1: float
    v2: float
    p_missing: list[float]
    v0n: float
    v3n: float
    bias_bn: float
    lr_mse: float
    reg_mse_upper: float
    reg_mse_lower_normal: Optional[float]
    minimax_lower: Optional[float]
    best_subset: Optional[list[int]]
    heuristic: Optional[bool]


class EstimateRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    instance: InstanceModel
    actions: list[int]
    rewards: list[float]


class EstimateReportModel(BaseModel):
    value: float
    weights: list[float]
    unseen_actions: list[int]


class EstimateResponse(BaseModel):
    lr: EstimateReportModel
    reg: EstimateReportModel
    reg_reweighted: EstimateReportModel


class McConfigModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    sample_sizes: list[int]
    replications: int = 10000
    seed: int = 0
    estimators: list[Literal["lr", "reg"]] = ["lr", "reg"]
    threads: int = 1


class SimulateRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    instance: InstanceModel
    config: McConfigModel
    instance_id: str = "instance"
    experiment: str = "adhoc"


class McRowModel(BaseModel):
    experiment: str
    instance_id: str
    estimator: str
    n: int
    replications: int
    mse: float
    nmse: float
    stderr: float
    seed: int


class SimulateResponse(BaseModel):
    rows: list[McRowModel]
    csv: str


class FigureRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    experiment: Literal["comparison", "kscaling"]
    seed: Optional[int] = None
    replications: Optional[int] = None
    ks: Optional[list[int]] = None
    threads: int = 1


class FigureResponse(BaseModel):
    files: dict[str, str]  # canonical file name -> CSV text
    constants: dict[str, dict[str, float]]


class VerifyRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    suites: Optional[list[str]] = None


class SuiteResultModel(BaseModel):
    name: str
    status: str
    checks: int
    detail: str


class VerifyResponse(BaseModel):
    all_passed: bool
    results: list[SuiteResultModel]


class LocksRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    N: int = Field(ge=2)
    p_star: float = Field(gt=0.0, lt=1.0)
    rmax: float = 1.0
    H: Optional[int] = None


class LocksResponse(BaseModel):
    mdp: dict
    behavior: list[list[float]]
    target: list[list[float]]
