"""Command-line entry point: synth | train | predict | compare | alarm."""
from pathlib import Path
from typing import Any, Dict, Literal, Optional, TextIO, Tuple
import argparse
import json
import logging
import sys

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from alarm import load_policy, replay
from anfis import AnfisConfig
from async_handlers import stream_records
from bel_core import BelConfig
from config import configure_logging, settings
from dataset import (
    DEFAULT_FRACTIONS,
    DEFAULT_LAG,
    assign_splits,
    load_csv,
    make_patterns,
    normalize,
    synth_series,
    write_csv,
)
from error_handlers import ConfigurationError, UsageError, error_handler
from evaluate import MODEL_KINDS, compare, evaluate_model, fingerprint, fit_model, rank_models
from figures import figure_files, write_figures
from mlp import MlpConfig
from models import EvalReport, PatternMode, PatternSet, PipelineSpec, Series
from persistence import ModelPersistence, prepare_output_dir, write_lines

logger = logging.getLogger(__name__)

ModelKind = Literal["bel", "anfis", "mlp"]
MODEL_CONFIGS = {"bel": BelConfig, "anfis": AnfisConfig, "mlp": MlpConfig}

HYPERPARAMETER_FLAGS = ("alpha", "beta", "gamma", "epochs", "learning_rate", "hidden", "mfs_per_input", "consequent_order")

TRAIN_OUTPUTS = ("model.json", "report.json")
COMPARE_OUTPUTS = ("report.json", *figure_files())


def _default_seed() -> int:
    return settings.default_seed


class SynthSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: Literal["seasonal_ar", "mackey_glass"] = "seasonal_ar"
    length: int
    seed: int = Field(default_factory=_default_seed)
    noise_level: float = Field(default=0.0, ge=0)


class DataRunConfig(BaseModel):
    """Settings shared by every command that trains: where the series comes from and how it is cut."""

    model_config = ConfigDict(extra="forbid")

    data: Optional[Path] = None
    synth: Optional[SynthSpec] = None
    lag: int = Field(default=DEFAULT_LAG, ge=1)
    mode: PatternMode = "lagged_o3"
    seed: int = Field(default_factory=_default_seed)
    fractions: Tuple[float, float, float] = DEFAULT_FRACTIONS
    output_dir: Path
    force: bool = False

    @model_validator(mode="after")
    def check_source(self):
        if (self.data is None) == (self.synth is None):
            raise ValueError("give exactly one of 'data' or 'synth'")
        return self

    def fingerprint(self) -> str:
        """Hash of every setting that affects results."""
        return fingerprint(self.model_dump(mode="json", exclude=self._run_only_fields()))

    @classmethod
    def _run_only_fields(cls) -> set:
        return {"output_dir", "force"}


class TrainRunConfig(DataRunConfig):
    model: ModelKind
    params: Dict[str, Any] = Field(default_factory=dict)


class CompareRunConfig(DataRunConfig):
    bel: Dict[str, Any] = Field(default_factory=dict)
    anfis: Dict[str, Any] = Field(default_factory=dict)
    mlp: Dict[str, Any] = Field(default_factory=dict)
    parallel: bool = True

    @classmethod
    def _run_only_fields(cls) -> set:
        return {"output_dir", "force", "parallel"}


def load_config_file(path: Optional[str]) -> Dict[str, Any]:
    if path is None:
        return {}
    file = Path(path)
    if not file.is_file():
        raise UsageError(f"config file not found: {file}")
    try:
        values = json.loads(file.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ConfigurationError(f"{file} is not valid JSON: {e}") from None
    if not isinstance(values, dict):
        raise ConfigurationError(f"{file} must hold a JSON object")
    return values


def build_run_config(cls: type, file_values: Dict[str, Any], flag_values: Dict[str, Any]):
    """File values first, explicitly given flags on top; unknown keys are rejected."""
    values = dict(file_values)
    for key, value in flag_values.items():
        if value is None:
            continue
        if isinstance(value, dict):
            values[key] = {**values.get(key, {}), **value}
        else:
            values[key] = value
    try:
        return cls.model_validate(values)
    except ValidationError as e:
        raise ConfigurationError(f"invalid run configuration: {e}") from None


def build_model_config(kind: str, input_dim: int, params: Dict[str, Any], seed: int) -> BaseModel:
    values = {"seed": seed, **params, "input_dim": input_dim}
    try:
        return MODEL_CONFIGS[kind](**values)
    except ValidationError as e:
        raise ConfigurationError(f"invalid {kind} parameters: {e}") from None


def load_series(config: DataRunConfig) -> Series:
    if config.data is not None:
        return load_csv(config.data)
    spec = config.synth
    return synth_series(spec.kind, spec.length, spec.seed, spec.noise_level)


def prepare_patterns(series: Series, config: DataRunConfig) -> PatternSet:
    """Window, split and normalize."""
    patterns = make_patterns(series, config.lag, config.mode)
    patterns = assign_splits(patterns, config.fractions, config.seed)
    counts = patterns.split_counts()
    logger.info(f"{len(patterns)} patterns: {counts['train']} train, {counts['validation']} validation, "
                f"{counts['test']} test")
    return normalize(patterns)


def pipeline_of(patterns: PatternSet) -> PipelineSpec:
    return PipelineSpec(lag=patterns.lag, mode=patterns.mode, input_channels=patterns.input_channels,
                        normalization=patterns.normalization)


def _open_output(path: Optional[str]) -> TextIO:
    if path is None:
        return sys.stdout
    try:
        target = Path(path)
        target.parent.mkdir(parents=True, exist_ok=True)
        return target.open("w", encoding="utf-8", newline="\n")
    except OSError as e:
        raise UsageError(f"cannot write {path}: {e}") from None


def _hyperparameters(args: argparse.Namespace) -> Dict[str, Any]:
    return {flag: getattr(args, flag) for flag in HYPERPARAMETER_FLAGS if getattr(args, flag, None) is not None}


@error_handler
def cmd_synth(args: argparse.Namespace) -> int:
    try:
        spec = SynthSpec(kind=args.kind, length=args.length, noise_level=args.noise_level,
                         **({} if args.seed is None else {"seed": args.seed}))
    except ValidationError as e:
        raise ConfigurationError(f"invalid synth settings: {e}") from None
    series = synth_series(spec.kind, spec.length, spec.seed, spec.noise_level)
    if args.output is None:
        write_csv(series, sys.stdout)
        return 0
    try:
        write_csv(series, args.output)
    except OSError as e:
        raise UsageError(f"cannot write {args.output}: {e}") from None
    return 0


def _data_flags(args: argparse.Namespace) -> Dict[str, Any]:
    return {
        "data": args.data,
        "lag": args.lag,
        "mode": args.mode,
        "seed": args.seed,
        "output_dir": args.output_dir,
        "force": args.force or None,
    }


@error_handler
def cmd_train(args: argparse.Namespace) -> int:
    flags = {**_data_flags(args), "model": args.model, "params": _hyperparameters(args) or None}
    config: TrainRunConfig = build_run_config(TrainRunConfig, load_config_file(args.config), flags)
    series = load_series(config)
    out_dir = prepare_output_dir(config.output_dir, TRAIN_OUTPUTS, config.force)

    patterns = prepare_patterns(series, config)
    model_config = build_model_config(config.model, patterns.input_dim, config.params, config.seed)
    model = fit_model(config.model, patterns, model_config)
    evaluation = evaluate_model(model, patterns)
    report = EvalReport(run_fingerprint=config.fingerprint(), split_counts=patterns.split_counts(),
                        models=[evaluation], ranking=rank_models([evaluation]))

    ModelPersistence.save_model(model, pipeline_of(patterns), out_dir / "model.json")
    ModelPersistence.save_report(report, out_dir / "report.json")
    test = evaluation.splits["test"]
    logger.info(f"{config.model} test COR {test.cor}, RMSE {test.rmse}, MAE {test.mae}")
    return 0


@error_handler
def cmd_compare(args: argparse.Namespace) -> int:
    flags = {**_data_flags(args), "parallel": False if args.sequential else None}
    config: CompareRunConfig = build_run_config(CompareRunConfig, load_config_file(args.config), flags)
    series = load_series(config)
    out_dir = prepare_output_dir(config.output_dir, COMPARE_OUTPUTS, config.force)

    patterns = prepare_patterns(series, config)
    configs = {
        kind: build_model_config(kind, patterns.input_dim, getattr(config, kind), config.seed)
        for kind in MODEL_KINDS
    }
    report = compare(configs, patterns, run_fingerprint=config.fingerprint(), parallel=config.parallel)
    ModelPersistence.save_report(report, out_dir / "report.json")
    write_figures(report, out_dir)
    for evaluation in report.models:
        status = f"failed ({evaluation.error})" if evaluation.failed else f"test COR {evaluation.test_cor()}"
        logger.info(f"{evaluation.kind}: {status}")
    logger.info(f"Ranking: {', '.join(report.ranking) or 'none'}")
    return 0


@error_handler
def cmd_predict(args: argparse.Namespace) -> int:
    model, pipeline = ModelPersistence.load_model(args.model)
    series = load_csv(args.data)
    records = replay(series, model, None, pipeline, adapt=args.adapt, include_next_day=args.next_day)
    stream = _open_output(args.output)
    try:
        count = write_lines(records, stream)
    finally:
        if stream is not sys.stdout:
            stream.close()
    logger.info(f"Wrote {count} predictions")
    return 0


@error_handler
def cmd_alarm(args: argparse.Namespace) -> int:
    if args.policy is None:
        raise UsageError("alarm needs --policy FILE.json; no default threshold is shipped")
    policy = load_policy(args.policy)
    model, pipeline = ModelPersistence.load_model(args.model)
    series = load_csv(args.data)
    records = replay(series, model, policy, pipeline, adapt=args.adapt, include_next_day=args.next_day)
    if args.dry_run:
        logger.info("Dry run: model, policy and data are consistent")
        return 0

    stream = _open_output(args.output)
    events = 0

    def emit(record) -> None:
        nonlocal events
        stream.write(record.model_dump_json() + "\n")
        events += record.event is not None

    try:
        count = stream_records(records, emit)
    finally:
        if stream is not sys.stdout:
            stream.close()
    logger.info(f"Replayed {count} days, {events} alarm event(s)")
    return 0


def _add_data_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--data", help="CSV file with date,o3[,uv,tsr]")
    parser.add_argument("--config", help="JSON file with run settings; explicit flags win")
    parser.add_argument("--lag", type=int, help=f"lagged inputs per pattern (default {DEFAULT_LAG})")
    parser.add_argument("--mode", choices=["lagged_o3", "sensors"], help="pattern mode (default lagged_o3)")
    parser.add_argument("--seed", type=int, help=f"split and training seed (default {settings.default_seed})")
    parser.add_argument("-o", "--output-dir", dest="output_dir", help="output directory")
    parser.add_argument("--force", action="store_true", help="overwrite a non-empty output directory")


def _add_replay_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--model", required=True, help="model bundle written by train")
    parser.add_argument("--data", required=True, help="CSV file with date,o3[,uv,tsr]")
    parser.add_argument("--adapt", action="store_true", help="online BEL update once each day's value is known")
    parser.add_argument("--next-day", dest="next_day", action="store_true",
                        help="also forecast the day after the last observation")
    parser.add_argument("-o", "--output", help="write JSON lines here instead of stdout")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="oz-sentinel",
        description="Next-day ozone forecasting with BEL, ANFIS and MLP predictors, plus threshold alarms.",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  %(prog)s synth --kind seasonal_ar --length 4205 --seed 7 -o data.csv
  %(prog)s train --model bel --lag 4 --data data.csv -o out/
  %(prog)s compare --data data.csv -o cmp/
  %(prog)s alarm --model out/model.json --policy policy.json --data data.csv
""",
    )
    parser.add_argument("--log-level", dest="log_level", help="overrides OZ_SENTINEL_LOG")
    sub = parser.add_subparsers(dest="command", required=True)

    synth = sub.add_parser("synth", help="write a synthetic series as CSV")
    synth.add_argument("--kind", choices=["seasonal_ar", "mackey_glass"], default="seasonal_ar")
    synth.add_argument("--length", type=int, default=4205)
    synth.add_argument("--seed", type=int)
    synth.add_argument("--noise-level", dest="noise_level", type=float, default=0.0)
    synth.add_argument("-o", "--output", help="CSV path (default stdout)")
    synth.set_defaults(handler=cmd_synth)

    train = sub.add_parser("train", help="fit one model and write model.json and report.json")
    train.add_argument("--model", choices=list(MODEL_KINDS))
    _add_data_arguments(train)
    train.add_argument("--epochs", type=int)
    train.add_argument("--learning-rate", dest="learning_rate", type=float)
    train.add_argument("--alpha", type=float, help="BEL amygdala rate")
    train.add_argument("--beta", type=float, help="BEL orbitofrontal rate")
    train.add_argument("--gamma", type=float, help="BEL amygdala decay")
    train.add_argument("--hidden", type=int, help="MLP hidden units")
    train.add_argument("--mfs-per-input", dest="mfs_per_input", type=int, help="ANFIS membership functions per input")
    train.add_argument("--consequent-order", dest="consequent_order", type=int, choices=[0, 1],
                       help="ANFIS rule output order")
    train.set_defaults(handler=cmd_train)

    predict = sub.add_parser("predict", help="stream next-day predictions as JSON lines")
    _add_replay_arguments(predict)
    predict.set_defaults(handler=cmd_predict)

    cmp = sub.add_parser("compare", help="train BEL, ANFIS and MLP on the same splits; write report and figures")
    _add_data_arguments(cmp)
    cmp.add_argument("--sequential", action="store_true", help="train the models one after another")
    cmp.set_defaults(handler=cmd_compare)

    alarm = sub.add_parser("alarm", help="replay a series through a model and emit alarm events")
    _add_replay_arguments(alarm)
    alarm.add_argument("--policy", help="JSON threshold policy")
    alarm.add_argument("--dry-run", dest="dry_run", action="store_true", help="validate inputs and exit")
    alarm.set_defaults(handler=cmd_alarm)
    return parser


def main(argv: Optional[list] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(args.log_level)
    return args.handler(args)


if __name__ == "__main__":
    sys.exit(main())
