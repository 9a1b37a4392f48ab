import json
from pathlib import Path
from typing import Annotated, Any, Iterable, Sequence, TextIO, Tuple, Union
import logging

from pydantic import BaseModel, Field, TypeAdapter, ValidationError

from anfis import AnfisModel
from bel_core import BelModel
from error_handlers import ConfigurationError, ModelFileError, OutputExistsError
from mlp import MlpModel
from models import EvalReport, PatternSet, PipelineSpec

logger = logging.getLogger(__name__)

AnyModel = Annotated[Union[BelModel, AnfisModel, MlpModel], Field(discriminator="kind")]
_model_adapter = TypeAdapter(AnyModel)

PathLike = Union[str, Path]


class ModelPersistence:
    """JSON files for model bundles, pattern sets and reports."""

    @staticmethod
    def _write_json(path: Path, payload: Any) -> Path:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
        return path

    @staticmethod
    def _read_json(path: Path, error: type) -> Any:
        if not path.is_file():
            raise error(f"file not found: {path}")
        try:
            return json.loads(path.read_text(encoding="utf-8"))
        except (json.JSONDecodeError, UnicodeDecodeError) as e:
            raise error(f"{path} is not valid JSON: {e}") from None

    @staticmethod
    def save_model(model: BaseModel, pipeline: PipelineSpec, path: PathLike) -> Path:
        """Model fields plus the `pipeline` that turns raw series values into its inputs."""
        payload = model.model_dump(mode="json")
        payload["pipeline"] = pipeline.model_dump(mode="json")
        path = ModelPersistence._write_json(Path(path), payload)
        logger.info(f"Saved {payload['kind']} model to {path}")
        return path

    @staticmethod
    def load_model(path: PathLike) -> Tuple[Union[BelModel, AnfisModel, MlpModel], PipelineSpec]:
        path = Path(path)
        payload = ModelPersistence._read_json(path, ModelFileError)
        if not isinstance(payload, dict) or "pipeline" not in payload:
            raise ModelFileError(f"{path} is not a model bundle (no 'pipeline' key)")
        try:
            pipeline = PipelineSpec.model_validate(payload.pop("pipeline"))
            model = _model_adapter.validate_python(payload)
        except ValidationError as e:
            raise ModelFileError(f"invalid model bundle {path}: {e}") from None
        if model.input_dim != len(pipeline.input_channels):
            raise ModelFileError(
                f"{path}: model input length {model.input_dim} does not match its pipeline "
                f"({len(pipeline.input_channels)} channels)")
        logger.info(f"Loaded {model.kind} model from {path}")
        return model, pipeline

    @staticmethod
    def save_report(report: EvalReport, path: PathLike) -> Path:
        path = ModelPersistence._write_json(Path(path), report.model_dump(mode="json"))
        logger.info(f"Saved report to {path}")
        return path

    @staticmethod
    def load_report(path: PathLike) -> EvalReport:
        path = Path(path)
        try:
            return EvalReport.model_validate(ModelPersistence._read_json(path, ConfigurationError))
        except ValidationError as e:
            raise ConfigurationError(f"invalid report {path}: {e}") from None

    @staticmethod
    def save_patterns(patterns: PatternSet, path: PathLike) -> Path:
        path = ModelPersistence._write_json(Path(path), patterns.model_dump(mode="json"))
        logger.info(f"Saved {len(patterns)} patterns to {path}")
        return path

    @staticmethod
    def load_patterns(path: PathLike) -> PatternSet:
        path = Path(path)
        try:
            return PatternSet.model_validate(ModelPersistence._read_json(path, ConfigurationError))
        except ValidationError as e:
            raise ConfigurationError(f"invalid pattern file {path}: {e}") from None


def write_lines(records: Iterable[BaseModel], stream: TextIO) -> int:
    """One compact JSON object per line."""
    count = 0
    for record in records:
        stream.write(record.model_dump_json() + "\n")
        count += 1
    return count


def prepare_output_dir(path: PathLike, outputs: Sequence[str] = (), force: bool = False) -> Path:
    """Create the output directory; a non-empty one needs `force`.

    With `force` only the files named in `outputs` are removed; everything else in the
    directory is left alone.
    """
    path = Path(path)
    if path.exists() and not path.is_dir():
        raise OutputExistsError(f"{path} exists and is not a directory")
    if path.is_dir() and any(path.iterdir()):
        if not force:
            raise OutputExistsError(f"output directory {path} is not empty; pass --force to overwrite")
        replaced = [path / name for name in outputs if (path / name).is_file()]
        for target in replaced:
            target.unlink()
        logger.info(f"Replacing {len(replaced)} existing output file(s) in {path}")
    path.mkdir(parents=True, exist_ok=True)
    return path
