"""Service for reading JSON run configurations."""
import json
import logging
from pathlib import Path
from typing import Any, Dict, Optional, Union

from src.models.chain import SamplerConfig
from src.models.errors import ConfigError
from src.models.experiment import RunConfig
from src.models.loss import LossModel
from src.models.manifold import ManifoldSpec

logger = logging.getLogger(__name__)


class ConfigLoader:
    """Parses ``{manifold, loss, posterior, sampler, chain, data}`` JSON into a RunConfig."""

    REQUIRED_SECTIONS = ('manifold', 'loss', 'chain', 'data')

    def __init__(self, config_dir: Optional[Union[str, Path]] = None):
        if config_dir is None:
            project_root = Path(__file__).parent.parent.parent
            config_dir = project_root / "data" / "configs"
        self.config_dir = Path(config_dir)

    def load(self, filename: Union[str, Path]) -> RunConfig:
        path = Path(filename)
        if not path.exists() and not path.is_absolute():
            path = self.config_dir / path
        if not path.exists():
            raise ConfigError(f"config file not found: {filename}")
        with open(path, 'r', encoding='utf-8') as f:
            try:
                data = json.load(f)
            except json.JSONDecodeError as e:
                raise ConfigError(f"{path} is not valid JSON: {e}") from e
        logger.info("loaded run config %s", path)
        return self.from_dict(data)

    def from_dict(self, data: Dict[str, Any]) -> RunConfig:
        if not isinstance(data, dict):
            raise ConfigError("a run config must be a JSON object")
        missing = [s for s in self.REQUIRED_SECTIONS if s not in data]
        if missing:
            raise ConfigError(f"config is missing section(s): {', '.join(missing)}")

        manifold = ManifoldSpec.from_dict(data['manifold'])
        loss = LossModel.from_dict(data['loss'], manifold)
        posterior = dict(data.get('posterior', {'kind': 'rpetel'}))
        sampler = SamplerConfig.from_dict(data.get('sampler', {}))
        chain = data['chain']
        try:
            K, burnin = int(chain['K']), int(chain.get('burnin', 0))
        except (KeyError, TypeError, ValueError) as e:
            raise ConfigError(f"chain section needs an integer K: {e}") from e
        return RunConfig(
            manifold=manifold,
            loss=loss,
            posterior=posterior,
            sampler=sampler,
            K=K,
            burnin=burnin,
            data=dict(data['data']),
            seed=int(data.get('seed', 0)),
        )

    @staticmethod
    def to_dict(config: RunConfig) -> Dict[str, Any]:
        return {
            'manifold': config.manifold.to_dict(),
            'loss': config.loss.to_dict(),
            'posterior': dict(config.posterior),
            'sampler': config.sampler.to_dict(),
            'chain': {'K': config.K, 'burnin': config.burnin},
            'data': dict(config.data),
            'seed': config.seed,
        }
