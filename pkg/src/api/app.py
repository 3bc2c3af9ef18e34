"""Flask API for the Riemannian posterior sampler."""
import logging
import sys
from pathlib import Path

import numpy as np
from flask import Flask, jsonify, request
from flask_cors import CORS

# Add project root to path
project_root = Path(__file__).parent.parent.parent
sys.path.insert(0, str(project_root))

from src.models.errors import (
    ConfigError,
    DiagnosticsError,
    EtelError,
    LossDomainError,
    ManifoldError,
    OptimizationError,
    PreconditionerError,
    ScenarioError,
)
from src.models.manifold import ManifoldSpec
from src.services.config_loader import ConfigLoader
from src.services.diagnostics import ConvergenceDiagnostics
from src.services.erm_oracle import ErmOracle
from src.services.loss_functions import LossFunctions
from src.services.manifold_geometry import ManifoldGeometry
from src.services.posterior_inference import PosteriorInference
from src.services.sampling_service import SamplingService
from src.services.scenario_simulator import ScenarioSimulator

logger = logging.getLogger(__name__)

app = Flask(__name__)
CORS(app)

# Initialize services
simulator = ScenarioSimulator()
config_loader = ConfigLoader()
sampling_service = SamplingService(simulator=simulator)
diagnostics = ConvergenceDiagnostics()

LIBRARY_ERRORS = (
    ConfigError, DiagnosticsError, EtelError, LossDomainError, ManifoldError,
    OptimizationError, PreconditionerError, ScenarioError, ValueError,
)


def library_error(e):
    """Library errors become a JSON 400."""
    message = e.args[0] if isinstance(e, KeyError) and e.args else str(e)
    return jsonify({'success': False, 'error': message}), 400


for _error in LIBRARY_ERRORS:
    app.register_error_handler(_error, library_error)


def _payload() -> dict:
    data = request.get_json(silent=True)
    if not isinstance(data, dict):
        raise ConfigError('request body must be a JSON object')
    return data


@app.route('/api/scenarios', methods=['GET'])
def list_scenarios():
    """List the registered simulation scenarios."""
    return jsonify({
        'success': True,
        'scenarios': [simulator.get(name).to_dict() for name in simulator.names],
    })


@app.route('/api/erm', methods=['POST'])
def fit_erm():
    """Empirical risk minimizer of a simulated scenario."""
    data = _payload()
    scenario = data.get('scenario')
    if scenario is None:
        raise ConfigError("'scenario' is required")
    dataset = simulator.generate(scenario, int(data.get('n', 500)), int(data.get('seed', 0)), with_truth=False)
    result = ErmOracle(LossFunctions(dataset.loss)).minimize(
        dataset.data, restarts=data.get('restarts'), seed=int(data.get('seed', 0))
    )
    return jsonify(_json_safe({'success': True, 'erm': result.to_dict()}))


@app.route('/api/sample', methods=['POST'])
def sample():
    """Run one chain from a config object; states are returned when ``return_states`` is set."""
    data = _payload()
    config = config_loader.from_dict(data.get('config', {}))
    result = sampling_service.run(config, seed=data.get('seed'))
    response = {
        'success': True,
        'chain': result.chain.summary(),
        'erm': result.erm.to_dict(),
    }
    if data.get('return_states', False):
        response['states'] = result.chain.states.tolist()
    return jsonify(_json_safe(response))


@app.route('/api/diagnose', methods=['POST'])
def diagnose():
    """ESS and PSRF for chains given as lists of state vectors."""
    data = _payload()
    chains = data.get('chains')
    if not chains:
        raise DiagnosticsError("'chains' must be a non-empty list of state arrays")
    report = diagnostics.report([np.asarray(c, dtype=float) for c in chains], data.get('threshold'))
    return jsonify({'success': True, 'diagnostics': _json_safe(report.to_dict())})


@app.route('/api/region', methods=['POST'])
def credible_region():
    """Wald-type credible region from posterior draws, with an optional membership test."""
    data = _payload()
    spec = ManifoldSpec.from_dict(data.get('manifold', {}))
    inference = PosteriorInference(ManifoldGeometry.for_spec(spec))
    draws = np.asarray(data.get('draws', []), dtype=float)
    summary = inference.credible_region(draws, float(data.get('alpha', 0.05)), data.get('radius'))
    response = {'success': True, 'region': summary.to_dict()}
    if 'theta' in data:
        membership = inference.region_membership(summary, np.asarray(data['theta'], dtype=float))
        response['membership'] = {
            'member': bool(membership.member),
            'quadratic_form': membership.quadratic_form,
            'outside_radius': membership.outside_radius,
        }
    return jsonify(_json_safe(response))


def _json_safe(value):
    """Replace non-finite floats with None so the response is valid JSON."""
    if isinstance(value, dict):
        return {k: _json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_safe(v) for v in value]
    if isinstance(value, (float, np.floating)):
        return float(value) if np.isfinite(value) else None
    if isinstance(value, np.integer):
        return int(value)
    return value


if __name__ == '__main__':
    app.run(debug=True, port=5001)
