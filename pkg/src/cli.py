"""Command-line surface: sample, experiment, diagnose, erm, efficiency and serve."""
import argparse
import dataclasses
import json
import logging
import sys
from typing import List, Optional

import numpy as np

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
from src.models.experiment import ExperimentConfig
from src.services.config_loader import ConfigLoader
from src.services.coverage_experiment import CoverageExperiment
from src.services.data_loader import DataLoader
from src.services.diagnostics import ConvergenceDiagnostics
from src.services.efficiency_study import EfficiencyStudy
from src.services.erm_oracle import ErmOracle
from src.services.loss_functions import LossFunctions
from src.services.sampling_service import SamplingService
from src.services.scenario_simulator import ScenarioSimulator

logger = logging.getLogger(__name__)

CLI_ERRORS = (
    ConfigError, DiagnosticsError, EtelError, LossDomainError, ManifoldError,
    OptimizationError, PreconditionerError, ScenarioError, ValueError, FileNotFoundError,
)


def cmd_sample(args) -> int:
    config = ConfigLoader().load(args.config)
    result = SamplingService().run(config, seed=args.seed, progress=args.progress)
    DataLoader().save_chain_csv(result.chain, args.out)
    print(json.dumps(result.chain.summary(), indent=2, default=str))
    return 0


def cmd_experiment(args) -> int:
    config = ExperimentConfig(
        scenario=args.scenario,
        n=args.n,
        replicates=args.replicates,
        seed=args.seed,
        output_dir=args.out,
        algorithm=args.algorithm,
        precond_method=args.precond,
        posterior_kind=args.posterior,
        alpha_rule=args.alpha_rule,
        beta=args.beta,
        workers=args.workers,
    )
    if args.K is not None:
        config = dataclasses.replace(config, K=args.K)
    if args.burnin is not None:
        config = dataclasses.replace(config, burnin=args.burnin)
    if args.paper_scale:
        config = CoverageExperiment.at_full_scale(config)
    table = CoverageExperiment(config).run(progress=not args.quiet)
    print(table.to_frame().to_string(index=False))
    return 0


def cmd_diagnose(args) -> int:
    files = [f.strip() for f in args.chains.split(',') if f.strip()]
    chains = DataLoader().load_chains(files)
    report = ConvergenceDiagnostics().report(chains, threshold=args.threshold)
    DataLoader().save_diagnostics_csv(report, args.out)
    print(report.to_frame().to_string(index=False))
    for flag in report.flags:
        logger.warning(flag)
    return 0


def cmd_erm(args) -> int:
    simulator = ScenarioSimulator()
    dataset = simulator.generate(args.scenario, args.n, args.seed, with_truth=False)
    result = ErmOracle(LossFunctions(dataset.loss)).minimize(dataset.data, seed=args.seed)
    output = result.to_dict()
    if args.truth:
        truth = simulator.truth(args.scenario)
        output['truth'] = truth.tolist()
        output['distance_to_truth'] = float(np.linalg.norm(result.theta - truth))
    print(json.dumps(output, indent=2))
    return 0


def cmd_efficiency(args) -> int:
    study = EfficiencyStudy(n=args.n, replicates=args.replicates, K=args.K, seed=args.seed, output_dir=args.out)
    frame = study.run(args.study, progress=not args.quiet)
    print(EfficiencyStudy.summarize(frame).to_string())
    return 0


def cmd_serve(args) -> int:
    from src.api.app import app

    app.run(debug=args.debug, port=args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='riemannian-posterior',
        description="Riemannian RRWM/RMALA sampling, RPETEL posteriors and coverage experiments",
    )
    parser.add_argument("--log-level", default="INFO", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    sub = parser.add_subparsers(dest="cmd", required=True)

    sample = sub.add_parser("sample", help="Run one chain from a JSON config")
    sample.add_argument("--config", required=True, help="Run config (JSON)")
    sample.add_argument("--out", required=True, help="Chain CSV to write")
    sample.add_argument("--seed", type=int, default=None, help="Overrides the config seed")
    sample.add_argument("--progress", action="store_true")
    sample.set_defaults(func=cmd_sample)

    experiment = sub.add_parser("experiment", help="Coverage experiment over simulated replicates")
    experiment.add_argument("--scenario", required=True)
    experiment.add_argument("--n", type=int, default=500)
    experiment.add_argument("--replicates", type=int, default=CoverageExperiment.DESK_SCALE['replicates'])
    experiment.add_argument("--seed", type=int, default=0)
    experiment.add_argument("--out", default="outputs")
    experiment.add_argument("--paper-scale", "--full-scale", dest="paper_scale", action="store_true",
                            help="1000 replicates, K=3000 after 500 burn-in")
    experiment.add_argument("--K", type=int, default=None, help="Post burn-in chain length")
    experiment.add_argument("--burnin", type=int, default=None)
    experiment.add_argument("--algorithm", default="rrwm", choices=["rrwm", "rmala", "ambient-rwm"])
    experiment.add_argument("--precond", default="pilot-covariance",
                            choices=["identity", "plugin-sandwich", "pilot-covariance"])
    experiment.add_argument("--posterior", default="rpetel", choices=["rpetel", "gibbs"])
    experiment.add_argument("--alpha-rule", default="two_log_n")
    experiment.add_argument("--beta", type=float, default=None, help="Gibbs learning rate (default per scenario)")
    experiment.add_argument("--workers", type=int, default=1)
    experiment.add_argument("--quiet", action="store_true", help="No progress bar")
    experiment.set_defaults(func=cmd_experiment)

    diagnose = sub.add_parser("diagnose", help="ESS and PSRF for chain CSVs")
    diagnose.add_argument("--chains", required=True, help="Comma-separated chain CSV files")
    diagnose.add_argument("--out", required=True)
    diagnose.add_argument("--threshold", type=float, default=ConvergenceDiagnostics.THRESHOLD)
    diagnose.set_defaults(func=cmd_diagnose)

    erm = sub.add_parser("erm", help="Empirical risk minimizer for a simulated scenario")
    erm.add_argument("--scenario", required=True)
    erm.add_argument("--n", type=int, required=True)
    erm.add_argument("--seed", type=int, default=0)
    erm.add_argument("--truth", action="store_true", help="Also report the population target")
    erm.set_defaults(func=cmd_erm)

    efficiency = sub.add_parser("efficiency", help="ESS and PSRF convergence across sampler settings")
    efficiency.add_argument("--study", default="samplers", choices=sorted(EfficiencyStudy.STUDIES))
    efficiency.add_argument("--n", type=int, default=500)
    efficiency.add_argument("--replicates", type=int, default=20)
    efficiency.add_argument("--K", type=int, default=5000)
    efficiency.add_argument("--seed", type=int, default=0)
    efficiency.add_argument("--out", default="outputs")
    efficiency.add_argument("--quiet", action="store_true")
    efficiency.set_defaults(func=cmd_efficiency)

    serve = sub.add_parser("serve", help="Start the JSON API")
    serve.add_argument("--port", type=int, default=5001)
    serve.add_argument("--debug", action="store_true")
    serve.set_defaults(func=cmd_serve)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=getattr(logging, args.log_level), format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    if hasattr(args, 'alpha_rule'):
        try:
            args.alpha_rule = float(args.alpha_rule)
        except ValueError:
            pass
    try:
        return args.func(args)
    except CLI_ERRORS as e:
        message = e.args[0] if isinstance(e, KeyError) and e.args else e
        logger.error("%s", message)
        return 2


if __name__ == '__main__':
    sys.exit(main())
