"""
ACP-PHONON - Command line interface

    acp-phonon ground-state --config run.yml --out results
    acp-phonon phonon --config run.yml --method acp
    acp-phonon benchmark --preset insulator1d --sizes 30,60,90 --methods dfpt,acp
    acp-phonon template --preset defect2d > defect.yml

The configuration is loaded and validated before anything is written, so a
malformed configuration leaves no output behind. Library errors map to the
process exit status: 2 for configuration, 3 for SCF and 4 for response and
phonon failures.

Copyright (c) 2019 The acp-phonon developers
"""
import sys
import logging
import argparse

from ._version import __version__
from .config import RunConfig
from .process import GroundStateProcess, PhononProcess, BenchmarkProcess
from .phonon import METHODS
from .templates import PRESETS, preset
from .utils import AcpException, ConfigError

LOG = logging.getLogger(__name__)

def _int_list(value):
    try:
        return [int(item) for item in value.split(",") if item.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError("'%s' is not a comma separated list of integers" % value)

def _method_list(value):
    methods = [item.strip() for item in value.split(",") if item.strip()]
    for method in methods:
        if method not in METHODS:
            raise argparse.ArgumentTypeError("Unknown method '%s', must be one of %s" % (method, ", ".join(METHODS)))
    return methods

def _add_common(parser):
    source = parser.add_mutually_exclusive_group(required=True)
    source.add_argument("--config", help="YAML run configuration")
    source.add_argument("--preset", choices=sorted(PRESETS), help="Built-in experiment configuration")
    parser.add_argument("--out", help="Output directory, overrides output.directory")
    parser.add_argument("--seed", type=int, help="Random seed, overrides numerics.seed")
    parser.add_argument("--debug", action="store_true", help="Enable debug logging")

def build_parser():
    parser = argparse.ArgumentParser(prog="acp-phonon",
                                     description="Phonon spectra of model Kohn-Sham systems by finite "
                                                 "differences, DFPT and the adaptively compressed polarizability")
    parser.add_argument("--version", action="version", version="%(prog)s " + __version__)
    commands = parser.add_subparsers(dest="command")

    cmd = commands.add_parser("ground-state", help="Self-consistent ground state")
    _add_common(cmd)

    cmd = commands.add_parser("phonon", help="Dynamical matrix, frequencies and DOS")
    _add_common(cmd)
    cmd.add_argument("--method", choices=METHODS, help="Single method, default is phonon.methods from the config")

    cmd = commands.add_parser("benchmark", help="Wall time scaling over system sizes")
    _add_common(cmd)
    cmd.add_argument("--sizes", type=_int_list, required=True, help="Comma separated numbers of atoms")
    cmd.add_argument("--methods", type=_method_list, help="Comma separated methods, default is phonon.methods")

    cmd = commands.add_parser("template", help="Print a complete configuration for a built-in experiment")
    cmd.add_argument("--preset", choices=sorted(PRESETS), default="insulator1d")
    return parser

def load_config(args):
    """
    :return: ``RunConfig`` with command line overrides applied
    """
    if args.config:
        rc = RunConfig.load(args.config)
    else:
        defaults, overrides = preset(args.preset)
        rc = RunConfig.from_yaml(defaults, overrides, source="preset %s" % args.preset)
    if args.out:
        rc = rc.copy(output={"directory" : args.out})
    if args.seed is not None:
        rc = rc.with_seed(args.seed)
    return rc

def _setup_logging(debug):
    logging.basicConfig(level=logging.DEBUG if debug else logging.INFO,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")

def run(args):
    if args.command == "template":
        defaults, overrides = preset(args.preset)
        sys.stdout.write(RunConfig.from_yaml(defaults, overrides, source="preset %s" % args.preset).to_yaml())
        return 0

    _setup_logging(args.debug)
    rc = load_config(args)
    outdir = rc.output["directory"]
    if args.command == "ground-state":
        GroundStateProcess(outdir).execute({"config" : rc})
    elif args.command == "phonon":
        PhononProcess(outdir).execute({"config" : rc, "method" : args.method})
    elif args.command == "benchmark":
        BenchmarkProcess(outdir).execute({"config" : rc, "sizes" : args.sizes, "methods" : args.methods})
    else:
        raise ConfigError("Unknown command '%s'" % args.command)
    LOG.info("Output written to %s", outdir)
    return 0

def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 2
    try:
        return run(args)
    except AcpException as exc:
        LOG.error("%s: %s", type(exc).__name__, exc)
        return exc.exit_code

if __name__ == "__main__":
    sys.exit(main())
