# The MIT License (MIT)

# Copyright (c) 2024 ctcs-hrrl contributors

# Permission is hereby granted, free of charge, to any person obtaining a copy
# of this software and associated documentation files (the "Software"), to deal
# in the Software without restriction, including without limitation the rights
# to use, copy, modify, merge, publish, distribute, sublicense, and/or sell
# copies of the Software, and to permit persons to whom the Software is
# furnished to do so, subject to the following conditions:

# The above copyright notice and this permission notice shall be included in
# all copies or substantial portions of the Software.

# THE SOFTWARE IS PROVIDED "AS IS", WITHOUT WARRANTY OF ANY KIND, EXPRESS OR
# IMPLIED, INCLUDING BUT NOT LIMITED TO THE WARRANTIES OF MERCHANTABILITY,
# FITNESS FOR A PARTICULAR PURPOSE AND NONINFRINGEMENT. IN NO EVENT SHALL THE
# AUTHORS OR COPYRIGHT HOLDERS BE LIABLE FOR ANY CLAIM, DAMAGES OR OTHER
# LIABILITY, WHETHER IN AN ACTION OF CONTRACT, TORT OR OTHERWISE, ARISING FROM,
# OUT OF OR IN CONNECTION WITH THE SOFTWARE OR THE USE OR OTHER DEALINGS IN
# THE SOFTWARE.

"""
This python script runs a continuous-time homeostatic reinforcement learning
agent: it learns, from zero knowledge, to keep its resource levels near their
set points in a 2D world, and writes telemetry, plots, a summary and a
checkpoint of every run. It can also verify the analytical properties the
learning rule relies on.

Requirements:
    - numpy, pandas, matplotlib
    poetry install

Usage:
    python src/hrrl.py run --seed 7 --iterations 14000
    python src/hrrl.py verify all
    python src/hrrl.py config --dump > my.conf
 """

####################
# Standart libraries
####################
import argparse
import sys
from typing import List, Optional

#################
# Local libraries
#################
import callbacks
from constants import HRRL_CLI_DESCRIPTION
from verifyutils import SUITES

################
# Command parser
################
parser = argparse.ArgumentParser(prog="hrrl", description=HRRL_CLI_DESCRIPTION)

# Version
parser.add_argument(
    "-v", "--version", action="store_true", help="shows version", default=False
)

# Verbose messages
parser.add_argument(
    "-V",
    "--verbose",
    dest="verbose",
    action="store_true",
    help="verbose output (default: False)",
    default=False,
)

subparsers = parser.add_subparsers(help="sub-command help", dest="command")


def _add_config_flags(sub: argparse.ArgumentParser):
    sub.add_argument("-c", "--config", dest="config", help="path to a key = value config file")
    sub.add_argument("-s", "--seed", dest="seed", type=int, help="master seed")
    sub.add_argument(
        "-k", "--iterations", dest="iterations", type=int, help="number of iterations K"
    )
    sub.add_argument("-o", "--out", dest="out", help="output directory (default: 'runs')")
    sub.add_argument(
        "--set",
        dest="overrides",
        action="append",
        metavar="KEY=VALUE",
        help="override any config key (repeatable)",
    )


# Run command
runner = subparsers.add_parser("run", help="run the learning agent")
_add_config_flags(runner)
runner.add_argument(
    "--seeds", dest="seeds", help="comma separated seeds, run in parallel processes"
)
runner.add_argument(
    "-f",
    "--force",
    dest="force",
    action="store_true",
    help="write into <out>/seed<N> instead of a new timestamped directory (default: False)",
)
runner.add_argument(
    "-r", "--resume", dest="resume", help="continue from a checkpoint (.npz)"
)

# Verify command
verifier = subparsers.add_parser("verify", help="verify analytical properties")
verifier.add_argument(
    "suite",
    nargs="?",
    default="all",
    choices=sorted(SUITES) + ["all"],
    help="property suite to run (default: all)",
)
verifier.add_argument("-p", "--report", dest="report", help="also write the JSON report here")

# Config command
configurer = subparsers.add_parser("config", help="inspect the configuration")
_add_config_flags(configurer)
configurer.add_argument(
    "-d",
    "--dump",
    dest="dump",
    action="store_true",
    help="print every parameter with the provenance of its default",
)


def main(argv: Optional[List[str]] = None) -> int:
    """Parse `argv` and dispatch to the matching callback; returns the exit status"""
    args = parser.parse_args(argv)
    if args.version:
        return callbacks.on_version(args)
    if args.command == "run":
        return callbacks.on_run(args)
    if args.command == "verify":
        return callbacks.on_verify(args)
    if args.command == "config":
        return callbacks.on_config(args)
    parser.print_help()
    return callbacks.EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
