#
# This file is part of lpienet.
#
# SPDX-FileCopyrightText: 2024 The lpienet developers
#
# SPDX-License-Identifier: LGPL-3.0-only
#

"""lpienet main class: command line front end.

Nothing here imports numpy: the thread cap has to be exported to the
environment before the numerical libraries are loaded.
"""

import argparse
import platform
import sys
from logging import DEBUG

from lpienet import __version__
from lpienet.config import Config
from lpienet.globals import EXIT_USAGE, ConfigError, resolve_threads, set_thread_limit
from lpienet.logger import LOG_FILENAME, logger

COMMANDS = ('train', 'enhance', 'degrade', 'profile', 'bench', 'eval', 'gradcheck')

# Keys of the global lpienet.conf file; None means "no default"
GLOBAL_SCHEMA = {
    'seed': None,
    'threads': None,
    'preset': None,
    'resolutions': None,
}


class LpienetMain:
    """Main class: parse the command line and load the global configuration."""

    # Defaults of the sub-commands
    DEFAULT_PRESET = 'lpienet'
    DEFAULT_BENCH_RESOLUTIONS = '256,512'
    DEFAULT_PROFILE_RESOLUTIONS = '256,800,fhd,2k,4k'
    DEFAULT_ITERS = 5
    DEFAULT_WARMUP = 2
    DEFAULT_SEEDS = 5
    DEFAULT_THRESHOLD = 1e-4

    # Examples of use
    example_of_use = """
Examples of use:
  Train on a folder of clean PNG images (clean/ and optional degraded/ sub-folders):
    $ lpienet train --data data/ --config conf/train.conf --out model.lpck

  Continue an interrupted run and keep a CSV copy of the epoch log:
    $ lpienet train --data data/ --config conf/train.conf --out model.lpck --resume model.lpck.last \\
        --export-csv train.csv

  Enhance an image (self-ensemble over the 8 flips/rotations) and score it:
    $ lpienet enhance --model model.lpck --input noisy.png --output clean.png --ensemble --reference gt.png

  Synthesize a degraded image (the effective parameters go to out.png.conf):
    $ lpienet --seed 3 degrade --input gt.png --task udc --output out.png

  Count parameters and FLOPs of a preset at several resolutions:
    $ lpienet profile --preset lpienet-l --resolutions 256,800,1920x1080 --layers

  Time forward passes on 2 threads:
    $ lpienet --threads 2 bench --resolutions 256,fhd --iters 10

  Compare two images:
    $ lpienet eval pred.png target.png

  Check every analytic gradient against finite differences:
    $ lpienet gradcheck --seeds 5
"""

    def __init__(self, argv=None):
        """Manage the command line arguments."""
        self.config = None
        self.args = self.parse_args(argv)

    def version_msg(self):
        """Return the version message."""
        version = f'lpienet version:\t{__version__}\n'
        version += f'Python version:\t\t{platform.python_version()}\n'
        version += f'Log file:\t\t{LOG_FILENAME}\n'
        return version

    def init_args(self):
        """Init all the command line arguments."""
        parser = argparse.ArgumentParser(
            prog='lpienet',
            conflict_handler='resolve',
            formatter_class=argparse.RawDescriptionHelpFormatter,
            epilog=self.example_of_use,
        )
        parser.add_argument('-V', '--version', action='version', version=self.version_msg())
        parser.add_argument('-d', '--debug', action='store_true', default=False, dest='debug', help='enable debug mode')
        parser.add_argument('-C', '--config', dest='conf_file', help='path to the global configuration file')
        parser.add_argument(
            '--seed', type=int, default=None, dest='seed', help='seed of every random draw (default: 0)'
        )
        parser.add_argument(
            '--threads',
            default=None,
            dest='threads',
            help='cap the worker threads of the numerical libraries (fallback: LPIE_THREADS)',
        )
        subparsers = parser.add_subparsers(dest='command', metavar='command')
        subparsers.required = True

        # train
        train = subparsers.add_parser('train', help='train a model on a folder of images')
        train.add_argument('--data', required=True, help='dataset folder holding clean/ and optionally degraded/')
        train.add_argument('--config', dest='train_config', help='training configuration file')
        train.add_argument('--out', required=True, help='output checkpoint (best validation loss)')
        train.add_argument('--resume', default=None, help='checkpoint to continue from')
        train.add_argument('--export-csv', default=None, dest='export_csv', help='append the epoch log to a CSV file')
        train.add_argument('--log', default=None, help='epoch log file (default: <out>.log)')
        train.add_argument('--preset', default=None, help='model preset, unless the config sets model.* keys')

        # enhance
        enhance = subparsers.add_parser('enhance', help='run a trained model on an image')
        enhance.add_argument('--model', required=True, help='checkpoint file')
        enhance.add_argument('--input', required=True, help='input image (.png or .lpt)')
        enhance.add_argument('--output', required=True, help='output image (.png or .lpt)')
        enhance.add_argument(
            '--ensemble', action='store_true', default=False, help='average the 8 flips/rotations of the input'
        )
        enhance.add_argument('--reference', default=None, help='ground truth image; print psnr_db and ssim')

        # degrade
        degrade = subparsers.add_parser('degrade', help='apply the image formation model to a clean image')
        degrade.add_argument('--input', required=True, help='clean image (.png or .lpt)')
        degrade.add_argument('--task', required=True, choices=('denoise', 'deblur', 'hdr', 'udc'), help='preset')
        degrade.add_argument('--config', dest='degrade_config', default=None, help='key=value overrides of the preset')
        degrade.add_argument('--output', required=True, help='degraded image (.png or .lpt)')

        # profile
        profile = subparsers.add_parser('profile', help='count parameters, MACs and FLOPs')
        profile.add_argument('--preset', default=None, help=f'model preset (default: {self.DEFAULT_PRESET})')
        profile.add_argument('--model', default=None, help='profile the architecture of a checkpoint instead')
        profile.add_argument(
            '--resolutions', default=None, help=f'N, WxH or fhd/2k/4k (default: {self.DEFAULT_PROFILE_RESOLUTIONS})'
        )
        profile.add_argument(
            '--layers', action='store_true', default=False, help='print the per-layer table at the first resolution'
        )

        # bench
        bench = subparsers.add_parser('bench', help='time forward passes')
        bench.add_argument('--preset', default=None, help=f'model preset (default: {self.DEFAULT_PRESET})')
        bench.add_argument('--model', default=None, help='benchmark a checkpoint instead')
        bench.add_argument(
            '--resolutions', default=None, help=f'N, WxH or fhd/2k/4k (default: {self.DEFAULT_BENCH_RESOLUTIONS})'
        )
        bench.add_argument('--iters', type=int, default=self.DEFAULT_ITERS, help='timed passes (at least 5)')
        bench.add_argument('--warmup', type=int, default=self.DEFAULT_WARMUP, help='untimed passes (at least 2)')

        # eval
        evaluate = subparsers.add_parser('eval', help='PSNR and SSIM of an image against a reference')
        evaluate.add_argument('pred', help='image to score')
        evaluate.add_argument('target', help='reference image')

        # gradcheck
        gradcheck = subparsers.add_parser('gradcheck', help='compare analytic and numeric gradients')
        gradcheck.add_argument('--seeds', type=int, default=self.DEFAULT_SEEDS, help='number of seeds')
        gradcheck.add_argument(
            '--threshold', type=float, default=self.DEFAULT_THRESHOLD, help='maximum relative error'
        )
        gradcheck.add_argument(
            '--no-model', action='store_false', default=True, dest='model', help='skip the whole-model check'
        )

        return parser

    def init_debug(self, args):
        """Init lpienet debug mode."""
        if args.debug:
            logger.setLevel(DEBUG)

    def init_config(self, args):
        """Load the global configuration file (-C, then the per-user and system-wide locations)."""
        self.config = Config(args.conf_file, schema=GLOBAL_SCHEMA, search=args.conf_file is None)

    def init_threads(self, args):
        """Set the thread cap: --threads, then LPIE_THREADS, then the configuration file."""
        threads = resolve_threads(args.threads)
        if threads is None and self.config.has_option('threads'):
            threads = resolve_threads(self.config.get_value('threads'))
        set_thread_limit(threads)
        args.threads = threads
        if threads is not None:
            logger.debug(f'Worker threads capped to {threads}')

    def init_seed(self, args):
        if args.seed is None:
            args.seed = self.config.get_int_value('seed', 0)
            args.seed_given = False
        else:
            args.seed_given = True
        if args.seed < 0:
            raise ConfigError('seed', f'must be >= 0, got {args.seed}')

    def init_defaults(self, args):
        """Fill the sub-command defaults that the configuration file may override."""
        if hasattr(args, 'preset') and args.command != 'train' and args.preset is None:
            args.preset = self.config.get_value('preset', self.DEFAULT_PRESET)
        if getattr(args, 'resolutions', 'unset') is None:
            default = self.DEFAULT_PROFILE_RESOLUTIONS if args.command == 'profile' else self.DEFAULT_BENCH_RESOLUTIONS
            args.resolutions = self.config.get_value('resolutions', default)

    def parse_args(self, argv=None):
        """Parse command line arguments.

        Usage and configuration errors log a critical message and exit with 2.
        """
        args = self.init_args().parse_args(argv)

        # Init lpienet debug mode
        self.init_debug(args)

        try:
            self.init_config(args)
            self.init_threads(args)
            self.init_seed(args)
            self.init_defaults(args)
        except ConfigError as err:
            logger.critical(str(err))
            sys.exit(EXIT_USAGE)

        logger.debug(f'Command line: {args}')
        return args

    def get_config(self):
        """Return the global configuration object."""
        return self.config

    def get_args(self):
        """Return the arguments."""
        return self.args
