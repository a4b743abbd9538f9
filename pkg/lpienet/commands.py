#
# This file is part of lpienet.
#
# SPDX-FileCopyrightText: 2024 The lpienet developers
#
# SPDX-License-Identifier: LGPL-3.0-only
#

"""The sub-commands behind the lpienet executable.

Each cmd_* takes the parsed arguments and the global Config and returns an
exit code. Errors are translated here: usage and configuration problems
(missing files included) give 2, every other failure gives 1.
"""

import os
from dataclasses import replace

from lpienet.config import Config, dumps
from lpienet.degrade import DegradationConfig, degradation_schema, make_pair
from lpienet.degrade import preset as degradation_preset
from lpienet.exports.lpienet_csv import Export as CsvExport
from lpienet.exports.lpienet_log import Export as LogExport
from lpienet.globals import (
    EXIT_FAILURE,
    EXIT_OK,
    EXIT_USAGE,
    ConfigError,
    FormatError,
    LpienetError,
    atomic_write,
    file_exists,
    printandflush,
)
from lpienet.imageio import image_format, read_image, write_image
from lpienet.logger import logger
from lpienet.model import LPIENet, LPIENetConfig, load_checkpoint, save_checkpoint
from lpienet.model import preset as model_preset
from lpienet.objectives import psnr, ssim
from lpienet.outputs.lpienet_stdout import LpienetStdout
from lpienet.outputs.lpienet_table import bench_table, flops_table_text, layer_table
from lpienet.profiler import (
    MIN_ITERATIONS,
    MIN_WARMUP,
    complexity_report,
    count_params,
    flops_table,
    parse_resolutions,
    run_benchmarks,
)
from lpienet.timer import Counter
from lpienet.train import load_folder, read_train_config, train_loop

# Default task of clean-only datasets trained without degrade.* keys
DEFAULT_TRAIN_TASK = 'denoise'


def _require_file(path, key):
    if not file_exists(path):
        raise ConfigError(key, f'no such file: {path}')


def _require_image_output(path, key='output'):
    try:
        image_format(path)
    except FormatError as err:
        raise ConfigError(key, err.reason)
    directory = os.path.dirname(os.path.abspath(path))
    if not os.path.isdir(directory):
        raise ConfigError(key, f'no such directory: {directory}')


def _seed_override(args, config):
    """True when --seed has to replace the seed of a configuration file."""
    return getattr(args, 'seed_given', False) or not config.has_option('seed')


def _model_config(args, file_config):
    """LPIENetConfig from the model.* keys of a training file, or from --preset."""
    if args.preset is not None and not file_config.has_option('model.preset'):
        file_config.set_value('model.preset', args.preset)
    return LPIENetConfig.from_config(file_config, prefix='model.')


def _profiled_model(args):
    if args.model is not None:
        _require_file(args.model, 'model')
        return load_checkpoint(args.model)
    return model_preset(args.preset)


#######
# TRAIN
#######


def cmd_train(args, config=None):
    """Train on --data and write the best checkpoint to --out."""
    if not os.path.isdir(args.data):
        raise ConfigError('data', f'no such directory: {args.data}')
    if args.train_config is not None:
        _require_file(args.train_config, 'config')
        train_cfg, file_config, degradation = read_train_config(args.train_config)
    else:
        train_cfg, file_config, degradation = read_train_config(text='')
    if args.resume is not None:
        _require_file(args.resume, 'resume')
    if _seed_override(args, file_config):
        train_cfg = replace(train_cfg, seed=args.seed)
    model_config = _model_config(args, file_config)

    samples = load_folder(args.data)
    if degradation is None and not all(sample.paired for sample in samples):
        degradation = degradation_preset(DEFAULT_TRAIN_TASK)
        logger.info(f'No degrade.* keys: clean images are degraded with the {DEFAULT_TRAIN_TASK} preset')

    model = LPIENet.build(model_config, rng=train_cfg.seed)
    log_file = args.log or f'{args.out}.log'
    header = dumps({**train_cfg.to_dict(), **{f'model.{k}': v for k, v in model_config.to_dict().items()}})
    exporters = [LogExport(log_file, header=header, append=args.resume is not None)]
    if args.export_csv is not None:
        exporters.append(CsvExport(args.export_csv))
    try:
        result = train_loop(
            model,
            samples,
            train_cfg,
            degradation=degradation,
            checkpoint_path=args.out,
            last_checkpoint_path=f'{args.out}.last',
            resume=args.resume,
            exporters=exporters,
        )
    finally:
        for exporter in exporters:
            exporter.exit()

    if result.epochs_run == 0:
        # Nothing trained: the checkpoint holds the initial (or resumed) weights
        save_checkpoint(result.model, args.out)
    LpienetStdout().update(
        {
            'epochs_run': result.epochs_run,
            'best_val_loss': result.best_val_loss,
            'params': result.model.param_count(),
            'checkpoint': args.out,
        }
    )
    return EXIT_OK


#########
# ENHANCE
#########


def cmd_enhance(args, config=None):
    """Run a checkpoint on one image, optionally scoring it against --reference."""
    _require_file(args.model, 'model')
    _require_file(args.input, 'input')
    if args.reference is not None:
        _require_file(args.reference, 'reference')
    _require_image_output(args.output)

    model = load_checkpoint(args.model)
    image = read_image(args.input)
    counter = Counter()
    output = model.self_ensemble(image) if args.ensemble else model.forward(image)
    logger.info(f'Enhanced {args.input} in {counter.get():.3f}s (ensemble: {args.ensemble})')
    write_image(args.output, output)

    if args.reference is not None:
        reference = read_image(args.reference)
        LpienetStdout().update({'psnr_db': psnr(output, reference), 'ssim': ssim(output, reference)})
    return EXIT_OK


#########
# DEGRADE
#########


def cmd_degrade(args, config=None):
    """Degrade one clean image with a task preset and write the effective parameters beside it."""
    _require_file(args.input, 'input')
    _require_image_output(args.output)
    base = degradation_preset(args.task)
    if args.degrade_config is not None:
        _require_file(args.degrade_config, 'config')
        overrides = Config(args.degrade_config, schema=degradation_schema())
        cfg = DegradationConfig.from_config(overrides, base=base)
        if _seed_override(args, overrides):
            cfg = replace(cfg, seed=args.seed)
    else:
        cfg = replace(base, seed=args.seed)

    clean = read_image(args.input)
    degraded, _ = make_pair(clean, cfg)
    write_image(args.output, degraded)
    sidecar = f'{args.output}.conf'
    atomic_write(sidecar, cfg.dumps().encode('utf-8'))
    LpienetStdout().update({'task': cfg.task, 'seed': cfg.seed, 'output': args.output, 'config': sidecar})
    return EXIT_OK


#########
# PROFILE
#########


def cmd_profile(args, config=None):
    """Parameters, MACs and FLOPs of a preset or a checkpoint at each resolution."""
    model = _profiled_model(args)
    resolutions = parse_resolutions(args.resolutions)
    if not resolutions:
        raise ConfigError('resolutions', 'empty list')
    params = count_params(model)
    table = flops_table(model, resolutions)

    printandflush(flops_table_text(table))
    if args.layers:
        first = resolutions[0]
        printandflush('')
        printandflush(layer_table(complexity_report(model, first.height, first.width)))
    stdout = LpienetStdout()
    for resolution in resolutions:
        h, w = resolution.padded
        report = complexity_report(model, h, w)
        stdout.update(
            {
                'resolution': resolution.label,
                'width': resolution.width,
                'height': resolution.height,
                'params': params,
                'macs': report.total_macs,
                'gmacs': report.gmacs,
                'gflops': report.gflops,
            }
        )
    return EXIT_OK


#######
# BENCH
#######


def cmd_bench(args, config=None):
    """Time forward passes; resolutions that do not fit in memory are reported as failed."""
    model = _profiled_model(args)
    if not isinstance(model, LPIENet):
        model = LPIENet.build(model, rng=args.seed)
    resolutions = parse_resolutions(args.resolutions)
    if not resolutions:
        raise ConfigError('resolutions', 'empty list')
    # Validated before any timing
    if args.iters < MIN_ITERATIONS:
        raise ConfigError('iters', f'at least {MIN_ITERATIONS} iterations are needed, got {args.iters}')
    if args.warmup < MIN_WARMUP:
        raise ConfigError('warmup', f'at least {MIN_WARMUP} warmup passes are needed, got {args.warmup}')

    results = run_benchmarks(model, resolutions, iters=args.iters, warmup=args.warmup)
    printandflush(bench_table(results))
    stdout = LpienetStdout()
    for result in results:
        stdout.update(result.to_dict())
    return EXIT_FAILURE if all(result.failed for result in results) else EXIT_OK


######
# EVAL
######


def cmd_eval(args, config=None):
    """PSNR (dB) and SSIM of pred against target."""
    _require_file(args.pred, 'pred')
    _require_file(args.target, 'target')
    pred = read_image(args.pred)
    target = read_image(args.target)
    LpienetStdout().update({'psnr_db': psnr(pred, target), 'ssim': ssim(pred, target)})
    return EXIT_OK


###########
# GRADCHECK
###########


def cmd_gradcheck(args, config=None):
    """Every op, loss, an IRA block and the tiny model over --seeds seeds; 1 when any check fails."""
    # Imported here: building the cases pulls in the whole model
    from lpienet.checks import run_suite

    if args.seeds < 1:
        raise ConfigError('seeds', f'must be >= 1, got {args.seeds}')
    if not args.threshold > 0:
        raise ConfigError('threshold', f'must be > 0, got {args.threshold}')
    stdout = LpienetStdout()
    failures = 0
    for seed in range(args.seed, args.seed + args.seeds):
        for name, report, passed in run_suite(seed, args.threshold, model=args.model):
            failures += not passed
            stdout.update(
                {
                    'check': name,
                    'seed': seed,
                    'max_rel_error': report.max_relative_error,
                    'checked': report.checked,
                    'skipped': report.skipped,
                    'status': 'ok' if passed else 'failed',
                }
            )
    logger.info(f'Gradcheck: {failures} failed checks over {args.seeds} seeds')
    return EXIT_FAILURE if failures else EXIT_OK


COMMAND_HANDLERS = {
    'train': cmd_train,
    'enhance': cmd_enhance,
    'degrade': cmd_degrade,
    'profile': cmd_profile,
    'bench': cmd_bench,
    'eval': cmd_eval,
    'gradcheck': cmd_gradcheck,
}


def run(args, config=None):
    """Run the selected sub-command and return its exit code."""
    handler = COMMAND_HANDLERS[args.command]
    counter = Counter()
    try:
        code = handler(args, config)
    except ConfigError as err:
        logger.critical(f'{args.command}: {err}')
        code = EXIT_USAGE
    except LpienetError as err:
        logger.critical(f'{args.command}: {err}')
        code = EXIT_FAILURE
    except MemoryError:
        logger.critical(f'{args.command}: out of memory')
        code = EXIT_FAILURE
    logger.debug(f'Command {args.command} returned {code} in {counter.get():.3f}s')
    return code
