"""
Main entry point for the inflap package.
"""

import argparse
import logging
import os
import sys
from pathlib import Path

PACKAGE_ROOT = Path(__file__).parent
PRESET_DIR = PACKAGE_ROOT / 'presets'
DEFAULT_OUTPUT_DIR = 'inflap-runs'
OUTPUT_ENV = 'INFLAP_OUTPUT_DIR'

from .tools.config import parse_config
from .tools.experiment import EXIT_ERROR, RunManifest, run_text


def list_presets():
    return sorted(path.stem for path in PRESET_DIR.glob('*.cfg'))


def preset_path(name: str) -> Path:
    path = PRESET_DIR / f'{name}.cfg'
    if not path.is_file():
        raise FileNotFoundError(f"unknown preset '{name}' (available: {', '.join(list_presets())})")
    return path


def output_dir(args, name: str, text: str) -> Path:
    """--out wins, then output.directory from the config, then $INFLAP_OUTPUT_DIR/<name>."""
    if args.out:
        return Path(args.out)
    try:
        configured = parse_config(text).output.directory
    except ValueError:
        configured = None
    if configured:
        return Path(configured)
    return Path(os.environ.get(OUTPUT_ENV, DEFAULT_OUTPUT_DIR)) / name


def print_manifest(manifest: RunManifest, out_dir: Path):
    print("\nRun Summary:")
    print("------------")
    print(f"Status: {manifest.status} (exit code {manifest.exit_code})")
    for name, verdict in manifest.verdicts.items():
        label = 'n/a' if verdict is None else ('pass' if verdict else 'FAIL')
        print(f"  {name}: {label}")
    if manifest.failure and manifest.exit_code != EXIT_ERROR:
        print(f"Reason: {manifest.failure}")
    print(f"Output: {out_dir} ({', '.join(manifest.files)})")
    if manifest.exit_code == EXIT_ERROR:
        print(f"\nError: {manifest.failure}", file=sys.stderr)


def execute(args, name: str, text: str, deterministic=None) -> int:
    out_dir = output_dir(args, name, text)
    manifest = run_text(text, out_dir, threads=args.threads, deterministic=deterministic)
    print_manifest(manifest, out_dir)
    return manifest.exit_code


def run_command(args) -> int:
    """Run an experiment config file."""
    try:
        text = Path(args.config).read_text(encoding='utf-8')
    except OSError as e:
        print(f"\nError: {str(e)}", file=sys.stderr)
        return EXIT_ERROR
    return execute(args, Path(args.config).stem, text, True if args.deterministic else None)


def presets_command(args) -> int:
    """List or show the shipped experiment presets."""
    if args.action == 'list':
        for name in list_presets():
            print(name)
        return 0
    try:
        print(preset_path(args.name).read_text(encoding='utf-8'), end='')
    except OSError as e:
        print(f"\nError: {str(e)}", file=sys.stderr)
        return EXIT_ERROR
    return 0


def check_command(args) -> int:
    """Run a preset deterministically and apply its verdicts."""
    try:
        text = preset_path(args.name).read_text(encoding='utf-8')
    except OSError as e:
        print(f"\nError: {str(e)}", file=sys.stderr)
        return EXIT_ERROR
    return execute(args, args.name, text, deterministic=True)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description='inflap - numerical laboratory for inhomogeneous infinity-Laplacian equations'
    )
    parser.add_argument(
        '--verbose',
        action='store_true',
        help='Log solver progress at DEBUG level'
    )
    subparsers = parser.add_subparsers(dest='command', help='Available commands')

    run_parser = subparsers.add_parser(
        'run',
        help='Run an experiment config'
    )
    run_parser.add_argument(
        'config',
        help='Path to a section.key = value experiment file'
    )
    run_parser.add_argument(
        '--deterministic',
        action='store_true',
        help='Force deterministic mode (no wall-clock data in summary.json)'
    )

    presets_parser = subparsers.add_parser(
        'presets',
        help='List or show shipped presets'
    )
    presets_parser.add_argument(
        'action',
        choices=['list', 'show']
    )
    presets_parser.add_argument(
        'name',
        nargs='?',
        help='Preset name (for show)'
    )

    check_parser = subparsers.add_parser(
        'check',
        help='Run a preset and apply its verdicts'
    )
    check_parser.add_argument(
        'name',
        help='Preset name'
    )

    for sub in (run_parser, check_parser):
        sub.add_argument(
            '--out',
            help=f'Output directory (default: ${OUTPUT_ENV}/<name> or ./{DEFAULT_OUTPUT_DIR}/<name>)'
        )
        sub.add_argument(
            '--threads',
            type=int,
            help='Worker threads for red_black sweeps'
        )
    return parser


def main(argv=None):
    """Main entry point."""
    parser = build_parser()
    args = parser.parse_args(argv)

    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format='%(levelname)s %(name)s: %(message)s',
    )

    if args.command == 'run':
        code = run_command(args)
    elif args.command == 'presets':
        if args.action == 'show' and not args.name:
            parser.error('presets show needs a preset name')
        code = presets_command(args)
    elif args.command == 'check':
        code = check_command(args)
    else:
        parser.print_help()
        code = EXIT_ERROR
    sys.exit(code)


if __name__ == '__main__':
    main()
