"""
Argument parser of the prunelab command.
"""

import argparse


def create_parser(prog: str = "prunelab") -> argparse.ArgumentParser:
    """
    Create the argument parser with one subcommand per stage.

    Args:
        prog: Program name

    Returns:
        Configured ArgumentParser
    """
    parser = argparse.ArgumentParser(
        prog=prog,
        description="Train, prune and diagnose ensembles of small networks.",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog=f"""\
exit codes:
  0  success
  1  failed cells or unreadable artifacts
  2  configuration errors

examples:
  {prog} train --config configs/desk.ini
  {prog} prune --checkpoint runs/desk/runs/Sup/None/s0/seed0/model.prnk --sparsity 0.5 --mode oneshot
  {prog} diagnose --manifest runs/desk/manifest.json
  {prog} report --manifest runs/desk/manifest.json --out report
""")
    parser.add_argument("-v", "--verbose", action="store_true", help="Log progress at INFO level")
    sub = parser.add_subparsers(dest="command", required=True)

    train = sub.add_parser("train", help="Run the experiment grid of a config file")
    train.add_argument("-c", "--config", required=True, metavar="PATH", help="Experiment INI file")
    train.add_argument("-o", "--output-dir", default=None, metavar="DIR",
                       help="Override [experiment] output_dir")
    train.add_argument("-w", "--workers", type=int, default=None,
                       help="Worker count, takes precedence over PRUNELAB_WORKERS")

    prune = sub.add_parser("prune", help="One-shot prune an existing checkpoint")
    prune.add_argument("--checkpoint", required=True, metavar="PATH")
    prune.add_argument("--sparsity", required=True, type=float)
    prune.add_argument("--mode", choices=["oneshot"], default="oneshot")
    prune.add_argument("--scope", choices=["global", "per_layer"], default="global")
    prune.add_argument("--out", default=None, metavar="PATH",
                       help="Output checkpoint (default: next to the input)")
    prune.add_argument("-c", "--config", default=None, metavar="PATH",
                       help="Experiment INI file; when given the pruned model is fine-tuned")

    diagnose = sub.add_parser("diagnose", help="Compute diagnostics tables of a finished grid")
    diagnose.add_argument("-m", "--manifest", required=True, metavar="PATH")

    report = sub.add_parser("report", help="Write report tables and figures")
    report.add_argument("-m", "--manifest", required=True, metavar="PATH")
    report.add_argument("--out", required=True, metavar="DIR")
    report.add_argument("--no-plots", action="store_true", help="Skip the figures")

    return parser
