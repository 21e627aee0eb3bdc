import sys
from importlib.metadata import version

__pkg__ = "trimodal"
__version__ = version(__pkg__)


def start(argv: list[str] | None = None):
    """
    CLI entry point. Requires the ``cli`` extra (``pip install trimodal[cli]``)
    which provides `rich <https://rich.readthedocs.io>`_ and matplotlib. Exits
    with a helpful message if the dependency is missing.

    Exit codes: 0 on success or CTRL+C, 1 on a runtime failure, 2 on a
    usage error (bad flags, missing inputs, an invalid config file).

    :param argv: Arguments to parse (``sys.argv[1:]`` when None).
    """

    try:
        import rich  # the cli's output, styling, and live statuses depend on rich: https://github.com/Textualize/rich
    except ImportError:
        print(
            f"{__pkg__} {__version__}: If you wish to run {__pkg__} as a CLI tool, "
            f"you will need to install the 'cli' extra by running 'pip install trimodal[cli]'"
        )
        sys.exit(1)

    import logging
    from datetime import datetime

    from pydantic import ValidationError
    from rich.logging import RichHandler

    from .commands import UsageError, parse_args
    from .console import console
    from .symbols import FAIL, INFO, WARN
    from ..errors import TrimodalError

    args = parse_args(argv)

    logging.basicConfig(
        level=logging.DEBUG if args.debug else logging.WARNING,
        handlers=[RichHandler(console=console, markup=True, show_level=True)],
        force=True,
    )

    start_time = datetime.now()
    try:
        console.log(
            f"{INFO} Started {__pkg__} {args.command} {__version__} "
            f"at {datetime.now().strftime('%x %X')}"
        )
        with console.status("[dim]Initialising…[/dim]") as status:
            args.func(args=args, status=status)
    except KeyboardInterrupt:
        console.log(f"{WARN} User interrupted ([bold yellow]CTRL+C[/bold yellow])")
        sys.exit(0)
    except (UsageError, ValidationError) as error:
        console.log(f"{FAIL} {error}")
        sys.exit(2)
    except (TrimodalError, OSError, ValueError) as error:
        console.log(f"{FAIL} {type(error).__name__}: {error}")
        sys.exit(1)

    finally:
        elapsed = (datetime.now() - start_time).total_seconds()
        console.log(f"{INFO} Finished in {elapsed:.1f} seconds")
