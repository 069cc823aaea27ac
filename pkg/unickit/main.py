from __future__ import annotations

import sys
from typing import TYPE_CHECKING, Any

from unickit.cli.parse_cmd_line import parse_cmd_line
from unickit.commands import (
    cmd_demo_forward,
    cmd_eval,
    cmd_gen_uic,
    cmd_match,
    cmd_validate,
)
from unickit.exceptions.local_exceptions import UnicKitError
from unickit.log_utils import configure_logging

if TYPE_CHECKING:
    from collections.abc import Callable, Sequence

COMMANDS: dict[str, Callable[[Any], int]] = {
    "eval": cmd_eval,
    "gen-uic": cmd_gen_uic,
    "match": cmd_match,
    "demo-forward": cmd_demo_forward,
    "validate": cmd_validate,
}


def run(argv: Sequence[str] | None = None) -> int:
    """Parse, dispatch and map toolkit errors to their exit codes."""
    try:
        args = parse_cmd_line(argv)
        configure_logging(debug=args["debug"])
        return COMMANDS[args["command"]](args)
    except UnicKitError as exc:
        print(f"Error: {exc}", file=sys.stderr)  # noqa: T201
        return exc.exit_code


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
