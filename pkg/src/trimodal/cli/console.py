from rich.console import Console

#: Shared console. Progress goes to stderr, results go to files.
console = Console(log_time=False, stderr=True)
