# Root conftest: pytest prepends this directory to sys.path so the flat
# top-level packages (config, ml, analysis, validation, cli) import as-is.
