# CLI subcommands, one register() per module
