class ExportError(Exception):
    """Anything that stops an export: bad config, unreadable inputs, bad format."""
