"""qemb-exporter: produce QEMB embedding stores from pretrained encoders.

Standalone companion to the simquery engine. It speaks to that engine only
through files: the JSON-lines/TSV dataset schema on the way in, and the
QEMB binary format on the way out.
"""

__version__ = "0.1.0"


class ExportError(Exception):
    """Anything that prevents producing a valid QEMB file."""
