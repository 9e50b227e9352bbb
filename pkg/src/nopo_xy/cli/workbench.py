from rich.console import Console

from .config.settings import Settings
from .services.chains import ChainRunner
from .services.experiment import ExperimentRunner
from .services.output import OutputWriter
from .services.tables import AnalyticsTables
from .services.validation import ValidationSuites


class Workbench:
    """Owns the settings of one CLI invocation and the services built on them."""

    def __init__(self, settings: Settings, console: Console | None = None):
        self.settings = settings
        self.console = console or Console()

        # Services
        self._chains = None
        self._experiments = None
        self._output = None
        self._tables = None
        self._validation = None

    @property
    def chains(self):
        if self._chains is None:
            self._chains = ChainRunner(self)
        return self._chains

    @property
    def experiments(self):
        if self._experiments is None:
            self._experiments = ExperimentRunner(self)
        return self._experiments

    @property
    def output(self):
        if self._output is None:
            self._output = OutputWriter(self)
        return self._output

    @property
    def tables(self):
        if self._tables is None:
            self._tables = AnalyticsTables(self)
        return self._tables

    @property
    def validation(self):
        if self._validation is None:
            self._validation = ValidationSuites(self)
        return self._validation
