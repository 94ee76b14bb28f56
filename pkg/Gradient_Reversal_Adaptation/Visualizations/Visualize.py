from abc import abstractmethod
from typing import Final, Optional
import warnings

import matplotlib.pyplot as plt

import Gradient_Reversal_Adaptation.Models.Types as Types
import Gradient_Reversal_Adaptation.Models.Exceptions as Exceptions


class IVisualize:
    """
    Base of every plot of the package: owns a figure with one set of axes and draws into it on demand.
    """

    COLORS: Final[list[str]] = ["salmon", "gold", "lawngreen", "turquoise", "thistle"]
    """Colors of the curves, in order of appearance."""
    fontsize = "x-small"
    """Font size of legends and annotations."""

    def __init__(self, ax: Optional[plt.Axes] = None, default_style: bool = True, **kwargs):
        """
        Parameters
        ----------
        ax: Optional[matplotlib.pyplot.Axes]
            Axes to draw into; a new figure is created if not given.
        default_style: bool
            If false and SciencePlots is installed, the science style is used.
        **kwargs
            Passed to matplotlib.pyplot.subplots for a new figure.
        """
        plt.style.use("science" if not default_style and "science" in plt.style.available else "default")
        if ax is None:
            self.fig, self.ax = plt.subplots(**kwargs)
        else:
            self.ax = ax
            self.fig = ax.get_figure()
        self.ax.patch.set_alpha(0)
        warnings.filterwarnings("ignore")

    def _set_primary_legend(self) -> None:
        self.ax.legend(
            bbox_to_anchor=(1.02, 1),
            loc="upper left",
            borderaxespad=0,
            framealpha=0,
            fontsize=IVisualize.fontsize,
        )

    def _set_tight_layout(self, y_spacing: Optional[float] = None, x_spacing: Optional[float] = 0) -> None:
        if y_spacing is not None or x_spacing is not None:
            self.ax.margins(y=y_spacing, x=x_spacing)
        self.fig.tight_layout()

    @abstractmethod
    def plot(self, **kwargs) -> (plt.Figure, plt.Axes):
        """
        Draws the plot into the axes of the visualizer.

        Example
        -------
        ```
        import Gradient_Reversal_Adaptation as GRA

        fig, ax = GRA.AccuracyTrajectory(records).plot(title="Adaptation")
        fig.savefig("trajectory.png")
        ```

        Parameters
        ----------
        **kwargs
            Options of the concrete plot.

        Returns
        -------
        Figure
            Figure holding the axes.
        Axes
            Axes with the plot.
        """
        raise NotImplementedError

    def show(self, **kwargs) -> None:
        """
        Draws the plot and opens the figure window (same options as plot).
        """
        self.plot(**kwargs)
        self.fig.show()

    def save(self, path: str, **kwargs) -> None:
        """
        Draws the plot into an image file and closes the figure.
        """
        self.plot(**kwargs)
        self.fig.savefig(path, dpi=kwargs.get("dpi", 150))
        plt.close(self.fig)


class AccuracyTrajectory(IVisualize):
    """
    Visualizes the training and validation accuracies of the senone classifier and, for the adaptation stage, of the
    domain classifier over the epochs.
    """

    def __init__(self, records: list[Types.MetricsRecord], **kwargs):
        if len(records) == 0:
            raise Exceptions.DataError("At least one epoch is required for a trajectory")
        super(AccuracyTrajectory, self).__init__(**kwargs)
        self.records: list[Types.MetricsRecord] = records

    def curves(self) -> dict[str, list[float]]:
        """
        Returns the plotted curves keyed by label (domain curves only if the records carry them).
        """
        curves = {
            "Senone (train)": [r.senone_acc_train for r in self.records],
            "Senone (valid)": [r.senone_acc_valid for r in self.records],
        }
        if all(r.has_domain_metrics for r in self.records):
            curves["Domain (train)"] = [r.domain_acc_train for r in self.records]
            curves["Domain (valid)"] = [r.domain_acc_valid for r in self.records]
        return curves

    def plot(self, **kwargs) -> (plt.Figure, plt.Axes):
        """
        Plots the accuracy curves.

        Parameters
        ----------
        **kwargs
            Options for further customization of the plots.
            - title(str): Title for plot<br>
            - lambda_axis(bool): If true, the gradient reversal coefficient is drawn on a secondary axis.<br>

        Returns
        -------
        Figure
            Containing the axes with the plots (use Figure.show() to display).
        Axes
            Containing the plots (arrange custom summary).
        """
        epochs = [r.epoch for r in self.records]
        for number, (label, values) in enumerate(self.curves().items()):
            self.ax.plot(
                epochs,
                values,
                label=label,
                color=IVisualize.COLORS[number // 2 * 2],
                linestyle="-" if number % 2 == 0 else "--",
                marker="o",
                markersize=3,
            )
        self.ax.set_xlabel("Epoch")
        self.ax.set_ylabel("Accuracy")
        self.ax.set_ylim(0, 1.02)
        self.ax.set_xticks(epochs)
        if kwargs.get("lambda_axis", False) and any(r.lambda_effective for r in self.records):
            secondary = self.ax.twinx()
            secondary.step(
                epochs, [r.lambda_effective for r in self.records], where="mid", color="grey", alpha=0.5
            )
            secondary.set_ylabel("$\\lambda_e$")
        self.ax.set_title(kwargs.get("title", "Accuracy during the adaptation stage"))
        self._set_primary_legend()
        self._set_tight_layout(y_spacing=0.05)
        return self.fig, self.ax
