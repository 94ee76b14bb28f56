from typing import TYPE_CHECKING

import numpy as np
import matplotlib.pyplot as plt

from Gradient_Reversal_Adaptation.Visualizations.Visualize import IVisualize

if TYPE_CHECKING:
    import Gradient_Reversal_Adaptation.Experiments.Tables as Tables


class GridHeatmap(IVisualize):
    """
    Visualizes the mean error of a ($\\lambda$, f) grid as heatmap; the best cell is framed.
    """

    def __init__(self, table: "Tables.ResultTable", **kwargs):
        super(GridHeatmap, self).__init__(**kwargs)
        self.table = table

    def matrix(self) -> (list, list, np.ndarray):
        """
        Returns the row keys, the column keys and the mean errors (NaN for missing cells).
        """
        rows = sorted({key[0] for key in self.table.keys()})
        columns = sorted({key[1] for key in self.table.keys()})
        values = np.full((len(rows), len(columns)), np.nan)
        for row in self.table.rows():
            values[rows.index(row.key[0]), columns.index(row.key[1])] = row.mean_error
        return rows, columns, values

    def plot(self, **kwargs) -> (plt.Figure, plt.Axes):
        """
        Plots the heatmap.

        Parameters
        ----------
        **kwargs
            Options for further customization of the plots.
            - title(str): Title for plot<br>
            - cmap(str): Colormap.<br>

        Returns
        -------
        Figure
            Containing the axes with the plots (use Figure.show() to display).
        Axes
            Containing the plots (arrange custom summary).
        """
        rows, columns, values = self.matrix()
        image = self.ax.imshow(values, cmap=kwargs.get("cmap", "viridis_r"), aspect="auto")
        self.fig.colorbar(image, ax=self.ax, label="Error (%)")
        best = self.table.argmin()
        for i, row in enumerate(rows):
            for j, column in enumerate(columns):
                if not np.isnan(values[i, j]):
                    self.ax.annotate(
                        f"{values[i, j]:.1f}",
                        xy=(j, i),
                        horizontalalignment="center",
                        verticalalignment="center",
                        fontsize=IVisualize.fontsize,
                        fontweight="bold" if (row, column) == best else "normal",
                    )
        self.ax.add_patch(
            plt.Rectangle(
                (columns.index(best[1]) - 0.5, rows.index(best[0]) - 0.5), 1, 1, fill=False, linewidth=2
            )
        )
        self.ax.set_xticks(range(len(columns)), [str(c) for c in columns])
        self.ax.set_yticks(range(len(rows)), [str(r) for r in rows])
        self.ax.set_xlabel(self.table.key_names[1])
        self.ax.set_ylabel(self.table.key_names[0])
        self.ax.set_title(kwargs.get("title", "Error of the adapted models"))
        self._set_tight_layout(x_spacing=None)
        return self.fig, self.ax


class HoursSweep(IVisualize):
    """
    Visualizes the mean error (with standard error bars) over the amount of adaptation data for one or more sweeps,
    together with the error of the unadapted model.
    """

    def __init__(self, tables: dict[str, "Tables.ResultTable"], **kwargs):
        super(HoursSweep, self).__init__(**kwargs)
        self.tables = tables

    def plot(self, **kwargs) -> (plt.Figure, plt.Axes):
        """
        Plots one curve per table.

        Returns
        -------
        Figure
            Containing the axes with the plots (use Figure.show() to display).
        Axes
            Containing the plots (arrange custom summary).
        """
        baselines = []
        for number, (label, table) in enumerate(self.tables.items()):
            rows = sorted(table.rows(), key=lambda r: float(r.key[0]))
            self.ax.errorbar(
                [float(r.key[0]) for r in rows],
                [r.mean_error for r in rows],
                yerr=[r.standard_error for r in rows],
                label=label,
                color=IVisualize.COLORS[number % len(IVisualize.COLORS)],
                marker="o",
                capsize=3,
            )
            baselines += [r.mean_baseline for r in rows]
        if baselines:
            self.ax.axhline(float(np.mean(baselines)), color="grey", linestyle=":", label="Unadapted")
        self.ax.set_xlabel("Adaptation data (hours)")
        self.ax.set_ylabel("Error (%)")
        self.ax.set_title(kwargs.get("title", "Error over the amount of adaptation data"))
        self._set_primary_legend()
        self._set_tight_layout(y_spacing=0.05)
        return self.fig, self.ax
