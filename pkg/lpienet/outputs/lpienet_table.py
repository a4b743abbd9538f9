#
# This file is part of lpienet.
#
# SPDX-FileCopyrightText: 2024 The lpienet developers
#
# SPDX-License-Identifier: LGPL-3.0-only
#

"""Human readable text tables (profile and bench reports)."""

from lpienet.globals import format_value, printandflush


class LpienetTable:
    """Fixed-width text table.

    :param columns: list of (key, header) tuples
    """

    separator = '  '
    na = 'N/A'

    def __init__(self, columns):
        self.columns = columns

    def end(self):
        pass

    def _cell(self, row, key):
        if key not in row or row[key] is None:
            return self.na
        return format_value(row[key])

    def render(self, rows):
        cells = [[header for _, header in self.columns]]
        cells += [[self._cell(row, key) for key, _ in self.columns] for row in rows]
        widths = [max(len(line[i]) for line in cells) for i in range(len(self.columns))]
        lines = []
        for number, line in enumerate(cells):
            # First column left aligned, numbers right aligned
            text = self.separator.join(
                cell.ljust(width) if i == 0 else cell.rjust(width) for i, (cell, width) in enumerate(zip(line, widths))
            )
            lines.append(text.rstrip())
            if number == 0:
                lines.append(self.separator.join('-' * width for width in widths))
        return '\n'.join(lines)

    def update(self, rows):
        printandflush(self.render(rows))


BENCH_COLUMNS = [('gflops', 'FLOPs (G)'), ('resolution', 'Resolution'), ('mean_s', 'Mean (s)'), ('min_s', 'Min (s)')]

LAYER_COLUMNS = [('path', 'Layer'), ('params', 'Params'), ('macs', 'MACs')]

FLOPS_COLUMNS = [('resolution', 'Resolution'), ('gflops', 'FLOPs (G)')]


def bench_table(results):
    """Table of BenchResults; failed runs show 'failed' in the time columns."""
    rows = []
    for result in results:
        row = {'gflops': round(result.gflops, 2), 'resolution': result.resolution.label}
        if result.failed:
            row['mean_s'] = row['min_s'] = 'failed'
        else:
            row['mean_s'], row['min_s'] = result.mean, result.min
        rows.append(row)
    return LpienetTable(BENCH_COLUMNS).render(rows)


def layer_table(report):
    rows = [{'path': row.path, 'params': row.params, 'macs': row.macs} for row in report.rows]
    rows.append({'path': 'total', 'params': report.total_params, 'macs': report.total_macs})
    return LpienetTable(LAYER_COLUMNS).render(rows)


def flops_table_text(table):
    rows = [{'resolution': resolution.label, 'gflops': round(gflops, 2)} for resolution, gflops in table]
    return LpienetTable(FLOPS_COLUMNS).render(rows)
