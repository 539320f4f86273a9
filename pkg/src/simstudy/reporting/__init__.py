from simstudy.reporting.plots import Plot, box_stats, plot_eval, plot_eval_by, plot_evals
from simstudy.reporting.records import EvalRecord, evals_to_records, records_to_csv, sim_records
from simstudy.reporting.report import generate_report, record_provenance, stale_sources
from simstudy.reporting.scaffold import create_scaffold
from simstudy.reporting.tables import TableSpec, build_table, format_number, tabulate_eval

__all__ = [
    "EvalRecord", "Plot", "TableSpec", "box_stats", "build_table", "create_scaffold",
    "evals_to_records", "format_number", "generate_report", "plot_eval", "plot_eval_by",
    "plot_evals", "record_provenance", "records_to_csv", "sim_records", "stale_sources",
    "tabulate_eval",
]
