"""Reproducible simulation studies: models, methods, metrics and reports."""

__version__ = "0.1.0"

from simstudy.components import (  # noqa: E402
    MEAN,
    MEDIAN,
    STANDARD_ERROR,
    AggregatorSpec,
    ComponentId,
    ExtendedMethodSpec,
    MethodExtensionSpec,
    MethodSpec,
    MetricSpec,
    ModelSpec,
    compose_extended,
    new_aggregator,
    new_method_extension,
    new_method_spec,
    new_metric_spec,
    new_model_spec,
)
from simstudy.batches import DrawsBatch, EvalsBatch, OutputBatch  # noqa: E402
from simstudy.engine import (  # noqa: E402
    ParallelOptions,
    Simulation,
    evaluate,
    generate_model,
    get_draws,
    get_evals,
    get_models,
    get_outputs,
    load_simulation,
    new_simulation,
    relabel,
    rename,
    run_method,
    save_simulation,
    simulate_from_model,
    subset_simulation,
)
from simstudy.reporting import (  # noqa: E402
    create_scaffold,
    evals_to_records,
    generate_report,
    plot_eval,
    plot_eval_by,
    plot_evals,
    record_provenance,
    tabulate_eval,
)
