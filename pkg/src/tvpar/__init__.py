"""Local least squares inference for time-varying autoregressive coefficients."""

__version__ = "0.1.0"

from .arp import (
    AdfFit,
    LjungBoxResult,
    adf_fit,
    adf_t_stat,
    ar_p_inference,
    ljung_box,
    psi_p,
    select_lag_order,
)
from .bandwidth import (
    BandwidthReport,
    empirical_loss,
    empirical_nh_grid,
    loss_decomposition,
    rolling_forecast_errors,
    select_bandwidth,
    simulation_nh_grid,
)
from .critical import (
    QuantileTable,
    critical_value,
    embedded_table,
    psi_of,
    read_table,
    simulate_quantiles,
    write_table,
)
from .data import load_series, read_panel, transform_inflation, transform_rex
from .exceptions import *  # noqa: F401,F403
from .inference import (
    InferencePoint,
    Interval,
    Mue,
    Rho0Grid,
    confidence_interval,
    default_rho0_grid,
    infer_point,
    mue,
    trajectory,
)
from .local import LocalFit, TimeSeries, Window, local_fit, make_window, t_stat
from .pipeline import RunConfig, analyze
from .simulation import (
    DgpSpec,
    McMetrics,
    RhoShape,
    StudyConfig,
    full_catalog,
    parse_dgp,
    run_study,
    simulate_path,
)
