"""Exterior calculus on Lie algebroid charts and characteristic class forms."""

from .expressions import ScalarField, parse_expression, differentiate
from .forms import AFormData, generalized_delta, wedge
from .algebroid import (
    AForm,
    AlgebroidChart,
    Morphism,
    Section,
    anchor_apply,
    bracket,
    build_link_chart,
    check_morphism,
    d_A,
    jet_lift,
    jet_prolong,
    pullback,
    verify_axioms,
)
from .connections import (
    AConnection,
    ConnectionFamily,
    FormMatrix,
    QuasiMetric,
    bracket_connection,
    covariant_derivative,
    curvature,
    direct_sum,
    distinguished_pair,
    dual_connection,
    glue,
    k_flatness_check,
    link_curvature,
    metric_compat_check,
    morphism_sum_connection,
    orthogonal_connection,
    quasi_metric_on_S,
)
from .chern import (
    bott_delta,
    chern_form,
    chern_polarized,
    chern_scalar,
    cocycle_check,
    fiber_integrate,
    odd_vanishing_check,
    transgression_check,
)
from .classes import (
    ClassReport,
    bi_characteristic,
    jet_relative,
    modular_form,
    modular_form_morphism,
    mu_form,
    relative_mu,
)
from .fixtures import Fixture, FixtureError, load_fixture, resolve_fixture

__version__ = "0.1.0"
