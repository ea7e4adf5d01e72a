"""Representative forms for modular, secondary, relative, and jet classes.

Class equality is always realized at form level with the canonical connection
constructions (bracket connections against metric connections) plus the
transgression identities; no cohomology spaces are computed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .algebroid import (
    AForm,
    AlgebroidChart,
    Morphism,
    jet_prolong,
    pullback,
    d_A,
)
from .connections import (
    AConnection,
    QuasiMetric,
    curvature,
    direct_sum,
    dual_connection,
    jet_bracket_connection,
    jet_morphism_connection,
    morphism_sum_connection,
    morphism_target_connection,
    orthogonal_connection,
    pullback_connection,
)
from .chern import bott_delta
from .expressions import ZERO, add
from .forms import AFormData
from .sampling import sample_points


@dataclass
class ClassReport:
    """A representative form together with how it was constructed."""

    identifier: str
    form: AForm
    metadata: dict = field(default_factory=dict)


def _closedness_residual(form: AForm, n_points: int = 40, seed: int = 5) -> float:
    if form.degree >= form.chart.rank:
        return 0.0
    points = sample_points(form.chart.dim, n_points, seed)
    return d_A(form).max_abs(points)


def modular_form(chart: AlgebroidChart, check: bool = True) -> AForm:
    """Degree-1 representative of the modular class on a trivialized chart.

    Coefficient on b*^i: sum_k gamma_ik^k + sum_j d(rho_i^j)/dx^j.
    """
    table = {}
    for i in range(chart.rank):
        coeff = ZERO
        for k in range(chart.rank):
            coeff = add(coeff, chart.gamma(i, k, k))
        for j in range(chart.dim):
            coeff = add(coeff, chart.anchor[i][j].diff(j))
        if not coeff.is_zero():
            table[(i,)] = coeff
    form = AForm(chart, AFormData(1, chart.rank, table))
    if check:
        residual = _closedness_residual(form)
        if residual > 1e-9:
            raise ValueError(f"modular form is not closed (residual {residual:.3g})")
    return form


def modular_form_morphism(phi: Morphism, check: bool = True) -> AForm:
    """Representative of the morphism modular class: lambda_A - phi* lambda_A'."""
    form = modular_form(phi.source, check=check) - pullback(
        phi, modular_form(phi.target, check=check)
    )
    if check:
        residual = _closedness_residual(form)
        if residual > 1e-9:
            raise ValueError(f"morphism modular form is not closed ({residual:.3g})")
    return form


def _default_metric(g: QuasiMetric | None, rank: int) -> QuasiMetric:
    return g if g is not None else QuasiMetric.identity(rank)


def _orthogonal_sum(phi_source: AlgebroidChart, rank_first: int, rank_second: int,
                    g_first: QuasiMetric | None, g_second: QuasiMetric | None) -> AConnection:
    first = orthogonal_connection(phi_source, _default_metric(g_first, rank_first))
    second = orthogonal_connection(phi_source, _default_metric(g_second, rank_second))
    return direct_sum(first, dual_connection(second))


def mu_form(phi: Morphism, h: int, g_source: QuasiMetric | None = None,
            g_target: QuasiMetric | None = None,
            orthogonal: AConnection | None = None,
            nodes: int | None = None, check: bool = True) -> ClassReport:
    """Secondary characteristic form of a base-preserving morphism.

    Builds the compatible bracket-connection sum on A + A'* against the metric
    connection sum and returns the transgression of c_{2h-1}.  A degree beyond
    the chart rank yields the zero form (not an error).
    """
    nabla1 = morphism_sum_connection(phi)
    nabla0 = orthogonal if orthogonal is not None else _orthogonal_sum(
        phi.source, phi.source.rank, phi.target.rank, g_source, g_target
    )
    order = 2 * h - 1
    if order > nabla1.rank:
        form = phi.source.zero_form(4 * h - 3)
    else:
        form = bott_delta([nabla0, nabla1], order, nodes=nodes)
    report = ClassReport(
        f"mu_{order}", form,
        {"morphism": phi.name, "h": h, "bundle_rank": nabla1.rank},
    )
    if check:
        report.metadata["closedness_residual"] = _closedness_residual(form)
    return report


def bi_characteristic(phi1: Morphism, phi2: Morphism, h: int,
                      nodes: int | None = None, check: bool = True) -> ClassReport:
    """Difference form between two morphisms with the same source and target."""
    if phi1.source is not phi2.source or phi1.target is not phi2.target:
        raise ValueError("bi-characteristic forms need a parallel pair of morphisms")
    nabla1 = morphism_sum_connection(phi1)
    nabla2 = morphism_sum_connection(phi2)
    order = 2 * h - 1
    if order > nabla1.rank:
        form = phi1.source.zero_form(4 * h - 3)
    else:
        form = bott_delta([nabla1, nabla2], order, nodes=nodes)
    report = ClassReport(
        f"bi_{order}", form,
        {"morphisms": [phi1.name, phi2.name], "h": h},
    )
    if check:
        report.metadata["closedness_residual"] = _closedness_residual(form)
    return report


def relative_mu(phi: Morphism, psi: Morphism, h: int,
                g_mid: QuasiMetric | None = None,
                g_far: QuasiMetric | None = None,
                nodes: int | None = None, check: bool = True) -> ClassReport:
    """Characteristic form of `psi` modulo `phi` for a two-step chain.

    phi: A -> A', psi: A' -> A''.  The source algebroid acts on both downstream
    bundles through the induced bracket connections; the result is a form on
    the chain source.
    """
    if psi.source is not phi.target:
        raise ValueError("relative classes need composable morphisms")
    composite = psi.compose(phi)
    d1 = direct_sum(
        morphism_target_connection(phi),
        dual_connection(morphism_target_connection(composite)),
    )
    d0 = _orthogonal_sum(phi.source, phi.target.rank, psi.target.rank,
                         g_mid, g_far)
    order = 2 * h - 1
    if order > d1.rank:
        form = phi.source.zero_form(4 * h - 3)
    else:
        form = bott_delta([d0, d1], order, nodes=nodes)
    report = ClassReport(
        f"relative_{order}", form,
        {"modulo": phi.name, "of": psi.name, "h": h},
    )
    if check:
        report.metadata["closedness_residual"] = _closedness_residual(form)
    return report


def jet_relative(phi: Morphism, h: int, variant: str = "flat",
                 g_source: QuasiMetric | None = None,
                 g_target: QuasiMetric | None = None,
                 nodes: int | None = None,
                 n_points: int = 50, seed: int = 42) -> ClassReport:
    """Relative characteristic form of a morphism modulo the jet projection.

    `variant="flat"` uses the flat jet connections (covariant derivative along
    a jet frame element is the bracket with its defining section);
    `variant="induced"` pulls the chart-level compatible connections back
    along the jet projection.  The metadata records the pointwise distance to
    the pullback of the absolute representative and the flatness residuals.
    """
    jet = jet_prolong(phi.source)
    pi1 = jet.projection()
    if variant == "flat":
        near = jet_bracket_connection(jet)
        far = jet_morphism_connection(jet, phi)
        d1 = direct_sum(near, dual_connection(far))
    elif variant == "induced":
        d1 = pullback_connection(pi1, morphism_sum_connection(phi))
    else:
        raise ValueError("variant must be 'flat' or 'induced'")
    absolute = mu_form(phi, h, g_source=g_source, g_target=g_target,
                       nodes=nodes, check=False)
    d0 = pullback_connection(
        pi1,
        _orthogonal_sum(phi.source, phi.source.rank, phi.target.rank,
                        g_source, g_target),
    )
    order = 2 * h - 1
    if order > d1.rank:
        form = jet.zero_form(4 * h - 3)
    else:
        form = bott_delta([d0, d1], order, nodes=nodes)
    points = sample_points(jet.dim, n_points, seed)
    pulled = pullback(pi1, absolute.form)
    metadata = {
        "morphism": phi.name,
        "h": h,
        "variant": variant,
        "pullback_residual": (form - pulled).max_abs(points),
        "closedness_residual": _closedness_residual(form),
    }
    if variant == "flat":
        metadata["jet_connection_flatness"] = max(
            curvature(near).max_abs(points),
            curvature(far).max_abs(points),
        )
    return ClassReport(f"jet_relative_{order}", form, metadata)
