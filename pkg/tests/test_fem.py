import math

import numpy as np
import pytest
import scipy.sparse as sp
import scipy.linalg as la
from numpy.testing import assert_allclose

from maxwell2d import (CRACKED_SQUARE, SQUARE_PI, AssemblyError, FormKind,
                       TripletMatrix, assemble_form, build_criss_cross,
                       build_dofmap, build_uniform, l2_project,
                       make_quadrature, reference_element, shape_functions,
                       shape_gradients)
from maxwell2d.fem import reference_nodes, scalar_kernels
from maxwell2d.meshgen import Mesh


def monomial_integral(a, b):
    # exact value of x^a y^b over the reference triangle
    return math.factorial(a) * math.factorial(b) / math.factorial(a + b + 2)


def single_triangle_mesh():
    points = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    triangles = np.array([[0, 1, 2]])
    provisional = Mesh(points=points, triangles=triangles, domain=SQUARE_PI,
                       boundary_edges=[], node_tags=np.zeros(3, dtype=np.int8),
                       h=0.0, grid_step=1.0)
    # classification is irrelevant for pure element tests; bypass the
    # domain geometry check by building the pieces directly
    return provisional


def test_quadrature_weights_sum_to_reference_area():
    rule = make_quadrature()
    assert len(rule.weights) == 7
    assert_allclose(rule.weights.sum(), 0.5, rtol=1e-15)
    assert_allclose(rule.barycentric.sum(axis=1), 1.0, rtol=1e-15)


@pytest.mark.parametrize("a,b", [(a, b) for a in range(6) for b in range(6)
                                 if a + b <= 5])
def test_quadrature_degree_five_exact(a, b):
    rule = make_quadrature()
    val = np.sum(rule.weights * rule.points[:, 0] ** a * rule.points[:, 1] ** b)
    assert_allclose(val, monomial_integral(a, b), rtol=1e-14)


def test_quadrature_examples():
    rule = make_quadrature()
    assert_allclose(np.sum(rule.weights), 0.5, rtol=1e-15)
    x, y = rule.points[:, 0], rule.points[:, 1]
    assert_allclose(np.sum(rule.weights * x ** 2 * y ** 2), 1 / 180, rtol=1e-14)
    assert_allclose(np.sum(rule.weights * x ** 5), 1 / 42, rtol=1e-14)


@pytest.mark.parametrize("degree", [1, 2])
def test_partition_of_unity(degree):
    rule = make_quadrature()
    vals = shape_functions(degree, rule.points)
    assert_allclose(vals.sum(axis=1), 1.0, atol=1e-14)
    grads = shape_gradients(degree, rule.points)
    assert_allclose(grads.sum(axis=1), 0.0, atol=1e-14)


@pytest.mark.parametrize("degree", [1, 2])
def test_kronecker_property(degree):
    nodes = reference_nodes(degree)
    vals = shape_functions(degree, nodes)
    assert_allclose(vals, np.eye(len(nodes)), atol=1e-14)


def test_reference_element_tabulation():
    elem = reference_element(2)
    assert elem.n_nodes == 6
    assert elem.shape.shape == (7, 6)
    assert elem.ref_grads.shape == (7, 6, 2)


@pytest.mark.parametrize("formulation,expected", [("sg", 122), ("ag", 183),
                                                  ("osgs", 366)])
def test_dofmap_field_counts(formulation, expected):
    mesh = build_criss_cross(SQUARE_PI, 5)
    dofmap = build_dofmap(mesh, 1, formulation)
    assert dofmap.ndof == expected
    assert dofmap.n_scalar == 61


def test_dofmap_rejects_unknown_formulation():
    mesh = build_uniform(SQUARE_PI, 2)
    with pytest.raises(AssemblyError):
        build_dofmap(mesh, 1, "galerkin")
    with pytest.raises(AssemblyError):
        build_dofmap(mesh, 3, "sg")


def test_dofmap_p2_adds_edge_nodes():
    mesh = build_uniform(SQUARE_PI, 2)
    dofmap = build_dofmap(mesh, 2, "sg")
    # V + E for the 2x2 uniform square: 9 + 16
    assert dofmap.n_scalar == 25
    assert dofmap.element_nodes.shape == (8, 6)
    # midpoints listed after the vertices, coordinates consistent
    t0 = dofmap.element_nodes[0]
    mid = 0.5 * (mesh.points[t0[0]] + mesh.points[t0[1]])
    assert_allclose(dofmap.coords[t0[3]], mid, atol=1e-14)


def test_dofmap_p2_crack_edges_per_face():
    mesh = build_uniform(CRACKED_SQUARE, 2)
    dofmap = build_dofmap(mesh, 2, "sg")
    coords = np.round(dofmap.coords, 12)
    at_mid = (np.abs(coords[:, 0] - 0.5) < 1e-12) & (np.abs(coords[:, 1]) < 1e-12)
    assert at_mid.sum() == 2  # one midpoint node per crack face copy
    assert np.all(dofmap.on_h[at_mid])


def test_mass_scalar_single_triangle():
    mesh = single_triangle_mesh()
    dofmap = build_dofmap(mesh, 1, "ag")
    mass = assemble_form(FormKind.MASS_SCALAR, mesh, dofmap).toarray()
    expected = np.array([[2, 1, 1], [1, 2, 1], [1, 1, 2]]) / 24.0
    assert_allclose(mass, expected, atol=1e-15)


def test_grad_grad_single_triangle():
    mesh = single_triangle_mesh()
    dofmap = build_dofmap(mesh, 1, "ag")
    kgg = assemble_form(FormKind.GRAD_GRAD, mesh, dofmap).toarray()
    expected = np.array([[1.0, -0.5, -0.5], [-0.5, 0.5, 0.0], [-0.5, 0.0, 0.5]])
    assert_allclose(kgg, expected, atol=1e-14)


def test_curl_curl_single_triangle_diagonal():
    mesh = single_triangle_mesh()
    dofmap = build_dofmap(mesh, 1, "sg")
    kcc = assemble_form(FormKind.CURL_CURL, mesh, dofmap).toarray()
    # u2 dof of the node at (1, 0): integral of (d lambda_1 / dx)^2 = 1/2
    d = dofmap.dof("u2", 1)
    assert_allclose(kcc[d, d], 0.5, atol=1e-14)


@pytest.mark.parametrize("kind", [FormKind.CURL_CURL, FormKind.MASS_VEC,
                                  FormKind.MASS_SCALAR, FormKind.DIV_DIV,
                                  FormKind.GRAD_GRAD])
def test_symmetry(kind):
    mesh = build_criss_cross(SQUARE_PI, 3)
    dofmap = build_dofmap(mesh, 1, "ag")
    a = assemble_form(kind, mesh, dofmap)
    diff = (a - a.T)
    denom = np.abs(a.toarray()).max()
    assert np.abs(diff.toarray()).max() <= 1e-12 * denom


@pytest.mark.parametrize("degree", [1, 2])
def test_semidefinite_rayleigh(degree):
    mesh = build_uniform(SQUARE_PI, 3)
    dofmap = build_dofmap(mesh, degree, "ag")
    rng = np.random.default_rng(7)
    for kind in (FormKind.CURL_CURL, FormKind.GRAD_GRAD, FormKind.DIV_DIV):
        a = assemble_form(kind, mesh, dofmap)
        for _ in range(5):
            x = rng.standard_normal(a.shape[0])
            assert x @ (a @ x) >= -1e-10 * (x @ x)


def test_mass_positive_definite_after_reduction():
    mesh = build_uniform(SQUARE_PI, 3)
    dofmap = build_dofmap(mesh, 1, "ag")
    mv = assemble_form(FormKind.MASS_VEC, mesh, dofmap).toarray()
    ms = assemble_form(FormKind.MASS_SCALAR, mesh, dofmap).toarray()
    interior = ~dofmap.on_boundary
    keep = np.where(np.concatenate([interior, interior]))[0]
    assert np.all(la.eigvalsh(mv[np.ix_(keep, keep)]) > 0)
    assert np.all(la.eigvalsh(ms[np.ix_(interior, interior)][:, :]) > 0)


def test_adjoint_pairing():
    mesh = build_criss_cross(SQUARE_PI, 3)
    dofmap = build_dofmap(mesh, 1, "osgs")
    g = assemble_form(FormKind.GRAD_COUPLING, mesh, dofmap)
    gv = assemble_form(FormKind.GRAD_VEC, mesh, dofmap)
    assert (g - gv).nnz == 0
    d = assemble_form(FormKind.DIV_SCALAR, mesh, dofmap)
    kernels = scalar_kernels(mesh, dofmap)
    expected = sp.bmat([[kernels["gx"], kernels["gy"]]], format="csr")
    assert np.abs((d - expected)).max() == 0


def interpolate_vector(dofmap, fx, fy):
    x, y = dofmap.coords[:, 0], dofmap.coords[:, 1]
    return np.concatenate([fx(x, y), fy(x, y)])


def test_gradient_field_has_zero_curl_energy():
    mesh = build_criss_cross(SQUARE_PI, 4)
    dofmap = build_dofmap(mesh, 1, "sg")
    kcc = assemble_form(FormKind.CURL_CURL, mesh, dofmap)
    u = interpolate_vector(dofmap, lambda x, y: y, lambda x, y: x)  # grad(xy)
    assert abs(u @ (kcc @ u)) <= 1e-12


def test_divergence_free_field_has_zero_div_energy():
    mesh = build_criss_cross(SQUARE_PI, 4)
    dofmap = build_dofmap(mesh, 1, "sg")
    kdd = assemble_form(FormKind.DIV_DIV, mesh, dofmap)
    u = interpolate_vector(dofmap, lambda x, y: -y, lambda x, y: x)
    assert abs(u @ (kdd @ u)) <= 1e-12


def test_form_requires_matching_fields():
    mesh = build_uniform(SQUARE_PI, 2)
    dofmap = build_dofmap(mesh, 1, "sg")
    with pytest.raises(AssemblyError):
        assemble_form(FormKind.GRAD_COUPLING, mesh, dofmap)
    dofmap_ag = build_dofmap(mesh, 1, "ag")
    with pytest.raises(AssemblyError):
        assemble_form(FormKind.GRAD_VEC, mesh, dofmap_ag)


def test_l2_project_linear_fields_exact():
    mesh = build_criss_cross(SQUARE_PI, 3)
    dofmap = build_dofmap(mesh, 1, "osgs")
    x, y = dofmap.coords[:, 0], dofmap.coords[:, 1]
    p = 2.0 * x - 3.0 * y + 1.0
    xi = l2_project(mesh, dofmap, "grad", p)
    n = dofmap.n_scalar
    assert_allclose(xi[:n], 2.0, atol=1e-11)
    assert_allclose(xi[n:], -3.0, atol=1e-11)
    u = np.concatenate([x + 2 * y, 3 * x + 4 * y])  # div = 1 + 4
    eta = l2_project(mesh, dofmap, "div", u)
    assert_allclose(eta, 5.0, atol=1e-11)


def test_l2_project_matches_dense_oracle():
    mesh = build_uniform(SQUARE_PI, 1)  # 2 triangles
    dofmap = build_dofmap(mesh, 1, "osgs")
    rng = np.random.default_rng(3)
    p = rng.standard_normal(dofmap.n_scalar)
    xi = l2_project(mesh, dofmap, "grad", p)
    kernels = scalar_kernels(mesh, dofmap)
    mass = kernels["mass"].toarray()
    rhs_x = kernels["gx"].toarray() @ p
    rhs_y = kernels["gy"].toarray() @ p
    expected = np.concatenate([la.solve(mass, rhs_x), la.solve(mass, rhs_y)])
    assert_allclose(xi, expected, atol=1e-12)


def quadrature_inner_product(mesh, dofmap, grad_coeff_a, xi_a, grad_coeff_b, xi_b):
    """Elementwise quadrature of (grad pa - xi_a) . (grad pb - xi_b)."""
    rule = make_quadrature()
    elem = reference_element(dofmap.degree, rule)
    n = dofmap.n_scalar
    total = 0.0
    for t, nodes in enumerate(dofmap.element_nodes):
        p = mesh.points[mesh.triangles[t]]
        jac = np.array([[p[1, 0] - p[0, 0], p[2, 0] - p[0, 0]],
                        [p[1, 1] - p[0, 1], p[2, 1] - p[0, 1]]])
        det = la.det(jac)
        grads = elem.ref_grads @ la.inv(jac)  # (q, nloc, 2)
        for q, w in enumerate(rule.weights):
            ga = grads[q].T @ grad_coeff_a[nodes]
            gb = grads[q].T @ grad_coeff_b[nodes]
            va = np.array([elem.shape[q] @ xi_a[nodes],
                           elem.shape[q] @ xi_a[n:][nodes]])
            vb = np.array([elem.shape[q] @ xi_b[nodes],
                           elem.shape[q] @ xi_b[n:][nodes]])
            total += w * det * np.dot(ga - va, gb - vb)
    return total


def test_orthogonal_projection_identity():
    # (P_perp a, P_perp b) = (a, b) - (P a, P b) for elementwise gradients
    mesh = build_uniform(SQUARE_PI, 2)
    dofmap = build_dofmap(mesh, 1, "osgs")
    kernels = scalar_kernels(mesh, dofmap)
    kgg = assemble_form(FormKind.GRAD_GRAD, mesh, dofmap, kernels).toarray()
    mv = assemble_form(FormKind.MASS_VEC, mesh, dofmap, kernels).toarray()
    rng = np.random.default_rng(11)
    n = dofmap.n_scalar
    for _ in range(4):
        pa = rng.standard_normal(n)
        pb = rng.standard_normal(n)
        xa = l2_project(mesh, dofmap, "grad", pa)
        xb = l2_project(mesh, dofmap, "grad", pb)
        full = pa @ kgg @ pb                    # (grad pa, grad pb)
        projected = xa @ mv @ xb                # (P grad pa, P grad pb)
        direct = quadrature_inner_product(mesh, dofmap, pa, xa, pb, xb)
        assert abs(direct - (full - projected)) <= 1e-10 * (1 + abs(full))


def test_triplet_matrix_sums_duplicates():
    acc = TripletMatrix((3, 3))
    acc.add([0, 0, 1], [0, 0, 2], [1.0, 2.5, -1.0])
    out = acc.finalize()
    assert out.shape == (3, 3)
    assert out[0, 0] == 3.5
    assert out[1, 2] == -1.0
    assert out.nnz == 2


def test_triplet_matrix_symmetric_storage():
    mesh = build_criss_cross(SQUARE_PI, 2)
    dofmap = build_dofmap(mesh, 1, "sg")
    a = assemble_form(FormKind.MASS_VEC, mesh, dofmap)
    rel = np.abs((a - a.T).toarray()).max() / np.abs(a.toarray()).max()
    assert rel <= 1e-12
