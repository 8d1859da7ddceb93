#include "chb/discretization.hpp"
#include "chb/fem.hpp"
#include "chb/mesh.hpp"
#include "chb/stepper.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace chb {
namespace {

Mesh square(std::size_t n) { return build_uniform_mesh(n, {-3.0, -3.0}, {3.0, 3.0}); }

// Unit square split into two right triangles with unit legs.
Mesh unit_cell() { return build_uniform_mesh(1, {0.0, 0.0}, {1.0, 1.0}); }

double trace_of_lumped(const Mesh& m) {
    const auto d = lumped_mass_vector(m);
    return std::accumulate(d.begin(), d.end(), 0.0);
}

TEST(UniformMesh, CountingIdentities) {
    const Mesh m1 = square(1);
    EXPECT_EQ(m1.num_triangles(), 2u);
    EXPECT_EQ(m1.num_vertices(), 4u);

    const Mesh m2 = square(2);
    EXPECT_EQ(m2.num_triangles(), 8u);
    EXPECT_EQ(m2.num_vertices(), 9u);
    EXPECT_EQ(m2.num_edges(), 16u);

    const Mesh m16 = square(16);
    EXPECT_EQ(m16.num_triangles(), 512u);
    EXPECT_EQ(m16.num_vertices(), 289u);
    const auto audit = audit_mesh(m16);
    EXPECT_TRUE(audit.ok()) << audit.message;
    EXPECT_NEAR(audit.area_sum, 36.0, 36.0 * 1e-12);
}

TEST(UniformMesh, RejectsBadArguments) {
    EXPECT_THROW(build_uniform_mesh(0, {-3, -3}, {3, 3}), std::invalid_argument);
    EXPECT_THROW(build_uniform_mesh(4, {1, -3}, {1, 3}), std::invalid_argument);
    EXPECT_THROW(build_uniform_mesh(4, {-3, 2}, {3, -2}), std::invalid_argument);
}

TEST(UniformMesh, BoundaryTagsPartitionTheBoundary) {
    BoundarySpec bc;
    bc[Side::Left] = BoundaryTag::NoSlip;
    bc[Side::Top] = BoundaryTag::NoSlip;
    const Mesh m = build_uniform_mesh(8, {-3, -3}, {3, 3}, bc);
    std::size_t per_side[4] = {0, 0, 0, 0};
    for (const auto& be : m.boundary_edges) {
        ++per_side[static_cast<std::size_t>(be.side)];
        EXPECT_EQ(be.tag, bc[be.side]);
    }
    for (auto c : per_side) EXPECT_EQ(c, 8u);
    EXPECT_EQ(m.boundary_edges.size(), 32u);
    EXPECT_TRUE(audit_mesh(m).ok());
}

TEST(UniformMesh, TrianglesAreNonObtuse) {
    const Mesh m = square(8);
    for (std::size_t t = 0; t < m.num_triangles(); ++t) {
        const auto g = element_geometry(m, t);
        for (int i = 0; i < 3; ++i)
            for (int j = i + 1; j < 3; ++j)
                EXPECT_LE(g.grad_lambda[i][0] * g.grad_lambda[j][0] + g.grad_lambda[i][1] * g.grad_lambda[j][1], 1e-14);
    }
}

TEST(RefineInterfaceBand, ZeroLevelsIsIdentity) {
    const Mesh m = square(8);
    const auto phi = initial_phase_field(m, Profile::R, 0.3);
    const Mesh r = refine_interface_band(m, phi.coeffs, 0);
    EXPECT_EQ(r.num_triangles(), m.num_triangles());
    EXPECT_EQ(r.num_vertices(), m.num_vertices());
}

TEST(RefineInterfaceBand, EmptyBandIsIdentity) {
    const Mesh m = square(8);
    const std::vector<double> phi(m.num_vertices(), -1.0);
    const Mesh r = refine_interface_band(m, phi, 3);
    EXPECT_EQ(r.num_triangles(), m.num_triangles());
    EXPECT_EQ(r.num_vertices(), m.num_vertices());
}

TEST(RefineInterfaceBand, RefinesAroundTheInterfaceConformingly) {
    const Mesh m = square(16);
    const auto phi = initial_phase_field(m, Profile::R, 0.3);
    const auto refined = refine_interface_band_with_field(m, phi.coeffs, 2);
    EXPECT_GT(refined.mesh.num_triangles(), m.num_triangles());
    const auto audit = audit_mesh(refined.mesh);
    EXPECT_TRUE(audit.ok()) << audit.message;
    EXPECT_NEAR(audit.area_sum, 36.0, 36.0 * 1e-12);
    EXPECT_NEAR(trace_of_lumped(refined.mesh), 36.0, 36.0 * 1e-12);
    EXPECT_LT(refined.mesh.min_edge_length(), m.min_edge_length());
    ASSERT_EQ(refined.phi.size(), refined.mesh.num_vertices());
    // original vertices keep their values
    for (std::size_t i = 0; i < m.num_vertices(); ++i) EXPECT_EQ(refined.phi[i], phi.coeffs[i]);
    // stiffness kernel on the refined mesh
    const CsrMatrix k = P1Assembler(refined.mesh).stiffness(1.0);
    const Vector ones(refined.mesh.num_vertices(), 1.0);
    EXPECT_LE(max_norm(k * std::span<const double>(ones)), 1e-12 * k.max_abs());
}

TEST(LumpedMass, PartitionOfUnity) {
    for (std::size_t n : {1u, 3u, 16u, 64u}) EXPECT_NEAR(trace_of_lumped(square(n)), 36.0, 36.0 * 1e-12) << n;
}

TEST(LumpedMass, ReferenceTriangleEntries) {
    // each of the two unit-leg triangles has area 1/2
    const Mesh m = unit_cell();
    const auto d = lumped_mass_vector(m);
    // vertices 0 and 3 (on the diagonal) belong to both triangles
    EXPECT_NEAR(d[1], 1.0 / 6.0, 1e-15);
    EXPECT_NEAR(d[2], 1.0 / 6.0, 1e-15);
    EXPECT_NEAR(d[0], 2.0 / 6.0, 1e-15);
    EXPECT_NEAR(d[3], 2.0 / 6.0, 1e-15);
}

TEST(LumpedMass, CornerSymmetryOnTwoByTwo) {
    const Mesh m = square(2);
    const auto d = lumped_mass_vector(m);
    // corners 0 and 8 touch two triangles, corners 2 and 6 one
    EXPECT_DOUBLE_EQ(d[0], d[8]);
    EXPECT_DOUBLE_EQ(d[2], d[6]);
    const auto diag = assemble_lumped_mass(m);
    EXPECT_EQ(diag.nnz(), m.num_vertices());
}

TEST(Stiffness, ConstantsAreInTheKernel) {
    const Mesh m = square(12);
    ElementField coeff(m.num_triangles());
    for (std::size_t t = 0; t < coeff.size(); ++t) coeff[t] = 0.5 + static_cast<double>(t % 7);
    const CsrMatrix k = assemble_stiffness(m, coeff);
    const Vector ones(m.num_vertices(), 1.0);
    EXPECT_LE(max_norm(k * std::span<const double>(ones)), 1e-12 * k.max_abs());
}

TEST(Stiffness, ZeroCoefficientGivesZeroMatrix) {
    const Mesh m = square(4);
    const CsrMatrix k = assemble_stiffness(m, ElementField(m.num_triangles(), 0.0));
    EXPECT_EQ(k.max_abs(), 0.0);
}

TEST(Stiffness, NegativeCoefficientIsRejected) {
    const Mesh m = square(2);
    ElementField c(m.num_triangles(), 1.0);
    c[3] = -1.0;
    EXPECT_THROW(assemble_stiffness(m, c), std::invalid_argument);
}

TEST(Stiffness, ReferenceRightTriangleByHand) {
    // triangle 0 of the unit cell is (1,0), (1,1), (0,0), right angle first;
    // integrating the hat gradients by hand gives
    //   1/2 [[2,-1,-1],[-1,1,0],[-1,0,1]]
    const Mesh m = unit_cell();
    ASSERT_EQ(m.triangles[0], (Triangle{1, 3, 0}));
    const CsrMatrix k = assemble_stiffness(m, ElementField{1.0, 0.0});
    const std::size_t v[3] = {1, 3, 0};
    const double expected[3][3] = {{1.0, -0.5, -0.5}, {-0.5, 0.5, 0.0}, {-0.5, 0.0, 0.5}};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) EXPECT_NEAR(k.at(v[i], v[j]), expected[i][j], 1e-13) << i << ',' << j;
}

TEST(TaylorHood, P2MassMatchesTheClosedForm) {
    // scalar P2 mass on a triangle of area A is A/180 times
    //   6 on vertex diagonals, -1 between vertices, -4 vertex to opposite
    //   midpoint, 0 vertex to adjacent midpoint, 32 midpoint diagonals,
    //   16 between midpoints
    const Mesh m = unit_cell();
    const CsrMatrix mass = TaylorHoodAssembler(m).vector_mass();
    const double a = 0.5;
    const auto dofs = m.p2_dofs(0);
    // vertex 1 and the midpoints of its two legs belong to triangle 0 only,
    // so their rows hold the local matrix undisturbed
    EXPECT_NEAR(mass.at(2 * dofs[0], 2 * dofs[0]), 6.0 * a / 180.0, 1e-15);
    EXPECT_NEAR(mass.at(2 * dofs[0], 2 * dofs[3]), -4.0 * a / 180.0, 1e-15);
    EXPECT_NEAR(mass.at(2 * dofs[0], 2 * dofs[4]), 0.0, 1e-15);
    EXPECT_NEAR(mass.at(2 * dofs[4], 2 * dofs[4]), 32.0 * a / 180.0, 1e-15);
    EXPECT_NEAR(mass.at(2 * dofs[4], 2 * dofs[5]), 16.0 * a / 180.0, 1e-15);
    EXPECT_NEAR(mass.at(2 * dofs[4], 2 * dofs[4] + 1), 0.0, 1e-15);
    double total = 0.0;
    for (double x : mass.values()) total += x;
    EXPECT_NEAR(total, 2.0, 1e-13); // two components times the area
}

TEST(TaylorHood, RigidMotionsOnlySeeTheDrag) {
    const Mesh m = square(6);
    const double nu = 3.0;
    ElementField eta(m.num_triangles());
    for (std::size_t t = 0; t < eta.size(); ++t) eta[t] = 0.1 + 0.01 * static_cast<double>(t % 5);
    const auto blocks = assemble_taylor_hood(m, eta, 0.7, nu);
    const CsrMatrix mass = TaylorHoodAssembler(m).vector_mass();
    for (const auto& field : {std::function<Point(const Point&)>([](const Point&) { return Point{1.5, -0.25}; }),
                              std::function<Point(const Point&)>([](const Point& p) { return Point{p.y, -p.x}; })}) {
        const auto v = interpolate_p2_vector(field, m);
        const Vector av = blocks.a_vv * std::span<const double>(v.coeffs);
        const Vector mv = mass * std::span<const double>(v.coeffs);
        for (std::size_t i = 0; i < av.size(); ++i) EXPECT_NEAR(av[i], nu * mv[i], 1e-12);
        const Vector bv = blocks.b_div * std::span<const double>(v.coeffs);
        EXPECT_LE(max_norm(bv), 1e-13);
    }
}

TEST(TaylorHood, DivergenceTheoremForStretching) {
    const Mesh m = square(5);
    const auto blocks = assemble_taylor_hood(m, ElementField(m.num_triangles(), 1.0), 0.0, 0.0);
    const auto v = interpolate_p2_vector([](const Point& p) { return Point{p.x, 0.0}; }, m);
    const Vector bv = blocks.b_div * std::span<const double>(v.coeffs);
    EXPECT_NEAR(std::accumulate(bv.begin(), bv.end(), 0.0), 36.0, 1e-12);
}

TEST(TaylorHood, SingularWithoutViscosityOrDrag) {
    const Mesh m = square(2);
    EXPECT_THROW(assemble_taylor_hood(m, ElementField(m.num_triangles(), 0.0), 0.0, 0.0), std::domain_error);
    EXPECT_NO_THROW(assemble_taylor_hood(m, ElementField(m.num_triangles(), 0.0), 0.0, 1.0));
}

TEST(TaylorHood, VelocityOperatorIsSymmetric) {
    const Mesh m = square(3);
    const auto blocks = assemble_taylor_hood(m, ElementField(m.num_triangles(), 0.3), 0.2, 1.0);
    for (std::size_t i = 0; i < blocks.a_vv.rows(); ++i)
        for (std::size_t j = 0; j < blocks.a_vv.cols(); ++j)
            ASSERT_NEAR(blocks.a_vv.at(i, j), blocks.a_vv.at(j, i), 1e-14);
}

TEST(ConvectionLoad, VanishesForZeroVelocityOrFlatPhase) {
    const Mesh m = square(4);
    const auto phi = interpolate_nodal([](const Point& p) { return 0.1 * p.x - 0.2 * p.y; }, m);
    const auto zero_v = FeFunction::p2_vector(m);
    EXPECT_EQ(max_norm(assemble_convection_load(m, zero_v, phi)), 0.0);
    const auto v = interpolate_p2_vector([](const Point& p) { return Point{p.y, 2.0}; }, m);
    EXPECT_EQ(max_norm(assemble_convection_load(m, v, FeFunction::p1(m, 0.4))), 0.0);
}

TEST(ConvectionLoad, UnitIntegrandSumsToTheArea) {
    const Mesh m = unit_cell();
    const auto v = interpolate_p2_vector([](const Point&) { return Point{1.0, 0.0}; }, m);
    const auto phi = interpolate_nodal([](const Point& p) { return p.x; }, m);
    const Vector load = assemble_convection_load(m, v, phi);
    EXPECT_NEAR(std::accumulate(load.begin(), load.end(), 0.0), 1.0, 1e-14);
    // vertex 1 belongs to triangle 0 alone: (1, lambda) = A/3
    EXPECT_NEAR(load[1], 0.5 / 3.0, 1e-14);
}

TEST(ConvectionLoad, QuadraticVelocityIsIntegratedExactly) {
    // v = (x^2, 0), phi = x on the unit cell: (v . grad phi, 1) = int x^2 = 1/3
    const Mesh m = unit_cell();
    const auto v = interpolate_p2_vector([](const Point& p) { return Point{p.x * p.x, 0.0}; }, m);
    const auto phi = interpolate_nodal([](const Point& p) { return p.x; }, m);
    const Vector load = assemble_convection_load(m, v, phi);
    EXPECT_NEAR(std::accumulate(load.begin(), load.end(), 0.0), 1.0 / 3.0, 1e-14);
}

TEST(Interpolation, NodalValues) {
    const Mesh m = square(4);
    const auto c = interpolate_nodal([](const Point&) { return 0.7; }, m);
    for (double x : c.coeffs) EXPECT_EQ(x, 0.7);
    const auto fx = interpolate_nodal([](const Point& p) { return p.x; }, m);
    // vertex (3, 0): column 4, row 2 of the 5 x 5 grid
    ASSERT_DOUBLE_EQ(m.vertices[2 * 5 + 4].x, 3.0);
    ASSERT_DOUBLE_EQ(m.vertices[2 * 5 + 4].y, 0.0);
    EXPECT_DOUBLE_EQ(fx.coeffs[2 * 5 + 4], 3.0);
    const auto phi = initial_phase_field(square(32), Profile::R, 0.08);
    for (double x : phi.coeffs) {
        EXPECT_GE(x, -1.0);
        EXPECT_LE(x, 1.0);
    }
}

TEST(PointLocator, ReproducesLinearFunctions) {
    const Mesh m = square(7);
    const PointLocator loc(m);
    const auto f = interpolate_nodal([](const Point& p) { return 2.0 * p.x - p.y + 0.5; }, m);
    for (const Point p : {Point{0.123, -2.9}, Point{-3.0, 3.0}, Point{2.99, 0.01}, Point{0.0, 0.0}}) {
        const auto val = loc.evaluate(f.coeffs, p);
        ASSERT_TRUE(val.has_value());
        EXPECT_NEAR(*val, 2.0 * p.x - p.y + 0.5, 1e-13);
    }
    EXPECT_FALSE(loc.evaluate(f.coeffs, {3.5, 0.0}).has_value());
}

TEST(Discretization, CachesMatchDirectAssembly) {
    const Discretization disc(square(6));
    const CsrMatrix k = assemble_stiffness(disc.mesh(), ElementField(disc.mesh().num_triangles(), 1.0));
    for (std::size_t i = 0; i < k.rows(); ++i)
        for (std::size_t j = 0; j < k.cols(); ++j) ASSERT_EQ(disc.stiffness().at(i, j), k.at(i, j));
    EXPECT_EQ(disc.lumped_mass(), lumped_mass_vector(disc.mesh()));
}

} // namespace
} // namespace chb
