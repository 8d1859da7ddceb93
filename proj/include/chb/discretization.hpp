#pragma once

#include "chb/fem.hpp"
#include "chb/mesh.hpp"

#include <memory>

namespace chb {

/// Mesh plus the assembly data that stays fixed while the mesh does. The
/// mesh is owned so the cached element data cannot dangle.
class Discretization {
public:
    explicit Discretization(Mesh mesh)
        : mesh_(std::make_unique<Mesh>(std::move(mesh))), p1_(*mesh_), th_(*mesh_), stiffness_(p1_.stiffness(1.0)) {}

    Discretization(const Discretization&) = delete;
    Discretization& operator=(const Discretization&) = delete;

    const Mesh& mesh() const { return *mesh_; }
    const P1Assembler& p1() const { return p1_; }
    const TaylorHoodAssembler& taylor_hood() const { return th_; }
    /// Unit-coefficient P1 stiffness.
    const CsrMatrix& stiffness() const { return stiffness_; }
    const Vector& lumped_mass() const { return p1_.lumped_mass(); }

private:
    std::unique_ptr<Mesh> mesh_;
    P1Assembler p1_;
    TaylorHoodAssembler th_;
    CsrMatrix stiffness_;
};

} // namespace chb
