#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>
#include <memory>
#include <vector>

#include "wakerom/grid.hpp"
#include "wakerom/sparse.hpp"

namespace wakerom {

using VelocityState = Eigen::VectorXd;

/// Fixed sparsity pattern of the convection matrix N(w) together with the
/// linear form that produces each nonzero from the advecting field w.
/// Entry s of N(w) is sum_k pair_coef[k] * w[pair_index[k]] over the slot's
/// pair range, so N(.) is linear in w by construction.
struct ConvectionStencil {
    int n = 0;
    std::vector<int> offsets;       // n + 1 row offsets
    std::vector<int> cols;          // column per nonzero slot
    std::vector<int> pair_offsets;  // nnz + 1
    std::vector<int> pair_index;
    std::vector<double> pair_coef;
};

/// Discrete incompressible-flow operators on a collocated grid.
///
/// State layout: x-velocities of all nodes, then y-velocities (2 * nx * ny).
/// Masked (obstacle) nodes keep their unknowns and are volume-penalized, so
/// the tensor-product layout survives for image interpolation. Dirichlet ring
/// rows of A are pure penalty rows (diagonal kappa, data folded into f); the
/// divergence J carries no columns for ring nodes, which keeps S = J M^-1 J^T
/// consistent with mean-deflated conjugate gradients.
struct DiscreteOperators {
    GridSpec grid;
    double reynolds = 1.0;
    int n_v = 0;
    int n_p = 0;
    Eigen::VectorXd mass;       // diagonal of M, strictly positive
    CsrMatrix diffusion;        // A, includes 1/Re scaling, penalty and drag rows
    CsrMatrix divergence;       // J
    Eigen::VectorXd forcing;    // f: boundary lift, body force
    ConvectionStencil convection;
    std::vector<int> dirichlet_nodes;  // flat node indices of the penalty ring
    double dirichlet_penalty = 1e4;
    double brinkman_drag = 1e4;
    double cg_tol = 1e-10;
    int cg_maxiter = 0;  // set to 5 * n_p on assembly

    int x_dof(int node) const { return node; }
    int y_dof(int node) const { return grid.node_count() + node; }
};

DiscreteOperators assemble_operators(const GridSpec& grid, double reynolds);

/// Materializes N(w). The sparsity pattern does not depend on w.
CsrMatrix assemble_convection(const DiscreteOperators& ops, const VelocityState& w);

/// y = N(w) v without materializing the matrix.
VelocityState apply_convection(const DiscreteOperators& ops, const VelocityState& w,
                               const VelocityState& v);

double mnorm(const DiscreteOperators& ops, const Eigen::VectorXd& x);
double minv_norm(const DiscreteOperators& ops, const Eigen::VectorXd& x);

/// Workspace for projector applications and pressure solves. One context per
/// thread; the operators themselves are immutable and shareable.
///
/// The context factorizes a nullspace-pinned copy of S once and uses it as a
/// preconditioner, so the deflated conjugate gradient typically converges in
/// a handful of iterations.
class ProjectorContext {
public:
    explicit ProjectorContext(const DiscreteOperators& ops);

    const DiscreteOperators& ops() const { return *ops_; }
    int last_iterations() const { return last_iterations_; }

    /// Solves S y = b on the mean-deflated pressure space by preconditioned
    /// conjugate gradients, S = J M^-1 J^T. Throws SolverError when
    /// cg_maxiter is hit.
    Eigen::VectorXd solve_schur(const Eigen::VectorXd& b, double tol_scale = 1.0);

private:
    void apply_schur(const Eigen::VectorXd& x, Eigen::VectorXd& y);
    void deflate(Eigen::VectorXd& x) const;

    const DiscreteOperators* ops_;
    Eigen::VectorXd r_, z_, p_, q_, vtmp_;
    std::vector<Eigen::VectorXd> null_dirs_;  // unit vectors spanning ker(S)
    std::unique_ptr<Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>> precond_;
    int last_iterations_ = 0;
};

/// Pi x = x - M^-1 J^T S^-1 J x, or Pi^T x with the transpose flag.
Eigen::VectorXd apply_pi(ProjectorContext& ctx, const Eigen::VectorXd& x,
                         bool transpose = false);

/// Mean-zero pressure from the elimination formula
/// p = S^-1 J M^-1 (N(v) v + A v - f).
Eigen::VectorXd recover_pressure(ProjectorContext& ctx, const VelocityState& v);

} // namespace wakerom
