#pragma once

#include "vinit/accel_solver.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <stdexcept>
#include <vector>

namespace vinit {

// Baseline minimizer of the same weighted cost over (s, b^a, g), with the
// gravity norm kept exactly on the sphere. This is a cost/timing reference,
// not a reimplementation of any prior-weighted MAP method.
struct IterativeConfig {
    double initial_scale = 1.0;
    Vec3 initial_bias_a = Vec3::Zero();
    int max_iters = 100;
    double tol = 1e-14;
    Vec3 gravity_init = Vec3(0.0, 0.0, -kGravityMagnitude);
    double gravity_magnitude = kGravityMagnitude;
};

namespace detail {

inline double blocks_cost(const std::vector<ResidualBlock>& blocks,
                          const std::vector<Mat3>& infos, const Vec7& x) {
    double cost = 0.0;
    for (size_t k = 0; k < blocks.size(); ++k) {
        const Vec3 r = blocks[k].residual(x);
        cost += r.dot(infos[k] * r);
    }
    return cost;
}

// Orthonormal basis of the plane orthogonal to g: tangent directions of the
// sphere retraction g <- Exp(b1 t1 + b2 t2) g.
inline Eigen::Matrix<double, 3, 2> tangent_basis(const Vec3& g) {
    const Vec3 gn = g.normalized();
    Vec3 b1 = gn.cross(Vec3::UnitX());
    if (b1.norm() < 1e-6) b1 = gn.cross(Vec3::UnitY());
    b1.normalize();
    const Vec3 b2 = gn.cross(b1).normalized();
    Eigen::Matrix<double, 3, 2> B;
    B.col(0) = b1;
    B.col(1) = b2;
    return B;
}

}  // namespace detail

inline InitSolution solve_iterative(const std::vector<ResidualBlock>& blocks,
                                    const IterativeConfig& config) {
    if (blocks.size() < 3) {
        throw std::invalid_argument("solve_iterative: underdetermined (need >= 3 blocks)");
    }
    if (!(config.initial_scale > 0.0)) {
        throw std::invalid_argument("solve_iterative: initial_scale must be positive");
    }
    std::vector<Mat3> infos;
    infos.reserve(blocks.size());
    for (const auto& blk : blocks) infos.push_back(blk.sigma.inverse());

    const double G = config.gravity_magnitude;
    Vec7 x;
    x[0] = config.initial_scale;
    x.segment<3>(1) = config.initial_bias_a;
    x.tail<3>() = config.gravity_init.normalized() * G;

    double cost = detail::blocks_cost(blocks, infos, x);
    double lambda = 1e-4;
    bool converged = false;
    int iters = 0;

    for (int it = 0; it < config.max_iters; ++it) {
        iters = it + 1;
        // 6-dof local parameterization: (ds, db^a, dtheta) with gravity
        // perturbed in the 2D tangent of the sphere.
        const Eigen::Matrix<double, 3, 2> Bt = detail::tangent_basis(x.tail<3>());
        Eigen::Matrix<double, 6, 6> H = Eigen::Matrix<double, 6, 6>::Zero();
        Eigen::Matrix<double, 6, 1> g = Eigen::Matrix<double, 6, 1>::Zero();
        for (size_t k = 0; k < blocks.size(); ++k) {
            const Vec3 r = blocks[k].residual(x);
            Eigen::Matrix<double, 3, 6> J;
            J.col(0) = blocks[k].alpha;
            J.block<3, 3>(0, 1) = blocks[k].A;
            // d(Exp(delta) g)/d(delta) = -skew(g), restricted to the tangent.
            J.block<3, 2>(0, 4) = blocks[k].B * (-skew(x.tail<3>())) * Bt;
            H += J.transpose() * infos[k] * J;
            g += J.transpose() * infos[k] * r;
        }

        bool accepted = false;
        for (int attempt = 0; attempt < 25; ++attempt) {
            Eigen::Matrix<double, 6, 6> Hd = H;
            Hd.diagonal() += lambda * H.diagonal();
            Eigen::LDLT<Eigen::Matrix<double, 6, 6>> ldlt(Hd);
            if (ldlt.info() != Eigen::Success) {
                lambda *= 10.0;
                continue;
            }
            const Eigen::Matrix<double, 6, 1> step = -ldlt.solve(g);
            Vec7 xn = x;
            xn[0] += step[0];
            xn.segment<3>(1) += step.segment<3>(1);
            xn.tail<3>() = exp_so3(Bt * step.tail<2>()) * x.tail<3>();
            const double new_cost = detail::blocks_cost(blocks, infos, xn);
            if (new_cost <= cost) {
                const double rel_decrease = (cost - new_cost) / std::max(cost, 1e-300);
                x = xn;
                cost = new_cost;
                lambda = std::max(lambda * 0.1, 1e-14);
                accepted = true;
                if (step.norm() < config.tol || rel_decrease < config.tol) converged = true;
                break;
            }
            lambda *= 10.0;
        }
        if (!accepted) {
            // Stuck at max damping: report the current point as a local
            // minimum; convergence depends on the gradient magnitude.
            converged = g.norm() < 1e-6 * (1.0 + cost);
            break;
        }
        if (converged) break;
    }

    InitSolution sol;
    sol.s = x[0];
    sol.bias_a = x.segment<3>(1);
    sol.gravity = x.tail<3>();
    // Report through the cancellation-free direct form so costs are
    // comparable across solvers at fine tolerances.
    sol.cost = residual_cost(blocks, x);
    sol.converged = converged;
    sol.diagnostics.scale_positive = sol.s > 0.0;
    return sol;
}

// Multi-start wrapper: one run per initial scale, minimal cost wins; ties
// break toward the smallest initial scale.
inline InitSolution solve_multi_start(const std::vector<ResidualBlock>& blocks,
                                      const std::vector<double>& scales,
                                      IterativeConfig config = {}) {
    if (scales.empty()) {
        throw std::invalid_argument("solve_multi_start: empty scale list");
    }
    bool any = false;
    InitSolution best;
    best.cost = std::numeric_limits<double>::infinity();
    for (double s0 : scales) {
        config.initial_scale = s0;
        const InitSolution sol = solve_iterative(blocks, config);
        if (!sol.converged) continue;
        if (!any || sol.cost < best.cost) {
            best = sol;
            any = true;
        }
    }
    if (!any) {
        throw std::runtime_error("solve_multi_start: no start converged");
    }
    return best;
}

}  // namespace vinit
