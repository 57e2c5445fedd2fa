#pragma once

#include "vinit/preintegration.hpp"
#include "vinit/so3.hpp"

#include <Eigen/Cholesky>
#include <Eigen/LU>

#include <stdexcept>
#include <vector>

namespace vinit {

// One consecutive keyframe pair: preintegrated rotation plus the visual
// relative rotation expressed in the body frame (R_i = Rbar_i * R_CB).
struct GyroPair {
    PreintegratedDelta delta;
    Mat3 R_k = Mat3::Identity();
    Mat3 R_k1 = Mat3::Identity();
};

struct GyroProblem {
    std::vector<GyroPair> pairs;
};

struct GyroSolveConfig {
    int max_iters = 50;
    double tol = 1e-12;
    double initial_damping = 1e-4;
    Vec3 initial_bias = Vec3::Zero();
};

struct GyroSolution {
    Vec3 bias_g = Vec3::Zero();
    double final_cost = 0.0;
    int iterations = 0;
    bool converged = false;
};

// Log((dR * Exp(J_dR_bg * b))^T R_k^T R_{k+1}); zero when the bias-corrected
// preintegrated rotation matches the visual relative rotation.
inline Vec3 gyro_residual(const GyroPair& pair, const Vec3& bias_g) {
    const Vec3 db = bias_g - pair.delta.bias_ref_g;
    const Mat3 corrected = pair.delta.dR * exp_so3(pair.delta.J_dR_bg * db);
    return log_so3(corrected.transpose() * pair.R_k.transpose() * pair.R_k1);
}

inline Mat3 gyro_residual_jacobian(const GyroPair& pair, const Vec3& bias_g, const Vec3& residual) {
    const Vec3 db = bias_g - pair.delta.bias_ref_g;
    return -right_jacobian_inv_so3(-residual) *
           right_jacobian_so3(pair.delta.J_dR_bg * db) * pair.delta.J_dR_bg;
}

namespace detail {

inline double gyro_cost(const GyroProblem& problem, const std::vector<Mat3>& weights,
                        const Vec3& bias) {
    double cost = 0.0;
    for (size_t k = 0; k < problem.pairs.size(); ++k) {
        const Vec3 r = gyro_residual(problem.pairs[k], bias);
        cost += r.dot(weights[k] * r);
    }
    return cost;
}

}  // namespace detail

namespace detail {

inline GyroSolution solve_gyro_bias_pass(const GyroProblem& problem,
                                         const std::vector<Mat3>& weights,
                                         const Vec3& bias0, const GyroSolveConfig& config) {
    GyroSolution sol;
    Vec3 bias = bias0;
    double lambda = config.initial_damping;
    double cost = detail::gyro_cost(problem, weights, bias);

    for (int it = 0; it < config.max_iters; ++it) {
        Mat3 H = Mat3::Zero();
        Vec3 g = Vec3::Zero();
        for (size_t k = 0; k < problem.pairs.size(); ++k) {
            const Vec3 r = gyro_residual(problem.pairs[k], bias);
            const Mat3 J = gyro_residual_jacobian(problem.pairs[k], bias, r);
            H += J.transpose() * weights[k] * J;
            g += J.transpose() * weights[k] * r;
        }

        bool accepted = false;
        for (int attempt = 0; attempt < 20; ++attempt) {
            const Mat3 Hd = H + lambda * Mat3(H.diagonal().asDiagonal());
            Eigen::LDLT<Mat3> ldlt(Hd);
            if (ldlt.info() != Eigen::Success) {
                lambda *= 10.0;
                continue;
            }
            const Vec3 step = -ldlt.solve(g);
            const double new_cost = detail::gyro_cost(problem, weights, bias + step);
            if (new_cost <= cost) {
                const double rel_decrease = (cost - new_cost) / std::max(cost, 1e-300);
                bias += step;
                cost = new_cost;
                lambda = std::max(lambda * 0.1, 1e-12);
                accepted = true;
                sol.iterations = it + 1;
                if (step.norm() < config.tol || rel_decrease < config.tol) {
                    sol.converged = true;
                }
                break;
            }
            lambda *= 10.0;
        }
        if (!accepted) {
            // No improving step at any damping level: local minimum.
            sol.converged = true;
            break;
        }
        if (sol.converged) break;
    }

    sol.bias_g = bias;
    sol.final_cost = cost;
    if (!sol.converged && cost < 1e-20) sol.converged = true;
    return sol;
}

}  // namespace detail

// Levenberg-Marquardt over the rotation residuals, starting from zero bias.
// Weights are the inverse rotation covariances at the zero-bias linearization
// point, refreshed once after a first converged pass by transporting the
// covariance through the solved bias correction.
inline GyroSolution solve_gyro_bias(const GyroProblem& problem,
                                    const GyroSolveConfig& config = {}) {
    if (problem.pairs.empty()) {
        throw std::invalid_argument("solve_gyro_bias: empty problem");
    }
    std::vector<Mat3> weights;
    weights.reserve(problem.pairs.size());
    for (const auto& pair : problem.pairs) {
        Eigen::FullPivLU<Mat3> lu(pair.delta.cov_rot);
        if (!lu.isInvertible()) {
            throw std::runtime_error("solve_gyro_bias: singular rotation covariance");
        }
        weights.push_back(lu.inverse());
    }

    GyroSolution first =
        detail::solve_gyro_bias_pass(problem, weights, config.initial_bias, config);

    // Single re-linearization: noise enters the corrected rotation through
    // dR * Exp(J db), so cov_rot transports by the correction rotation.
    for (size_t k = 0; k < problem.pairs.size(); ++k) {
        const auto& d = problem.pairs[k].delta;
        const Mat3 E = exp_so3(d.J_dR_bg * (first.bias_g - d.bias_ref_g));
        const Mat3 cov = E.transpose() * d.cov_rot * E;
        Eigen::FullPivLU<Mat3> lu(cov);
        if (!lu.isInvertible()) {
            throw std::runtime_error("solve_gyro_bias: singular rotation covariance");
        }
        weights[k] = lu.inverse();
    }
    GyroSolution second = detail::solve_gyro_bias_pass(problem, weights, first.bias_g, config);
    second.iterations += first.iterations;
    return second;
}

}  // namespace vinit
