#pragma once

#include "vinit/imu_types.hpp"
#include "vinit/preintegration.hpp"
#include "vinit/so3.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace vinit {

using Vec7 = Eigen::Matrix<double, 7, 1>;
using Mat7 = Eigen::Matrix<double, 7, 7>;
using Mat37 = Eigen::Matrix<double, 3, 7>;

// Data for one consecutive keyframe triple (k-1, k, k+1): visual poses,
// body rotations R_i = Rbar_i * R_CB, and the two preintegrated intervals
// already corrected for the solved gyroscope bias.
struct AccelTriplet {
    std::array<Mat3, 3> rbar;        // visual rotations (camera-to-world)
    std::array<Vec3, 3> pbar;        // visual positions, up-to-scale
    std::array<Mat3, 3> r_body;      // body rotations
    PreintegratedDelta delta01;      // interval [k-1, k]
    PreintegratedDelta delta12;      // interval [k, k+1]
    Vec3 t_cb = Vec3::Zero();        // camera-frame lever arm [m]
};

// Linear residual r_k(x) = [alpha_k A_k B_k] x - pi_k over x = (s, b^a, g).
struct ResidualBlock {
    Vec3 alpha = Vec3::Zero();       // coefficient of s
    Mat3 A = Mat3::Zero();           // coefficient of b^a
    Mat3 B = Mat3::Zero();           // coefficient of g
    Vec3 pi = Vec3::Zero();          // constant term
    Mat3 sigma = Mat3::Identity();   // residual covariance

    Mat37 M() const {
        Mat37 m;
        m.col(0) = alpha;
        m.block<3, 3>(0, 1) = A;
        m.block<3, 3>(0, 4) = B;
        return m;
    }

    Vec3 residual(const Vec7& x) const { return M() * x - pi; }
};

// Normal form of the weighted sum of squares: C(x) = x^T M x + m^T x + Q,
// with the gravity-norm constraint x^T W x = G^2.
struct QuadraticSystem {
    Mat7 M = Mat7::Zero();
    Vec7 m = Vec7::Zero();
    double cost_const = 0.0;
    double gravity_magnitude = kGravityMagnitude;

    static Mat7 W() {
        Mat7 w = Mat7::Zero();
        w.block<3, 3>(4, 4) = Mat3::Identity();
        return w;
    }

    double cost(const Vec7& x) const {
        return x.dot(M * x) + m.dot(x) + cost_const;
    }
};

struct InitDiagnostics {
    double a_block_condition = 0.0;
    int num_real_roots = 0;
    bool scale_positive = true;
    bool excitation_ok = true;
};

struct InitSolution {
    double s = 1.0;
    Vec3 bias_g = Vec3::Zero();      // filled by the pipeline, not this solver
    Vec3 bias_a = Vec3::Zero();
    Vec3 gravity = Vec3::Zero();
    double lambda = 0.0;
    double cost = 0.0;
    bool converged = true;
    InitDiagnostics diagnostics;

    Vec7 x() const {
        Vec7 v;
        v[0] = s;
        v.segment<3>(1) = bias_a;
        v.segment<3>(4) = gravity;
        return v;
    }
};

inline ResidualBlock build_residual_block(const AccelTriplet& trip) {
    const double dt01 = trip.delta01.dt_total;
    const double dt12 = trip.delta12.dt_total;
    if (!(dt01 > 0.0) || !(dt12 > 0.0)) {
        throw std::invalid_argument("build_residual_block: non-positive interval");
    }
    const Mat3& R0 = trip.r_body[0];
    const Mat3& R1 = trip.r_body[1];

    ResidualBlock blk;
    blk.A = R0 * trip.delta01.J_dp_ba / dt01 - R1 * trip.delta12.J_dp_ba / dt12 -
            R0 * trip.delta01.J_dv_ba;
    blk.B = -0.5 * (dt01 + dt12) * Mat3::Identity();
    blk.alpha = (trip.pbar[2] - trip.pbar[1]) / dt12 - (trip.pbar[1] - trip.pbar[0]) / dt01;
    blk.pi = R1 * trip.delta12.dp / dt12 - R0 * trip.delta01.dp / dt01 + R0 * trip.delta01.dv +
             (trip.rbar[1] - trip.rbar[0]) * trip.t_cb / dt01 -
             (trip.rbar[2] - trip.rbar[1]) * trip.t_cb / dt12;
    // Deltas are linearized at bias_ref_a; shift the constant so that x
    // carries the absolute accelerometer bias.
    blk.pi += blk.A * trip.delta01.bias_ref_a;

    // Residual noise: interval [k-1,k] enters through dv - dp/dt01, interval
    // [k,k+1] through dp/dt12; the two intervals share no IMU samples.
    Eigen::Matrix<double, 3, 9> L01 = Eigen::Matrix<double, 3, 9>::Zero();
    L01.block<3, 3>(0, 3) = R0;
    L01.block<3, 3>(0, 6) = -R0 / dt01;
    Eigen::Matrix<double, 3, 9> L12 = Eigen::Matrix<double, 3, 9>::Zero();
    L12.block<3, 3>(0, 6) = R1 / dt12;
    blk.sigma = L01 * trip.delta01.cov * L01.transpose() +
                L12 * trip.delta12.cov * L12.transpose();
    blk.sigma = 0.5 * (blk.sigma + blk.sigma.transpose()).eval();
    return blk;
}

// Direct weighted sum of squared residuals. Unlike QuadraticSystem::cost,
// which loses ~1e-7 absolute to cancellation on well-excited problems, every
// term here is non-negative, so it is the form to use when comparing costs
// across solvers.
inline double residual_cost(const std::vector<ResidualBlock>& blocks, const Vec7& x) {
    double cost = 0.0;
    for (const auto& blk : blocks) {
        const Vec3 r = blk.residual(x);
        cost += r.dot(blk.sigma.llt().solve(r));
    }
    return cost;
}

inline QuadraticSystem assemble_quadratic(const std::vector<ResidualBlock>& blocks,
                                          double gravity_magnitude = kGravityMagnitude) {
    if (blocks.size() < 3) {
        throw std::invalid_argument("assemble_quadratic: underdetermined (need >= 3 blocks)");
    }
    QuadraticSystem sys;
    sys.gravity_magnitude = gravity_magnitude;
    for (const auto& blk : blocks) {
        const Mat37 Mk = blk.M();
        const Mat3 info = blk.sigma.inverse();
        const Mat37 IMk = info * Mk;
        const Vec3 info_pi = info * blk.pi;
        sys.M += Mk.transpose() * IMk;
        sys.m += -2.0 * IMk.transpose() * blk.pi;
        sys.cost_const += blk.pi.dot(info_pi);
    }
    sys.M = 0.5 * (sys.M + sys.M.transpose()).eval();
    return sys;
}

// Coefficients of the degree-6 polynomial in lambda whose roots satisfy the
// gravity-norm constraint. coeffs[i] multiplies lambda^i; coeffs[6] = -64 G^2.
using LambdaPolynomial = std::array<double, 7>;

inline LambdaPolynomial build_lambda_polynomial(const QuadraticSystem& sys,
                                                double* a_block_condition = nullptr) {
    const Mat7 M2 = 2.0 * sys.M;
    const Eigen::Matrix4d A = M2.block<4, 4>(0, 0);
    const Eigen::Matrix<double, 4, 3> B = M2.block<4, 3>(0, 4);
    const Mat3 D = M2.block<3, 3>(4, 4);

    // A is symmetric positive semidefinite by construction, so its singular
    // values are its eigenvalues.
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> es_a(A, Eigen::EigenvaluesOnly);
    const Eigen::Vector4d abs_eigs = es_a.eigenvalues().cwiseAbs();
    const double cond = abs_eigs.maxCoeff() / std::max(abs_eigs.minCoeff(), 1e-300);
    if (a_block_condition != nullptr) *a_block_condition = cond;
    if (!(cond < 1e12)) {
        throw std::runtime_error(
            "build_lambda_polynomial: degenerate A-block (insufficient excitation)");
    }

    const Eigen::Matrix<double, 4, 3> AinvB = A.ldlt().solve(B);
    const Mat3 S = D - B.transpose() * AinvB;

    // Adjugate and the auxiliary matrices of the closed-form expansion of
    // (S + 2 lambda I)^{-1}.
    const double trS = S.trace();
    const double detS = S.determinant();
    const Mat3 SA = detS * S.inverse();                // adjugate (S symmetric, det != 0 generically)
    const Mat3 U = trS * Mat3::Identity() - S;
    const Mat3 X = 2.0 * SA + U * U;
    const Mat3 Y = SA * U + U * SA;

    // p(lambda) = det(S + 2 lambda I) = 8 l^3 + 4 tr(S) l^2 + 2 c1 l + det(S),
    // with c1 the sum of the principal 2x2 minors of S.
    const double c1 = 0.5 * (trS * trS - (S * S).trace());
    const std::array<double, 4> p = {detS, 2.0 * c1, 4.0 * trS, 8.0};

    // Quadratic forms m^T [A^{-1}B Z B^T A^{-T}, -A^{-1}B Z; symm, Z] m
    // collapse to w^T Z w with w = B^T A^{-1} m1 - m2 (A, Z symmetric).
    const Eigen::Vector4d m1 = sys.m.head<4>();
    const Vec3 m2 = sys.m.tail<3>();
    const Vec3 w = AinvB.transpose() * m1 - m2;
    const double qI = w.squaredNorm();
    const double qU = w.dot(U * w);
    const double qX = w.dot(X * w);
    const double qY = w.dot(Y * w);
    const double qS2 = (SA * w).squaredNorm();

    // p(lambda)^2 by convolution.
    std::array<double, 7> p2{};
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) p2[i + j] += p[i] * p[j];

    const double G2 = sys.gravity_magnitude * sys.gravity_magnitude;
    LambdaPolynomial c{};
    c[0] = qS2 - G2 * p2[0];
    c[1] = 2.0 * qY - G2 * p2[1];
    c[2] = 4.0 * qX - G2 * p2[2];
    c[3] = 16.0 * qU - G2 * p2[3];
    c[4] = 16.0 * qI - G2 * p2[4];
    c[5] = -G2 * p2[5];
    c[6] = -G2 * p2[6];
    return c;
}

inline double eval_polynomial(const LambdaPolynomial& c, double lambda) {
    double acc = 0.0;
    for (int i = 6; i >= 0; --i) acc = acc * lambda + c[i];
    return acc;
}

// Real roots via the eigenvalues of the companion matrix of the polynomial
// scaled by its max-magnitude coefficient. An eigenvalue counts as real if
// |Im| <= 1e-8 (1 + |Re|).
inline std::vector<double> real_polynomial_roots(const LambdaPolynomial& coeffs) {
    int degree = 6;
    while (degree > 0 && coeffs[degree] == 0.0) --degree;
    if (degree == 0) return {};

    double scale = 0.0;
    for (int i = 0; i <= degree; ++i) scale = std::max(scale, std::abs(coeffs[i]));
    std::vector<double> c(degree + 1);
    for (int i = 0; i <= degree; ++i) c[i] = coeffs[i] / scale;

    std::vector<double> roots;
    auto collect = [&roots](const auto& eigenvalues, int n) {
        for (int i = 0; i < n; ++i) {
            const auto ev = eigenvalues(i);
            if (std::abs(ev.imag()) <= 1e-8 * (1.0 + std::abs(ev.real()))) {
                roots.push_back(ev.real());
            }
        }
    };
    if (degree == 6) {
        // Fixed-size path for the generic case keeps the solve allocation-free.
        using Mat6 = Eigen::Matrix<double, 6, 6>;
        Mat6 companion = Mat6::Zero();
        companion.bottomLeftCorner(5, 5).setIdentity();
        for (int i = 0; i < 6; ++i) companion(i, 5) = -c[i] / c[6];
        Eigen::EigenSolver<Mat6> es(companion, /*computeEigenvectors=*/false);
        collect(es.eigenvalues(), 6);
        return roots;
    }
    Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(degree, degree);
    companion.bottomLeftCorner(degree - 1, degree - 1).setIdentity();
    for (int i = 0; i < degree; ++i) companion(i, degree - 1) = -c[i] / c[degree];
    // Column-companion transpose layout: roots are the eigenvalues.
    Eigen::EigenSolver<Eigen::MatrixXd> es(companion, /*computeEigenvectors=*/false);
    collect(es.eigenvalues(), degree);
    return roots;
}

// Closed-form constrained minimizer: roots of the lambda polynomial, then
// x = -(2M + 2 lambda W)^{-1} m per real root, keeping the feasible candidate
// of minimal cost. Gravity is renormalized exactly to G on output.
inline InitSolution solve_constrained(const QuadraticSystem& sys) {
    InitSolution best;
    const LambdaPolynomial poly =
        build_lambda_polynomial(sys, &best.diagnostics.a_block_condition);
    const std::vector<double> roots = real_polynomial_roots(poly);
    const double G = sys.gravity_magnitude;

    best.diagnostics.num_real_roots = static_cast<int>(roots.size());

    bool found = false;
    double best_cost = std::numeric_limits<double>::infinity();
    for (double lambda : roots) {
        const Mat7 H = 2.0 * sys.M + 2.0 * lambda * QuadraticSystem::W();
        const Vec7 x = -H.partialPivLu().solve(sys.m);
        if (!x.allFinite()) continue;
        const double gnorm = x.tail<3>().norm();
        if (std::abs(gnorm - G) >= 1e-6 * G) continue;
        const double cost = sys.cost(x);
        if (cost < best_cost) {
            best_cost = cost;
            best.s = x[0];
            best.bias_a = x.segment<3>(1);
            best.gravity = x.tail<3>();
            best.lambda = lambda;
            best.cost = cost;
            found = true;
        }
    }
    if (!found) {
        throw std::runtime_error("solve_constrained: no feasible root");
    }
    best.gravity *= G / best.gravity.norm();
    best.diagnostics.scale_positive = best.s > 0.0;
    return best;
}

// Observability heuristic: accept the window only if the mean specific-force
// magnitude deviates from gravity by at least 0.5%.
inline bool check_excitation(std::span<const ImuSample> samples,
                             double gravity_magnitude = kGravityMagnitude) {
    if (samples.empty()) {
        throw std::invalid_argument("check_excitation: empty sample list");
    }
    double mean = 0.0;
    for (const auto& s : samples) mean += s.accel.norm();
    mean /= static_cast<double>(samples.size());
    return std::abs(mean - gravity_magnitude) / gravity_magnitude >= 0.005;
}

}  // namespace vinit
