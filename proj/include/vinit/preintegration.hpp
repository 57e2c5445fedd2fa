#pragma once

#include "vinit/imu_types.hpp"
#include "vinit/so3.hpp"

#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>

namespace vinit {

using Mat9 = Eigen::Matrix<double, 9, 9>;

// Keyframe-to-keyframe preintegrated IMU deltas with bias Jacobians and
// propagated noise covariance. The 9-dim error state is ordered
// (rotation, velocity, position).
struct PreintegratedDelta {
    Mat3 dR = Mat3::Identity();
    Vec3 dv = Vec3::Zero();          // [m/s]
    Vec3 dp = Vec3::Zero();          // [m]
    double dt_total = 0.0;           // [s]

    Mat3 J_dR_bg = Mat3::Zero();
    Mat3 J_dv_bg = Mat3::Zero();
    Mat3 J_dv_ba = Mat3::Zero();
    Mat3 J_dp_bg = Mat3::Zero();
    Mat3 J_dp_ba = Mat3::Zero();

    Mat3 cov_rot = Mat3::Zero();     // rotation-residual covariance
    Mat9 cov = Mat9::Zero();         // joint (dR, dv, dp) noise covariance

    Vec3 bias_ref_g = Vec3::Zero();  // bias linearization points
    Vec3 bias_ref_a = Vec3::Zero();
};

// Forward-Euler preintegration over [samples.front().t, t_end). Each sample
// holds until the next one; the last sample holds until t_end. If t_end is
// NaN the last interval replicates the previous one.
inline PreintegratedDelta preintegrate(std::span<const ImuSample> samples,
                                       const Vec3& bias_g, const Vec3& bias_a,
                                       const NoiseSpec& noise,
                                       double t_end = std::numeric_limits<double>::quiet_NaN()) {
    if (samples.empty()) {
        throw std::invalid_argument("preintegrate: empty sample list");
    }
    for (size_t k = 1; k < samples.size(); ++k) {
        if (!(samples[k].t > samples[k - 1].t)) {
            throw std::invalid_argument("preintegrate: non-monotone timestamps");
        }
    }

    PreintegratedDelta d;
    d.bias_ref_g = bias_g;
    d.bias_ref_a = bias_a;

    const size_t n = samples.size();
    for (size_t k = 0; k < n; ++k) {
        double dt;
        if (k + 1 < n) {
            dt = samples[k + 1].t - samples[k].t;
        } else if (std::isfinite(t_end) && t_end > samples[k].t) {
            dt = t_end - samples[k].t;
        } else if (n >= 2) {
            dt = samples[k].t - samples[k - 1].t;
        } else {
            throw std::invalid_argument("preintegrate: single sample needs explicit t_end");
        }

        const Vec3 w = samples[k].gyro - bias_g;
        const Vec3 a = samples[k].accel - bias_a;
        const Mat3 dR_inc = exp_so3(w * dt);
        const Mat3 Jr = right_jacobian_so3(w * dt);
        const Mat3 dR_a_hat = d.dR * skew(a);

        // Covariance: error-state transition and noise injection, with the
        // discrete covariances Sigma/dt.
        Mat9 A = Mat9::Identity();
        A.block<3, 3>(0, 0) = dR_inc.transpose();
        A.block<3, 3>(3, 0) = -dR_a_hat * dt;
        A.block<3, 3>(6, 0) = -0.5 * dR_a_hat * dt * dt;
        A.block<3, 3>(6, 3) = Mat3::Identity() * dt;

        const Mat3 sigma_gd = noise.gyro_cov / dt;
        const Mat3 sigma_ad = noise.accel_cov / dt;
        Mat9 add = Mat9::Zero();
        const Mat3 Bg = Jr * dt;
        add.block<3, 3>(0, 0) = Bg * sigma_gd * Bg.transpose();
        const Mat3 Bv = d.dR * dt;
        const Mat3 Bp = 0.5 * d.dR * dt * dt;
        add.block<3, 3>(3, 3) = Bv * sigma_ad * Bv.transpose();
        add.block<3, 3>(3, 6) = Bv * sigma_ad * Bp.transpose();
        add.block<3, 3>(6, 3) = Bp * sigma_ad * Bv.transpose();
        add.block<3, 3>(6, 6) = Bp * sigma_ad * Bp.transpose();
        d.cov = A * d.cov * A.transpose() + add;

        // Bias Jacobians (accumulated before the state update so they use
        // the k-th partial delta, matching the sums in the model).
        d.J_dp_ba += d.J_dv_ba * dt - 0.5 * d.dR * dt * dt;
        d.J_dp_bg += d.J_dv_bg * dt - 0.5 * dR_a_hat * d.J_dR_bg * dt * dt;
        d.J_dv_ba += -d.dR * dt;
        d.J_dv_bg += -dR_a_hat * d.J_dR_bg * dt;
        d.J_dR_bg = dR_inc.transpose() * d.J_dR_bg - Jr * dt;

        // State update, forward Euler.
        d.dp += d.dv * dt + 0.5 * d.dR * a * dt * dt;
        d.dv += d.dR * a * dt;
        d.dR = d.dR * dR_inc;
        d.dt_total += dt;
    }

    d.cov = 0.5 * (d.cov + d.cov.transpose()).eval();
    d.cov_rot = d.cov.block<3, 3>(0, 0);
    return d;
}

// First-order bias update around the stored linearization point.
// Valid for small ||new_bias - bias_ref||; no hard check is performed.
inline PreintegratedDelta correct_for_bias(const PreintegratedDelta& delta,
                                           const Vec3& new_bias_g, const Vec3& new_bias_a) {
    const Vec3 dbg = new_bias_g - delta.bias_ref_g;
    const Vec3 dba = new_bias_a - delta.bias_ref_a;
    PreintegratedDelta out = delta;
    out.dR = delta.dR * exp_so3(delta.J_dR_bg * dbg);
    out.dv = delta.dv + delta.J_dv_bg * dbg + delta.J_dv_ba * dba;
    out.dp = delta.dp + delta.J_dp_bg * dbg + delta.J_dp_ba * dba;
    out.bias_ref_g = new_bias_g;
    out.bias_ref_a = new_bias_a;
    return out;
}

// Composes two adjacent noiseless deltas [i,j] and [j,k] into [i,k].
inline PreintegratedDelta compose(const PreintegratedDelta& ij, const PreintegratedDelta& jk) {
    PreintegratedDelta out;
    out.dR = ij.dR * jk.dR;
    out.dv = ij.dv + ij.dR * jk.dv;
    out.dp = ij.dp + ij.dv * jk.dt_total + ij.dR * jk.dp;
    out.dt_total = ij.dt_total + jk.dt_total;
    out.bias_ref_g = ij.bias_ref_g;
    out.bias_ref_a = ij.bias_ref_a;
    return out;
}

}  // namespace vinit
