#pragma once

#include "vinit/accel_solver.hpp"
#include "vinit/imu_types.hpp"
#include "vinit/so3.hpp"

#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

namespace vinit {

enum class TrajectoryKind { kSinusoidal, kConstantVelocity, kStationary };

struct SynthConfig {
    double duration = 10.0;          // [s]
    double imu_rate = 200.0;         // [Hz]
    double keyframe_rate = 4.0;      // [Hz]
    double true_scale = 1.0;
    Vec3 true_bias_g = Vec3::Zero();
    Vec3 true_bias_a = Vec3::Zero();
    Vec3 gravity_dir = Vec3(0.0, 0.0, -1.0);
    double gravity_magnitude = kGravityMagnitude;
    bool add_noise = false;
    NoiseSpec noise;                 // used only when add_noise
    TrajectoryKind kind = TrajectoryKind::kSinusoidal;
    uint64_t seed = 0;
    Mat3 r_cb = Mat3::Identity();
    Vec3 t_cb = Vec3::Zero();
};

struct SynthTruth {
    double scale = 1.0;
    Vec3 bias_g = Vec3::Zero();
    Vec3 bias_a = Vec3::Zero();
    Vec3 gravity = Vec3::Zero();
};

struct SynthOutput {
    std::vector<ImuSample> imu_samples;
    std::vector<KeyframePose> keyframes;   // positions divided by true_scale
    SynthTruth truth;
};

namespace detail {

// Analytic trajectory: per-axis sinusoidal position with distinct
// frequencies and a slowly varying rotation vector. All derivatives exact.
struct AnalyticTrajectory {
    TrajectoryKind kind;

    // position amplitudes [m], frequencies [Hz], phases
    Vec3 amp{1.2, 0.9, 0.7};
    Vec3 freq{0.7, 1.1, 1.3};
    Vec3 phase{0.0, 0.9, 2.1};
    Vec3 vel_const{0.3, -0.2, 0.1};  // constant-velocity mode [m/s]

    // rotation-vector amplitudes [rad], frequencies [Hz], phases
    Vec3 rot_amp{0.3, 0.25, 0.2};
    Vec3 rot_freq{0.5, 0.8, 0.6};
    Vec3 rot_phase{0.4, 1.7, 3.0};

    Vec3 position(double t) const {
        switch (kind) {
            case TrajectoryKind::kStationary:
                return Vec3::Zero();
            case TrajectoryKind::kConstantVelocity:
                return vel_const * t;
            case TrajectoryKind::kSinusoidal:
                break;
        }
        Vec3 p;
        for (int i = 0; i < 3; ++i) {
            p[i] = amp[i] * std::sin(2.0 * M_PI * freq[i] * t + phase[i]);
        }
        return p;
    }

    Vec3 acceleration(double t) const {
        if (kind != TrajectoryKind::kSinusoidal) return Vec3::Zero();
        Vec3 a;
        for (int i = 0; i < 3; ++i) {
            const double w = 2.0 * M_PI * freq[i];
            a[i] = -amp[i] * w * w * std::sin(w * t + phase[i]);
        }
        return a;
    }

    Vec3 rot_vec(double t) const {
        if (kind != TrajectoryKind::kSinusoidal) return Vec3::Zero();
        Vec3 th;
        for (int i = 0; i < 3; ++i) {
            th[i] = rot_amp[i] * std::sin(2.0 * M_PI * rot_freq[i] * t + rot_phase[i]);
        }
        return th;
    }

    Vec3 rot_vec_dot(double t) const {
        if (kind != TrajectoryKind::kSinusoidal) return Vec3::Zero();
        Vec3 d;
        for (int i = 0; i < 3; ++i) {
            const double w = 2.0 * M_PI * rot_freq[i];
            d[i] = rot_amp[i] * w * std::cos(w * t + rot_phase[i]);
        }
        return d;
    }

    Mat3 rotation(double t) const { return exp_so3(rot_vec(t)); }

    // R' = R skew(w_body) with R = Exp(theta(t)) gives w = Jr(theta) theta'.
    Vec3 angular_velocity_body(double t) const {
        return right_jacobian_so3(rot_vec(t)) * rot_vec_dot(t);
    }
};

}  // namespace detail

// Adds i.i.d. Gaussian noise with discrete covariance Sigma/dt per sample;
// deterministic given the seed. dt is taken from consecutive timestamps
// (first sample reuses the following interval).
inline std::vector<ImuSample> perturb_measurements(std::vector<ImuSample> samples,
                                                   const NoiseSpec& noise, uint64_t seed) {
    if (samples.size() < 2) return samples;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const Mat3 Lg = Eigen::LLT<Mat3>(noise.gyro_cov).matrixL();
    const Mat3 La = Eigen::LLT<Mat3>(noise.accel_cov).matrixL();
    for (size_t k = 0; k < samples.size(); ++k) {
        const double dt = (k + 1 < samples.size()) ? samples[k + 1].t - samples[k].t
                                                   : samples[k].t - samples[k - 1].t;
        const double scale = 1.0 / std::sqrt(dt);
        const Vec3 ng(gauss(rng), gauss(rng), gauss(rng));
        const Vec3 na(gauss(rng), gauss(rng), gauss(rng));
        samples[k].gyro += scale * (Lg * ng);
        samples[k].accel += scale * (La * na);
    }
    return samples;
}

inline SynthOutput generate(const SynthConfig& config) {
    if (!(config.imu_rate > config.keyframe_rate) || !(config.true_scale > 0.0)) {
        throw std::invalid_argument("generate: invalid synth config");
    }
    detail::AnalyticTrajectory traj;
    traj.kind = config.kind;

    const Vec3 gravity = config.gravity_dir.normalized() * config.gravity_magnitude;
    const double dt = 1.0 / config.imu_rate;
    const auto n_samples = static_cast<size_t>(std::llround(config.duration * config.imu_rate));

    SynthOutput out;
    out.truth.scale = config.true_scale;
    out.truth.bias_g = config.true_bias_g;
    out.truth.bias_a = config.true_bias_a;
    out.truth.gravity = gravity;

    // Ideal measurements from the analytic derivatives.
    out.imu_samples.reserve(n_samples);
    for (size_t k = 0; k < n_samples; ++k) {
        const double t = static_cast<double>(k) * dt;
        const Mat3 R = traj.rotation(t);
        ImuSample s;
        s.t = t;
        s.gyro = traj.angular_velocity_body(t) + config.true_bias_g;
        s.accel = R.transpose() * (traj.acceleration(t) - gravity) + config.true_bias_a;
        out.imu_samples.push_back(s);
    }

    // Keyframe ground truth follows the discrete Euler model driven by the
    // ideal measurements, so that noiseless data satisfies the measurement
    // model exactly; the gap to the analytic trajectory is Euler truncation.
    const auto stride = static_cast<size_t>(std::llround(config.imu_rate / config.keyframe_rate));
    Mat3 R_wb = traj.rotation(0.0);
    Vec3 v = Vec3::Zero();
    if (config.kind == TrajectoryKind::kSinusoidal) {
        for (int i = 0; i < 3; ++i) {
            const double w = 2.0 * M_PI * traj.freq[i];
            v[i] = traj.amp[i] * w * std::cos(traj.phase[i]);
        }
    } else if (config.kind == TrajectoryKind::kConstantVelocity) {
        v = traj.vel_const;
    }
    Vec3 p = traj.position(0.0);
    for (size_t k = 0; k < n_samples; ++k) {
        if (k % stride == 0) {
            KeyframePose kf;
            kf.t = out.imu_samples[k].t;
            kf.rotation = R_wb * config.r_cb.transpose();
            kf.position = (p - kf.rotation * config.t_cb) / config.true_scale;
            out.keyframes.push_back(kf);
        }
        const Vec3 w_body = out.imu_samples[k].gyro - config.true_bias_g;
        const Vec3 a_body = out.imu_samples[k].accel - config.true_bias_a;
        p += v * dt + 0.5 * gravity * dt * dt + 0.5 * R_wb * a_body * dt * dt;
        v += gravity * dt + R_wb * a_body * dt;
        R_wb = R_wb * exp_so3(w_body * dt);
    }

    if (config.add_noise) {
        out.imu_samples = perturb_measurements(std::move(out.imu_samples), config.noise, config.seed);
    }
    return out;
}

}  // namespace vinit
