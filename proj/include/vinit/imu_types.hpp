#pragma once

#include "vinit/so3.hpp"

#include <cstdint>
#include <vector>

namespace vinit {

constexpr double kGravityMagnitude = 9.81;  // [m/s^2]

// One timestamped gyroscope + accelerometer reading.
struct ImuSample {
    double t = 0.0;                  // [s]
    Vec3 gyro = Vec3::Zero();        // [rad/s]
    Vec3 accel = Vec3::Zero();       // [m/s^2]
};

// Continuous-time noise covariances; discretized as Sigma / dt per sample.
struct NoiseSpec {
    Mat3 gyro_cov = Mat3::Zero();    // [(rad/s)^2 * s]
    Mat3 accel_cov = Mat3::Zero();   // [(m/s^2)^2 * s]

    static NoiseSpec from_densities(double gyro_density, double accel_density) {
        NoiseSpec n;
        n.gyro_cov = gyro_density * gyro_density * Mat3::Identity();
        n.accel_cov = accel_density * accel_density * Mat3::Identity();
        return n;
    }
};

// Up-to-scale visual pose at a keyframe timestamp (camera-to-world).
struct KeyframePose {
    double t = 0.0;                  // [s]
    Mat3 rotation = Mat3::Identity();
    Vec3 position = Vec3::Zero();    // up-to-scale units
};

// Camera-body extrinsics plus IMU noise characteristics.
struct Calibration {
    Mat3 r_cb = Mat3::Identity();
    Vec3 t_cb = Vec3::Zero();        // [m]
    double gyro_noise_density = 1.7e-4;   // [rad/s/sqrt(Hz)]
    double accel_noise_density = 2.0e-3;  // [m/s^2/sqrt(Hz)]
    double imu_rate = 200.0;              // [Hz]

    NoiseSpec noise() const {
        return NoiseSpec::from_densities(gyro_noise_density, accel_noise_density);
    }
};

struct GroundTruthState {
    double t = 0.0;
    Vec3 position = Vec3::Zero();    // [m]
    Eigen::Quaterniond orientation = Eigen::Quaterniond::Identity();
    Vec3 velocity = Vec3::Zero();    // [m/s]
    Vec3 bias_g = Vec3::Zero();      // [rad/s]
    Vec3 bias_a = Vec3::Zero();      // [m/s^2]
};

}  // namespace vinit
