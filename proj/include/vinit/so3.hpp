#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cmath>
#include <stdexcept>

namespace vinit {

using Mat3 = Eigen::Matrix3d;
using Vec3 = Eigen::Vector3d;

inline Mat3 skew(const Vec3& v) {
    Mat3 m;
    m << 0.0, -v.z(), v.y(),
         v.z(), 0.0, -v.x(),
        -v.y(), v.x(), 0.0;
    return m;
}

// Below this angle, series expansions replace the closed forms.
constexpr double kSmallAngle = 1e-8;

inline Mat3 exp_so3(const Vec3& phi) {
    const double theta2 = phi.squaredNorm();
    const double theta = std::sqrt(theta2);
    const Mat3 W = skew(phi);
    if (theta < kSmallAngle) {
        return Mat3::Identity() + W + 0.5 * W * W;
    }
    return Mat3::Identity() + std::sin(theta) / theta * W +
           (1.0 - std::cos(theta)) / theta2 * W * W;
}

inline bool is_valid_rotation(const Mat3& R, double tol = 1e-6) {
    return (R.transpose() * R - Mat3::Identity()).cwiseAbs().maxCoeff() <= tol &&
           std::abs(R.determinant() - 1.0) <= tol;
}

// Rotation vector with norm <= pi. At exactly pi the axis sign is
// canonicalized so that its first nonzero component is positive.
inline Vec3 log_so3(const Mat3& R) {
    if (!is_valid_rotation(R)) {
        throw std::invalid_argument("log_so3: input is not a rotation matrix");
    }
    const double cos_theta = std::min(1.0, std::max(-1.0, 0.5 * (R.trace() - 1.0)));
    const Vec3 w(R(2, 1) - R(1, 2), R(0, 2) - R(2, 0), R(1, 0) - R(0, 1));
    const double sin_theta = 0.5 * w.norm();
    const double theta = std::atan2(sin_theta, cos_theta);
    if (theta < kSmallAngle) {
        return 0.5 * w;
    }
    if (theta < M_PI - 1e-7) {
        return 0.5 * theta / sin_theta * w;
    }
    // Near pi: sin(theta) -> 0, extract the axis from the diagonal of
    // R = I + (1-cos)aa^T + ..., picking the largest diagonal entry.
    int i = 0;
    R.diagonal().maxCoeff(&i);
    const int j = (i + 1) % 3, k = (i + 2) % 3;
    Vec3 axis;
    axis[i] = std::sqrt(std::max(0.0, (R(i, i) - cos_theta) / (1.0 - cos_theta)));
    axis[j] = 0.5 * (R(i, j) + R(j, i)) / ((1.0 - cos_theta) * axis[i]);
    axis[k] = 0.5 * (R(i, k) + R(k, i)) / ((1.0 - cos_theta) * axis[i]);
    axis.normalize();
    // Resolve the sign from the off-diagonal skew part when it is not
    // degenerate, otherwise canonicalize (first nonzero component positive).
    const double s = axis.dot(w);
    if (std::abs(s) > 1e-12) {
        if (s < 0.0) axis = -axis;
    } else {
        for (int c = 0; c < 3; ++c) {
            if (std::abs(axis[c]) > 1e-12) {
                if (axis[c] < 0.0) axis = -axis;
                break;
            }
        }
    }
    return theta * axis;
}

inline Mat3 right_jacobian_so3(const Vec3& phi) {
    const double theta2 = phi.squaredNorm();
    const double theta = std::sqrt(theta2);
    const Mat3 W = skew(phi);
    if (theta < kSmallAngle) {
        return Mat3::Identity() - 0.5 * W + W * W / 6.0;
    }
    return Mat3::Identity() - (1.0 - std::cos(theta)) / theta2 * W +
           (theta - std::sin(theta)) / (theta2 * theta) * W * W;
}

inline Mat3 right_jacobian_inv_so3(const Vec3& phi) {
    const double theta2 = phi.squaredNorm();
    const double theta = std::sqrt(theta2);
    const Mat3 W = skew(phi);
    if (theta < kSmallAngle) {
        return Mat3::Identity() + 0.5 * W + W * W / 12.0;
    }
    return Mat3::Identity() + 0.5 * W +
           (1.0 / theta2 - 0.5 * (1.0 + std::cos(theta)) / (theta * std::sin(theta))) * W * W;
}

inline Mat3 quat_to_rot(double qw, double qx, double qy, double qz) {
    return Eigen::Quaterniond(qw, qx, qy, qz).normalized().toRotationMatrix();
}

inline Eigen::Quaterniond rot_to_quat(const Mat3& R) {
    return Eigen::Quaterniond(R).normalized();
}

}  // namespace vinit
