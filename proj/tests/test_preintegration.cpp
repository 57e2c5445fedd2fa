#include "vinit/preintegration.hpp"

#include <Eigen/Eigenvalues>
#include <catch_amalgamated.hpp>

#include <random>

using namespace vinit;

namespace {

std::mt19937_64 rng(7);

Vec3 random_vec(double scale) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    return scale * Vec3(u(rng), u(rng), u(rng));
}

std::vector<ImuSample> constant_stream(size_t n, double dt, const Vec3& gyro, const Vec3& accel) {
    std::vector<ImuSample> samples(n);
    for (size_t k = 0; k < n; ++k) {
        samples[k].t = static_cast<double>(k) * dt;
        samples[k].gyro = gyro;
        samples[k].accel = accel;
    }
    return samples;
}

std::vector<ImuSample> random_stream(size_t n, double dt, double gyro_scale, double accel_scale) {
    std::vector<ImuSample> samples(n);
    for (size_t k = 0; k < n; ++k) {
        samples[k].t = static_cast<double>(k) * dt;
        samples[k].gyro = random_vec(gyro_scale);
        samples[k].accel = random_vec(accel_scale);
    }
    return samples;
}

const NoiseSpec kNoise = NoiseSpec::from_densities(1.7e-4, 2e-3);

// Independent scalar-loop oracle for the x-axis Euler sums (no rotation).
struct ScalarOracle {
    double dv = 0.0, dp = 0.0;
    void step(double a, double dt) {
        dp += dv * dt + 0.5 * a * dt * dt;
        dv += a * dt;
    }
};

}  // namespace

TEST_CASE("zero input gives identity delta") {
    const auto samples = constant_stream(50, 0.01, Vec3::Zero(), Vec3::Zero());
    const auto d = preintegrate(samples, Vec3::Zero(), Vec3::Zero(), kNoise, 0.5);
    REQUIRE((d.dR - Mat3::Identity()).norm() == 0.0);
    REQUIRE(d.dv.norm() == 0.0);
    REQUIRE(d.dp.norm() == 0.0);
    REQUIRE(d.dt_total == Catch::Approx(0.5));
}

TEST_CASE("constant acceleration matches the scalar Euler oracle") {
    const auto samples = constant_stream(100, 0.01, Vec3::Zero(), Vec3(1.0, 0.0, 0.0));
    const auto d = preintegrate(samples, Vec3::Zero(), Vec3::Zero(), kNoise, 1.0);

    ScalarOracle oracle;
    for (int k = 0; k < 100; ++k) oracle.step(1.0, 0.01);
    REQUIRE(oracle.dv == Catch::Approx(1.0));
    REQUIRE(oracle.dp == Catch::Approx(0.5));

    REQUIRE(d.dv.x() == Catch::Approx(oracle.dv).epsilon(1e-12));
    REQUIRE(d.dp.x() == Catch::Approx(oracle.dp).epsilon(1e-12));
    REQUIRE(d.dv.tail<2>().norm() == 0.0);
    REQUIRE(d.dp.tail<2>().norm() == 0.0);
}

TEST_CASE("errors on empty or non-monotone input") {
    REQUIRE_THROWS_AS(preintegrate({}, Vec3::Zero(), Vec3::Zero(), kNoise),
                      std::invalid_argument);
    auto samples = constant_stream(5, 0.01, Vec3::Zero(), Vec3::Zero());
    samples[3].t = samples[1].t;
    REQUIRE_THROWS_AS(preintegrate(samples, Vec3::Zero(), Vec3::Zero(), kNoise),
                      std::invalid_argument);
}

TEST_CASE("bias correction with zero delta is a no-op") {
    const auto samples = random_stream(100, 0.005, 0.5, 3.0);
    const auto d = preintegrate(samples, Vec3::Zero(), Vec3::Zero(), kNoise, 0.5);
    const auto d2 = correct_for_bias(d, Vec3::Zero(), Vec3::Zero());
    REQUIRE((d2.dR - d.dR).norm() == 0.0);
    REQUIRE((d2.dv - d.dv).norm() == 0.0);
    REQUIRE((d2.dp - d.dp).norm() == 0.0);
}

TEST_CASE("bias correction agrees with re-preintegration to first order") {
    const auto samples = random_stream(200, 0.005, 0.5, 3.0);
    const Vec3 bg = 0.01 * Vec3(0.3, -0.8, 0.5).normalized();
    const Vec3 ba = 0.01 * Vec3(-0.6, 0.2, 0.7).normalized();

    const auto d0 = preintegrate(samples, Vec3::Zero(), Vec3::Zero(), kNoise, 1.0);
    const auto corrected = correct_for_bias(d0, bg, ba);
    const auto exact = preintegrate(samples, bg, ba, kNoise, 1.0);

    REQUIRE((corrected.dR - exact.dR).cwiseAbs().maxCoeff() < 1e-4);
    REQUIRE((corrected.dv - exact.dv).norm() < 1e-4);
    REQUIRE((corrected.dp - exact.dp).norm() < 1e-4);
}

TEST_CASE("bias Jacobians match central finite differences") {
    const double eps = 1e-6;
    for (int trial = 0; trial < 10; ++trial) {
        const auto samples = random_stream(100, 0.005, 0.5, 3.0);
        const Vec3 bg = random_vec(0.02);
        const Vec3 ba = random_vec(0.05);
        const auto d = preintegrate(samples, bg, ba, kNoise, 0.5);

        for (int c = 0; c < 3; ++c) {
            const Vec3 e = eps * Vec3::Unit(c);
            const auto dp_a = preintegrate(samples, bg, ba + e, kNoise, 0.5);
            const auto dm_a = preintegrate(samples, bg, ba - e, kNoise, 0.5);
            const Vec3 col_dv_ba = (dp_a.dv - dm_a.dv) / (2.0 * eps);
            const Vec3 col_dp_ba = (dp_a.dp - dm_a.dp) / (2.0 * eps);
            REQUIRE((col_dv_ba - d.J_dv_ba.col(c)).norm() <
                    1e-5 * std::max(1.0, d.J_dv_ba.col(c).norm()));
            REQUIRE((col_dp_ba - d.J_dp_ba.col(c)).norm() <
                    1e-5 * std::max(1.0, d.J_dp_ba.col(c).norm()));

            const auto dp_g = preintegrate(samples, bg + e, ba, kNoise, 0.5);
            const auto dm_g = preintegrate(samples, bg - e, ba, kNoise, 0.5);
            const Vec3 col_dR_bg =
                (log_so3(d.dR.transpose() * dp_g.dR) - log_so3(d.dR.transpose() * dm_g.dR)) /
                (2.0 * eps);
            REQUIRE((col_dR_bg - d.J_dR_bg.col(c)).norm() <
                    1e-5 * std::max(1.0, d.J_dR_bg.col(c).norm()));

            const Vec3 col_dv_bg = (dp_g.dv - dm_g.dv) / (2.0 * eps);
            const Vec3 col_dp_bg = (dp_g.dp - dm_g.dp) / (2.0 * eps);
            REQUIRE((col_dv_bg - d.J_dv_bg.col(c)).norm() <
                    1e-5 * std::max(1.0, d.J_dv_bg.col(c).norm()));
            REQUIRE((col_dp_bg - d.J_dp_bg.col(c)).norm() <
                    1e-5 * std::max(1.0, d.J_dp_bg.col(c).norm()));
        }
    }
}

TEST_CASE("interval concatenation composes") {
    const auto samples = random_stream(200, 0.005, 0.8, 4.0);
    const std::vector<ImuSample> first(samples.begin(), samples.begin() + 120);
    const std::vector<ImuSample> second(samples.begin() + 120, samples.end());
    const double t_mid = samples[120].t;
    const double t_end = 1.0;

    const auto d_ij = preintegrate(first, Vec3::Zero(), Vec3::Zero(), kNoise, t_mid);
    const auto d_jk = preintegrate(second, Vec3::Zero(), Vec3::Zero(), kNoise, t_end);
    const auto d_ik = preintegrate(samples, Vec3::Zero(), Vec3::Zero(), kNoise, t_end);

    const auto composed = compose(d_ij, d_jk);
    REQUIRE((composed.dR - d_ik.dR).cwiseAbs().maxCoeff() < 1e-10);
    REQUIRE((composed.dv - d_ik.dv).norm() < 1e-10);
    REQUIRE((composed.dp - d_ik.dp).norm() < 1e-10);
    REQUIRE(composed.dt_total == Catch::Approx(d_ik.dt_total));
}

TEST_CASE("covariance trace grows monotonically") {
    const auto samples = random_stream(300, 0.005, 0.5, 3.0);
    double prev_trace = 0.0;
    for (size_t n = 10; n <= 300; n += 10) {
        const std::vector<ImuSample> head(samples.begin(), samples.begin() + n);
        const auto d = preintegrate(head, Vec3::Zero(), Vec3::Zero(), kNoise,
                                    head.back().t + 0.005);
        REQUIRE(d.cov.trace() >= prev_trace);
        prev_trace = d.cov.trace();
    }
}

TEST_CASE("covariance is symmetric PSD and cov_rot matches the block") {
    const auto samples = random_stream(100, 0.005, 0.5, 3.0);
    const auto d = preintegrate(samples, Vec3::Zero(), Vec3::Zero(), kNoise, 0.5);
    REQUIRE((d.cov - d.cov.transpose()).cwiseAbs().maxCoeff() < 1e-18);
    REQUIRE((d.cov_rot - d.cov.block<3, 3>(0, 0)).norm() == 0.0);
    Eigen::SelfAdjointEigenSolver<Mat9> es(d.cov);
    REQUIRE(es.eigenvalues().minCoeff() > -1e-18);
}
