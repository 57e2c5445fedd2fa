#include "vinit/gyro_bias_solver.hpp"
#include "vinit/trajectory_synth.hpp"

#include <catch_amalgamated.hpp>

#include <random>

using namespace vinit;

namespace {

const NoiseSpec kNoise = NoiseSpec::from_densities(1.7e-4, 2e-3);

// Builds the gyro problem from a synthetic sequence: preintegrate each
// keyframe interval at zero bias and pair with the visual rotations.
GyroProblem problem_from_synth(const SynthOutput& out, const Mat3& r_cb = Mat3::Identity()) {
    GyroProblem gp;
    for (size_t k = 0; k + 1 < out.keyframes.size(); ++k) {
        std::vector<ImuSample> slice;
        for (const auto& s : out.imu_samples) {
            if (s.t >= out.keyframes[k].t && s.t < out.keyframes[k + 1].t) slice.push_back(s);
        }
        GyroPair pair;
        pair.delta = preintegrate(slice, Vec3::Zero(), Vec3::Zero(), kNoise,
                                  out.keyframes[k + 1].t);
        pair.R_k = out.keyframes[k].rotation * r_cb;
        pair.R_k1 = out.keyframes[k + 1].rotation * r_cb;
        gp.pairs.push_back(pair);
    }
    return gp;
}

SynthConfig base_config(double duration = 5.0) {
    SynthConfig cfg;
    cfg.duration = duration;
    cfg.kind = TrajectoryKind::kSinusoidal;
    return cfg;
}

}  // namespace

TEST_CASE("residual is zero for consistent pair at zero bias") {
    auto cfg = base_config();
    const auto out = generate(cfg);
    const auto gp = problem_from_synth(out);
    for (const auto& pair : gp.pairs) {
        // Noiseless zero-bias data satisfies the model exactly.
        REQUIRE(gyro_residual(pair, Vec3::Zero()).norm() < 1e-10);
    }
}

TEST_CASE("residual vanishes at the true bias and grows away from it") {
    auto cfg = base_config();
    cfg.true_bias_g = Vec3(0.02, -0.01, 0.005);
    const auto out = generate(cfg);

    // Preintegrate at the true bias: residual reduces to Euler truncation.
    GyroProblem gp_true;
    for (size_t k = 0; k + 1 < out.keyframes.size(); ++k) {
        std::vector<ImuSample> slice;
        for (const auto& s : out.imu_samples) {
            if (s.t >= out.keyframes[k].t && s.t < out.keyframes[k + 1].t) slice.push_back(s);
        }
        GyroPair pair;
        pair.delta = preintegrate(slice, cfg.true_bias_g, Vec3::Zero(), kNoise,
                                  out.keyframes[k + 1].t);
        pair.R_k = out.keyframes[k].rotation;
        pair.R_k1 = out.keyframes[k + 1].rotation;
        gp_true.pairs.push_back(pair);
    }
    double at_truth = 0.0, at_zero = 0.0;
    for (const auto& pair : gp_true.pairs) {
        at_truth += gyro_residual(pair, cfg.true_bias_g).norm();
        at_zero += gyro_residual(pair, Vec3::Zero()).norm();
    }
    REQUIRE(at_truth / gp_true.pairs.size() < 1e-8);
    REQUIRE(at_zero > 10.0 * at_truth);
}

TEST_CASE("recovers the true bias on noiseless data") {
    auto cfg = base_config(5.0);  // 20 keyframes at 4 Hz
    cfg.true_bias_g = Vec3(0.02, -0.01, 0.005);
    const auto out = generate(cfg);
    const auto sol = solve_gyro_bias(problem_from_synth(out));
    REQUIRE(sol.converged);
    // The Exp(J db) correction is first order in the bias, so a single solve
    // carries a quadratic offset; re-integration (done by the pipeline) is
    // what removes it.
    REQUIRE((sol.bias_g - cfg.true_bias_g).norm() < 1e-6);
}

TEST_CASE("zero-noise zero-bias input returns zero quickly") {
    auto cfg = base_config();
    cfg.kind = TrajectoryKind::kStationary;
    const auto out = generate(cfg);
    const auto sol = solve_gyro_bias(problem_from_synth(out));
    REQUIRE(sol.bias_g.norm() < 1e-12);
    REQUIRE(sol.iterations <= 2);
}

TEST_CASE("residual jacobian matches finite differences") {
    auto cfg = base_config();
    cfg.true_bias_g = Vec3(0.02, -0.01, 0.005);
    const auto out = generate(cfg);
    const auto gp = problem_from_synth(out);
    const double eps = 1e-7;
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-0.05, 0.05);
    for (int trial = 0; trial < 50; ++trial) {
        const auto& pair = gp.pairs[trial % gp.pairs.size()];
        const Vec3 b(u(rng), u(rng), u(rng));
        const Vec3 r = gyro_residual(pair, b);
        const Mat3 J = gyro_residual_jacobian(pair, b, r);
        for (int c = 0; c < 3; ++c) {
            const Vec3 e = eps * Vec3::Unit(c);
            const Vec3 fd = (gyro_residual(pair, b + e) - gyro_residual(pair, b - e)) / (2.0 * eps);
            REQUIRE((fd - J.col(c)).norm() < 1e-6 * std::max(1.0, J.col(c).norm()));
        }
    }
}

TEST_CASE("solution invariant to a global rotation of the visual poses") {
    auto cfg = base_config();
    cfg.true_bias_g = Vec3(0.015, 0.02, -0.01);
    const auto out = generate(cfg);
    auto gp = problem_from_synth(out);
    const auto sol = solve_gyro_bias(gp);

    const Mat3 R0 = exp_so3(Vec3(0.4, -1.1, 0.7));
    for (auto& pair : gp.pairs) {
        pair.R_k = R0 * pair.R_k;
        pair.R_k1 = R0 * pair.R_k1;
    }
    const auto sol_rot = solve_gyro_bias(gp);
    REQUIRE((sol.bias_g - sol_rot.bias_g).norm() < 1e-10);
}

TEST_CASE("more keyframes reduce the bias error under noise") {
    std::vector<double> err10, err40;
    for (uint64_t seed = 0; seed < 50; ++seed) {
        for (const bool long_run : {false, true}) {
            auto cfg = base_config(long_run ? 10.0 : 2.5);  // 40 vs 10 intervals
            cfg.true_bias_g = Vec3(0.02, -0.01, 0.005);
            cfg.add_noise = true;
            cfg.noise = kNoise;
            cfg.seed = seed;
            const auto out = generate(cfg);
            const auto sol = solve_gyro_bias(problem_from_synth(out));
            const double err = (sol.bias_g - cfg.true_bias_g).norm();
            (long_run ? err40 : err10).push_back(err);
        }
    }
    const double mean10 = std::accumulate(err10.begin(), err10.end(), 0.0) / err10.size();
    const double mean40 = std::accumulate(err40.begin(), err40.end(), 0.0) / err40.size();
    REQUIRE(mean40 < mean10);
}

TEST_CASE("empty problem is rejected") {
    REQUIRE_THROWS_AS(solve_gyro_bias(GyroProblem{}), std::invalid_argument);
}
