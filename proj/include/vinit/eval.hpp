#pragma once

#include "vinit/accel_solver.hpp"
#include "vinit/euroc_ingest.hpp"
#include "vinit/gyro_bias_solver.hpp"
#include "vinit/iterative_solver.hpp"
#include "vinit/preintegration.hpp"
#include "vinit/trajectory_synth.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

namespace vinit {

inline double gravity_angle_error_deg(const Vec3& g_est, const Vec3& g_true) {
    if (g_est.norm() == 0.0 || g_true.norm() == 0.0) {
        throw std::invalid_argument("gravity_angle_error: zero vector");
    }
    const double c = std::clamp(g_est.normalized().dot(g_true.normalized()), -1.0, 1.0);
    return std::acos(c) * 180.0 / M_PI;
}

inline double scale_error_pct(double s_est, double s_true) {
    if (!(s_true > 0.0)) throw std::invalid_argument("scale_error: s_true must be positive");
    return 100.0 * std::abs(s_est - s_true) / s_true;
}

// ---------------------------------------------------------------------------
// Initialization pipeline over one keyframe window.

struct PipelineResult {
    Vec3 bias_g = Vec3::Zero();
    GyroSolution gyro;
    std::vector<ResidualBlock> blocks;
    std::vector<PreintegratedDelta> deltas;   // gyro-corrected
    bool excitation_ok = true;
    double preint_time_us = 0.0;
    double gyro_time_us = 0.0;
};

// Preintegrates per keyframe interval, checks excitation, solves the
// gyroscope bias, and assembles the accelerometer residual blocks.
inline PipelineResult run_pipeline(const std::vector<KeyframePose>& keyframes,
                                   const std::vector<ImuSample>& samples,
                                   const Calibration& calib) {
    using Clock = std::chrono::steady_clock;
    if (keyframes.size() < 3) throw DataError("run_pipeline: need at least 3 keyframes");

    PipelineResult res;
    const NoiseSpec noise = calib.noise();

    const auto t_pre0 = Clock::now();
    std::vector<PreintegratedDelta> deltas;
    std::vector<std::vector<ImuSample>> slices;
    for (size_t k = 0; k + 1 < keyframes.size(); ++k) {
        auto slice = slice_imu(samples, keyframes[k].t, keyframes[k + 1].t);
        deltas.push_back(preintegrate(slice, Vec3::Zero(), Vec3::Zero(), noise,
                                      keyframes[k + 1].t));
        slices.push_back(std::move(slice));
    }
    res.preint_time_us = std::chrono::duration<double, std::micro>(Clock::now() - t_pre0).count();

    const auto window = slice_imu(samples, keyframes.front().t,
                                  keyframes.back().t + 1e-9);
    res.excitation_ok = check_excitation(window);

    std::vector<Mat3> r_body(keyframes.size());
    for (size_t k = 0; k < keyframes.size(); ++k) {
        r_body[k] = keyframes[k].rotation * calib.r_cb;
    }

    const auto t_gyro0 = Clock::now();
    GyroProblem gp;
    for (size_t k = 0; k + 1 < keyframes.size(); ++k) {
        gp.pairs.push_back({deltas[k], r_body[k], r_body[k + 1]});
    }
    res.gyro = solve_gyro_bias(gp);

    // Outer refinement: the Exp(J db) rotation correction is first order in
    // the bias, leaving a quadratic offset in the estimate. Re-integrating at
    // the estimate and re-solving removes it.
    GyroProblem gp_ref;
    for (size_t k = 0; k + 1 < keyframes.size(); ++k) {
        GyroPair pair;
        pair.delta = preintegrate(slices[k], res.gyro.bias_g, Vec3::Zero(), noise,
                                  keyframes[k + 1].t);
        pair.R_k = r_body[k];
        pair.R_k1 = r_body[k + 1];
        gp_ref.pairs.push_back(std::move(pair));
    }
    GyroSolveConfig refine_cfg;
    refine_cfg.initial_bias = res.gyro.bias_g;
    res.gyro = solve_gyro_bias(gp_ref, refine_cfg);
    res.bias_g = res.gyro.bias_g;
    res.gyro_time_us = std::chrono::duration<double, std::micro>(Clock::now() - t_gyro0).count();

    // Re-integrate at the estimated gyro bias: the first-order correction
    // leaves quadratic bias error, which dominates the accelerometer system
    // on clean data.
    res.deltas.reserve(deltas.size());
    for (size_t k = 0; k < slices.size(); ++k) {
        res.deltas.push_back(preintegrate(slices[k], res.bias_g, Vec3::Zero(), noise,
                                          keyframes[k + 1].t));
    }

    for (size_t k = 1; k + 1 < keyframes.size(); ++k) {
        AccelTriplet trip;
        trip.rbar = {keyframes[k - 1].rotation, keyframes[k].rotation, keyframes[k + 1].rotation};
        trip.pbar = {keyframes[k - 1].position, keyframes[k].position, keyframes[k + 1].position};
        trip.r_body = {r_body[k - 1], r_body[k], r_body[k + 1]};
        trip.delta01 = res.deltas[k - 1];
        trip.delta12 = res.deltas[k];
        trip.t_cb = calib.t_cb;
        res.blocks.push_back(build_residual_block(trip));
    }
    return res;
}

// Heuristic gravity initialization for the iterative baseline: the negative
// mean of the body-rotated specific forces.
inline Vec3 gravity_init_heuristic(const std::vector<KeyframePose>& keyframes,
                                   const std::vector<ImuSample>& samples,
                                   const Calibration& calib,
                                   double gravity_magnitude = kGravityMagnitude) {
    Vec3 acc = Vec3::Zero();
    size_t n = 0;
    size_t kf = 0;
    for (const auto& s : samples) {
        while (kf + 1 < keyframes.size() && keyframes[kf + 1].t <= s.t) ++kf;
        acc += keyframes[kf].rotation * calib.r_cb * s.accel;
        ++n;
    }
    if (n == 0) return Vec3(0.0, 0.0, -gravity_magnitude);
    Vec3 g = -acc / static_cast<double>(n);
    if (g.norm() < 1e-9) return Vec3(0.0, 0.0, -gravity_magnitude);
    return g.normalized() * gravity_magnitude;
}

// ---------------------------------------------------------------------------
// Sweep configuration and reports.

struct SolverRecord {
    std::string solver_id;
    double s = 0.0;
    Vec3 bias_g = Vec3::Zero();
    Vec3 bias_a = Vec3::Zero();
    Vec3 gravity = Vec3::Zero();
    double cost = 0.0;
    double solve_time_us = 0.0;
    bool converged = false;
    // Error metrics vs truth (NaN when truth unavailable).
    double scale_err_pct = std::numeric_limits<double>::quiet_NaN();
    double gravity_angle_err_deg = std::numeric_limits<double>::quiet_NaN();
    double bias_g_err_mag = std::numeric_limits<double>::quiet_NaN();
    double bias_a_err_mag = std::numeric_limits<double>::quiet_NaN();
};

struct AttemptReport {
    double t_attempt = 0.0;
    double window_len = 0.0;
    int num_keyframes = 0;
    bool excitation_ok = true;
    bool failed = false;
    std::string failure_reason;
    double preint_time_us = 0.0;
    std::vector<SolverRecord> solvers;
};

struct SweepSummary {
    int attempts_total = 0;
    int attempts_solved = 0;
    int attempts_discarded = 0;
    int attempts_failed = 0;
    double analytic_time_us_mean = 0.0;
    double multistart_time_us_mean = 0.0;
    double speedup = 0.0;
};

struct RunConfig {
    std::string data_dir;                       // EuRoC sequence dir (mav0 layout)
    std::optional<SynthConfig> synth;           // alternative to data_dir
    std::string pose_source = "groundtruth";    // "groundtruth" or "file:PATH"
    double gt_pose_scale = 1.0;                 // synthetic factor on groundtruth positions
    double keyframe_rate = 4.0;
    double attempt_interval = 0.5;
    std::vector<double> windows = {1.0, 2.0, 5.0, 10.0};
    std::vector<std::string> solvers = {"analytic", "multistart"};
    std::vector<double> scales = {1.0, 4.0, 16.0};
    uint64_t seed = 0;
    std::string out_path;
    std::string format = "csv";
};

// Flat key=value synth description (see README for keys).
inline SynthConfig parse_synth_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("parse_synth_config: cannot open " + path);
    SynthConfig sc;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ParseError(path + ":" + std::to_string(line_no) + ": expected key=value");
        }
        const std::string key = line.substr(0, eq);
        std::istringstream val(line.substr(eq + 1));
        if (key == "duration") val >> sc.duration;
        else if (key == "imu_rate") val >> sc.imu_rate;
        else if (key == "keyframe_rate") val >> sc.keyframe_rate;
        else if (key == "true_scale") val >> sc.true_scale;
        else if (key == "bias_g") val >> sc.true_bias_g.x() >> sc.true_bias_g.y() >> sc.true_bias_g.z();
        else if (key == "bias_a") val >> sc.true_bias_a.x() >> sc.true_bias_a.y() >> sc.true_bias_a.z();
        else if (key == "gravity_dir") val >> sc.gravity_dir.x() >> sc.gravity_dir.y() >> sc.gravity_dir.z();
        else if (key == "kind") {
            std::string kind;
            val >> kind;
            if (kind == "sinusoidal") sc.kind = TrajectoryKind::kSinusoidal;
            else if (kind == "constant-velocity") sc.kind = TrajectoryKind::kConstantVelocity;
            else if (kind == "stationary") sc.kind = TrajectoryKind::kStationary;
            else throw ParseError(path + ": unknown trajectory kind '" + kind + "'");
        } else if (key == "gyro_noise_density") {
            double d;
            val >> d;
            sc.noise.gyro_cov = d * d * Mat3::Identity();
            sc.add_noise = true;
        } else if (key == "accel_noise_density") {
            double d;
            val >> d;
            sc.noise.accel_cov = d * d * Mat3::Identity();
            sc.add_noise = true;
        } else if (key == "seed") {
            val >> sc.seed;
        } else {
            throw ParseError(path + ":" + std::to_string(line_no) + ": unknown key '" + key + "'");
        }
    }
    return sc;
}

struct SequenceData {
    std::vector<ImuSample> samples;
    std::vector<KeyframePose> poses;
    Calibration calib;
    std::optional<SynthTruth> truth;
};

inline SequenceData load_sequence(const RunConfig& cfg) {
    SequenceData data;
    if (cfg.synth) {
        SynthConfig sc = *cfg.synth;
        sc.seed = cfg.seed;
        SynthOutput out = generate(sc);
        data.samples = std::move(out.imu_samples);
        data.poses = std::move(out.keyframes);
        data.truth = out.truth;
        data.calib.r_cb = sc.r_cb;
        data.calib.t_cb = sc.t_cb;
        if (sc.add_noise) {
            data.calib.gyro_noise_density = std::sqrt(sc.noise.gyro_cov(0, 0));
            data.calib.accel_noise_density = std::sqrt(sc.noise.accel_cov(0, 0));
        }
        data.calib.imu_rate = sc.imu_rate;
        return data;
    }
    if (cfg.data_dir.empty()) throw DataError("load_sequence: no data source configured");
    data.samples = load_imu_csv(cfg.data_dir + "/imu0/data.csv");
    const std::string calib_path = cfg.data_dir + "/calibration.txt";
    if (std::ifstream(calib_path).good()) data.calib = load_calibration(calib_path);

    std::vector<GroundTruthState> gt;
    const std::string gt_path = cfg.data_dir + "/state_groundtruth_estimate0/data.csv";
    if (std::ifstream(gt_path).good()) gt = load_groundtruth_csv(gt_path);

    if (cfg.pose_source == "groundtruth") {
        if (gt.empty()) throw DataError("load_sequence: groundtruth poses requested but missing");
        for (const auto& st : gt) {
            KeyframePose p;
            p.t = st.t;
            // Groundtruth is a body pose; map to the visual convention
            // Rbar = R_WB R_CB^T, pbar = (p - Rbar t_CB) / s.
            const Mat3 r_wb = st.orientation.toRotationMatrix();
            p.rotation = r_wb * data.calib.r_cb.transpose();
            p.position = (st.position - p.rotation * data.calib.t_cb) / cfg.gt_pose_scale;
            data.poses.push_back(p);
        }
        SynthTruth truth;
        truth.scale = cfg.gt_pose_scale;
        truth.gravity = Vec3(0.0, 0.0, -kGravityMagnitude);
        if (!gt.empty()) {
            truth.bias_g = gt.front().bias_g;
            truth.bias_a = gt.front().bias_a;
        }
        data.truth = truth;
    } else if (cfg.pose_source.rfind("file:", 0) == 0) {
        data.poses = load_pose_file(cfg.pose_source.substr(5));
    } else {
        throw DataError("load_sequence: unknown pose source '" + cfg.pose_source + "'");
    }
    return data;
}

inline AttemptReport run_attempt(const SequenceData& data, const RunConfig& cfg,
                                 double t_attempt, double window_len) {
    using Clock = std::chrono::steady_clock;
    AttemptReport rep;
    rep.t_attempt = t_attempt;
    rep.window_len = window_len;

    try {
        const auto keyframes =
            select_keyframes(data.poses, cfg.keyframe_rate, t_attempt, t_attempt + window_len);
        rep.num_keyframes = static_cast<int>(keyframes.size());

        const PipelineResult pipe = run_pipeline(keyframes, data.samples, data.calib);
        rep.excitation_ok = pipe.excitation_ok;
        rep.preint_time_us = pipe.preint_time_us;
        if (!pipe.excitation_ok) return rep;

        const auto make_record = [&](const std::string& id, const InitSolution& sol,
                                     double time_us) {
            SolverRecord rec;
            rec.solver_id = id;
            rec.s = sol.s;
            rec.bias_g = pipe.bias_g;
            rec.bias_a = sol.bias_a;
            rec.gravity = sol.gravity;
            rec.cost = sol.cost;
            rec.solve_time_us = time_us;
            rec.converged = sol.converged;
            if (data.truth) {
                rec.scale_err_pct = scale_error_pct(sol.s, data.truth->scale);
                rec.gravity_angle_err_deg = gravity_angle_error_deg(sol.gravity, data.truth->gravity);
                rec.bias_g_err_mag = std::abs(pipe.bias_g.norm() - data.truth->bias_g.norm());
                rec.bias_a_err_mag = std::abs(sol.bias_a.norm() - data.truth->bias_a.norm());
            }
            rep.solvers.push_back(rec);
        };

        IterativeConfig icfg;
        icfg.gravity_init = gravity_init_heuristic(
            keyframes, slice_imu(data.samples, keyframes.front().t, keyframes.back().t + 1e-9),
            data.calib);

        for (const auto& solver : cfg.solvers) {
            const auto t0 = Clock::now();
            if (solver == "analytic") {
                const auto sys = assemble_quadratic(pipe.blocks);
                const auto sol = solve_constrained(sys);
                make_record(solver, sol,
                            std::chrono::duration<double, std::micro>(Clock::now() - t0).count());
            } else if (solver == "iterative") {
                const auto sol = solve_iterative(pipe.blocks, icfg);
                make_record(solver, sol,
                            std::chrono::duration<double, std::micro>(Clock::now() - t0).count());
            } else if (solver == "multistart") {
                const auto sol = solve_multi_start(pipe.blocks, cfg.scales, icfg);
                make_record(solver, sol,
                            std::chrono::duration<double, std::micro>(Clock::now() - t0).count());
            } else {
                throw DataError("run_attempt: unknown solver '" + solver + "'");
            }
        }
    } catch (const std::exception& e) {
        rep.failed = true;
        rep.failure_reason = e.what();
    }
    return rep;
}

inline std::vector<AttemptReport> run_sequence(const RunConfig& cfg) {
    const SequenceData data = load_sequence(cfg);
    if (data.samples.empty() || data.poses.empty()) {
        throw DataError("run_sequence: empty data");
    }
    const double t_begin = std::max(data.samples.front().t, data.poses.front().t);
    const double t_end = std::min(data.samples.back().t, data.poses.back().t);

    std::vector<AttemptReport> reports;
    for (double w : cfg.windows) {
        for (double t = t_begin; t + w <= t_end; t += cfg.attempt_interval) {
            reports.push_back(run_attempt(data, cfg, t, w));
        }
    }
    std::sort(reports.begin(), reports.end(), [](const AttemptReport& a, const AttemptReport& b) {
        if (a.t_attempt != b.t_attempt) return a.t_attempt < b.t_attempt;
        return a.window_len < b.window_len;
    });
    return reports;
}

inline SweepSummary summarize(const std::vector<AttemptReport>& reports) {
    SweepSummary s;
    double analytic_sum = 0.0, multistart_sum = 0.0;
    int analytic_n = 0, multistart_n = 0;
    for (const auto& r : reports) {
        ++s.attempts_total;
        if (r.failed) {
            ++s.attempts_failed;
        } else if (!r.excitation_ok) {
            ++s.attempts_discarded;
        } else {
            ++s.attempts_solved;
        }
        for (const auto& rec : r.solvers) {
            if (rec.solver_id == "analytic") {
                analytic_sum += rec.solve_time_us;
                ++analytic_n;
            } else if (rec.solver_id == "multistart") {
                multistart_sum += rec.solve_time_us;
                ++multistart_n;
            }
        }
    }
    if (analytic_n > 0) s.analytic_time_us_mean = analytic_sum / analytic_n;
    if (multistart_n > 0) s.multistart_time_us_mean = multistart_sum / multistart_n;
    if (s.analytic_time_us_mean > 0.0 && s.multistart_time_us_mean > 0.0) {
        s.speedup = s.multistart_time_us_mean / s.analytic_time_us_mean;
    }
    return s;
}

// ---------------------------------------------------------------------------
// Report serialization. CSV column order is fixed; JSON round-trips exactly.

inline const char* kCsvHeader =
    "t_attempt,window_len,num_keyframes,excitation_ok,failed,solver_id,s,"
    "bias_g_x,bias_g_y,bias_g_z,bias_a_x,bias_a_y,bias_a_z,"
    "gravity_x,gravity_y,gravity_z,cost,solve_time_us,converged,"
    "scale_err_pct,gravity_angle_err_deg,bias_g_err_mag,bias_a_err_mag,preint_time_us";

inline nlohmann::json report_to_json(const AttemptReport& r) {
    nlohmann::json j;
    j["t_attempt"] = r.t_attempt;
    j["window_len"] = r.window_len;
    j["num_keyframes"] = r.num_keyframes;
    j["excitation_ok"] = r.excitation_ok;
    j["failed"] = r.failed;
    j["failure_reason"] = r.failure_reason;
    j["preint_time_us"] = r.preint_time_us;
    j["solvers"] = nlohmann::json::array();
    for (const auto& s : r.solvers) {
        nlohmann::json js;
        js["solver_id"] = s.solver_id;
        js["s"] = s.s;
        js["bias_g"] = {s.bias_g.x(), s.bias_g.y(), s.bias_g.z()};
        js["bias_a"] = {s.bias_a.x(), s.bias_a.y(), s.bias_a.z()};
        js["gravity"] = {s.gravity.x(), s.gravity.y(), s.gravity.z()};
        js["cost"] = s.cost;
        js["solve_time_us"] = s.solve_time_us;
        js["converged"] = s.converged;
        js["scale_err_pct"] = s.scale_err_pct;
        js["gravity_angle_err_deg"] = s.gravity_angle_err_deg;
        js["bias_g_err_mag"] = s.bias_g_err_mag;
        js["bias_a_err_mag"] = s.bias_a_err_mag;
        j["solvers"].push_back(js);
    }
    return j;
}

inline AttemptReport report_from_json(const nlohmann::json& j) {
    AttemptReport r;
    r.t_attempt = j.at("t_attempt").get<double>();
    r.window_len = j.at("window_len").get<double>();
    r.num_keyframes = j.at("num_keyframes").get<int>();
    r.excitation_ok = j.at("excitation_ok").get<bool>();
    r.failed = j.at("failed").get<bool>();
    r.failure_reason = j.at("failure_reason").get<std::string>();
    r.preint_time_us = j.at("preint_time_us").get<double>();
    for (const auto& js : j.at("solvers")) {
        SolverRecord s;
        s.solver_id = js.at("solver_id").get<std::string>();
        s.s = js.at("s").get<double>();
        const auto bg = js.at("bias_g");
        s.bias_g = Vec3(bg[0], bg[1], bg[2]);
        const auto ba = js.at("bias_a");
        s.bias_a = Vec3(ba[0], ba[1], ba[2]);
        const auto g = js.at("gravity");
        s.gravity = Vec3(g[0], g[1], g[2]);
        s.cost = js.at("cost").get<double>();
        s.solve_time_us = js.at("solve_time_us").get<double>();
        s.converged = js.at("converged").get<bool>();
        s.scale_err_pct = js.at("scale_err_pct").get<double>();
        s.gravity_angle_err_deg = js.at("gravity_angle_err_deg").get<double>();
        s.bias_g_err_mag = js.at("bias_g_err_mag").get<double>();
        s.bias_a_err_mag = js.at("bias_a_err_mag").get<double>();
        r.solvers.push_back(s);
    }
    return r;
}

inline void emit_report(const std::vector<AttemptReport>& reports, const std::string& path,
                        const std::string& format, const nlohmann::json& config_echo = {}) {
    std::ofstream out(path);
    if (!out) throw DataError("emit_report: cannot open " + path);
    if (format == "json") {
        nlohmann::json j;
        j["schema_version"] = 1;
        j["config"] = config_echo;
        j["attempts"] = nlohmann::json::array();
        for (const auto& r : reports) j["attempts"].push_back(report_to_json(r));
        out << j.dump(2) << "\n";
    } else if (format == "csv") {
        out << kCsvHeader << "\n";
        char buf[1024];
        for (const auto& r : reports) {
            auto emit_row = [&](const SolverRecord& s) {
                std::snprintf(buf, sizeof(buf),
                              "%.9f,%.3f,%d,%d,%d,%s,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,"
                              "%.17g,%.17g,%.17g,%.17g,%.3f,%d,%.17g,%.17g,%.17g,%.17g,%.3f\n",
                              r.t_attempt, r.window_len, r.num_keyframes, int(r.excitation_ok),
                              int(r.failed), s.solver_id.c_str(), s.s, s.bias_g.x(), s.bias_g.y(),
                              s.bias_g.z(), s.bias_a.x(), s.bias_a.y(), s.bias_a.z(), s.gravity.x(),
                              s.gravity.y(), s.gravity.z(), s.cost, s.solve_time_us,
                              int(s.converged), s.scale_err_pct, s.gravity_angle_err_deg,
                              s.bias_g_err_mag, s.bias_a_err_mag, r.preint_time_us);
                out << buf;
            };
            if (r.solvers.empty()) {
                SolverRecord none;
                none.solver_id = r.failed ? "failed" : "discarded";
                emit_row(none);
            } else {
                for (const auto& s : r.solvers) emit_row(s);
            }
        }
    } else {
        throw DataError("emit_report: unknown format '" + format + "'");
    }
}

inline std::vector<AttemptReport> load_report_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("load_report_json: cannot open " + path);
    nlohmann::json j;
    in >> j;
    std::vector<AttemptReport> reports;
    for (const auto& ja : j.at("attempts")) reports.push_back(report_from_json(ja));
    return reports;
}

}  // namespace vinit
