#pragma once

#include "vinit/imu_types.hpp"
#include "vinit/so3.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace vinit {

struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace detail {

inline std::vector<double> parse_csv_row(const std::string& line, size_t expected,
                                         const std::string& path, int line_no) {
    std::vector<double> out;
    out.reserve(expected);
    std::stringstream ss(line);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        try {
            size_t pos = 0;
            out.push_back(std::stod(tok, &pos));
        } catch (const std::exception&) {
            throw ParseError(path + ":" + std::to_string(line_no) + ": malformed field '" + tok + "'");
        }
    }
    if (out.size() != expected) {
        throw ParseError(path + ":" + std::to_string(line_no) + ": expected " +
                         std::to_string(expected) + " columns, got " + std::to_string(out.size()));
    }
    return out;
}

inline bool is_comment_or_empty(const std::string& line) {
    return line.empty() || line[0] == '#' || line.rfind("timestamp", 0) == 0;
}

}  // namespace detail

// EuRoC imu0/data.csv: timestamp_ns,w_x,w_y,w_z,a_x,a_y,a_z
inline std::vector<ImuSample> load_imu_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("load_imu_csv: cannot open " + path);
    std::vector<ImuSample> samples;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (detail::is_comment_or_empty(line)) continue;
        const auto v = detail::parse_csv_row(line, 7, path, line_no);
        ImuSample s;
        s.t = v[0] * 1e-9;
        s.gyro = Vec3(v[1], v[2], v[3]);
        s.accel = Vec3(v[4], v[5], v[6]);
        if (!samples.empty() && !(s.t > samples.back().t)) {
            throw DataError(path + ":" + std::to_string(line_no) + ": non-monotone timestamp");
        }
        samples.push_back(s);
    }
    return samples;
}

// EuRoC state_groundtruth_estimate0/data.csv:
// timestamp_ns,p(3),q_wxyz(4),v(3),bw(3),ba(3)
inline std::vector<GroundTruthState> load_groundtruth_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("load_groundtruth_csv: cannot open " + path);
    std::vector<GroundTruthState> states;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (detail::is_comment_or_empty(line)) continue;
        const auto v = detail::parse_csv_row(line, 17, path, line_no);
        GroundTruthState st;
        st.t = v[0] * 1e-9;
        st.position = Vec3(v[1], v[2], v[3]);
        Eigen::Quaterniond q(v[4], v[5], v[6], v[7]);
        if (std::abs(q.norm() - 1.0) > 1e-6) {
            throw DataError(path + ":" + std::to_string(line_no) + ": non-unit quaternion");
        }
        st.orientation = q.normalized();
        st.velocity = Vec3(v[8], v[9], v[10]);
        st.bias_g = Vec3(v[11], v[12], v[13]);
        st.bias_a = Vec3(v[14], v[15], v[16]);
        if (!states.empty() && !(st.t > states.back().t)) {
            throw DataError(path + ":" + std::to_string(line_no) + ": non-monotone timestamp");
        }
        states.push_back(st);
    }
    return states;
}

// TUM-style pose file: timestamp_s p_x p_y p_z q_x q_y q_z q_w
inline std::vector<KeyframePose> load_pose_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("load_pose_file: cannot open " + path);
    std::vector<KeyframePose> poses;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ss(line);
        double t, px, py, pz, qx, qy, qz, qw;
        if (!(ss >> t >> px >> py >> pz >> qx >> qy >> qz >> qw)) {
            throw ParseError(path + ":" + std::to_string(line_no) + ": malformed pose row");
        }
        KeyframePose p;
        p.t = t;
        p.position = Vec3(px, py, pz);
        p.rotation = quat_to_rot(qw, qx, qy, qz);
        if (!poses.empty() && !(p.t > poses.back().t)) {
            throw DataError(path + ":" + std::to_string(line_no) + ": non-monotone timestamp");
        }
        poses.push_back(p);
    }
    return poses;
}

// Flat key-value calibration file. Keys: r_cb_quat_wxyz, t_cb,
// gyro_noise_density, accel_noise_density, imu_rate.
inline Calibration load_calibration(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("load_calibration: cannot open " + path);
    Calibration cal;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ss(line);
        std::string key;
        ss >> key;
        if (key == "r_cb_quat_wxyz") {
            double w, x, y, z;
            if (!(ss >> w >> x >> y >> z)) throw ParseError(path + ": bad r_cb_quat_wxyz");
            cal.r_cb = quat_to_rot(w, x, y, z);
        } else if (key == "t_cb") {
            if (!(ss >> cal.t_cb.x() >> cal.t_cb.y() >> cal.t_cb.z()))
                throw ParseError(path + ": bad t_cb");
        } else if (key == "gyro_noise_density") {
            ss >> cal.gyro_noise_density;
        } else if (key == "accel_noise_density") {
            ss >> cal.accel_noise_density;
        } else if (key == "imu_rate") {
            ss >> cal.imu_rate;
        } else {
            throw ParseError(path + ":" + std::to_string(line_no) + ": unknown key '" + key + "'");
        }
    }
    return cal;
}

// Nearest-available pose to each tick t0 + k/rate over [t0, t1];
// count = floor((t1-t0)*rate) + 1. A gap over 0.5/rate around a tick fails.
inline std::vector<KeyframePose> select_keyframes(const std::vector<KeyframePose>& poses,
                                                  double rate, double t0, double t1) {
    if (!(rate > 0.0)) throw std::invalid_argument("select_keyframes: rate must be positive");
    if (poses.empty()) throw DataError("select_keyframes: empty pose source");
    const auto count = static_cast<size_t>(std::floor((t1 - t0) * rate + 1e-9)) + 1;
    std::vector<KeyframePose> out;
    out.reserve(count);
    size_t idx = 0;
    for (size_t k = 0; k < count; ++k) {
        const double tick = t0 + static_cast<double>(k) / rate;
        while (idx + 1 < poses.size() &&
               std::abs(poses[idx + 1].t - tick) <= std::abs(poses[idx].t - tick)) {
            ++idx;
        }
        if (std::abs(poses[idx].t - tick) > 0.5 / rate) {
            throw DataError("select_keyframes: no pose within half a period of tick t=" +
                            std::to_string(tick));
        }
        out.push_back(poses[idx]);
    }
    return out;
}

// Samples with t in [t_start, t_end).
inline std::vector<ImuSample> slice_imu(const std::vector<ImuSample>& samples,
                                        double t_start, double t_end) {
    if (!(t_start < t_end)) throw std::invalid_argument("slice_imu: t_start must precede t_end");
    std::vector<ImuSample> out;
    for (const auto& s : samples) {
        if (s.t >= t_start && s.t < t_end) out.push_back(s);
    }
    if (out.empty()) throw DataError("slice_imu: empty slice");
    return out;
}

// Writers matching the readers above (used for synth export round trips).
inline void write_imu_csv(const std::string& path, const std::vector<ImuSample>& samples) {
    std::ofstream out(path);
    if (!out) throw DataError("write_imu_csv: cannot open " + path);
    out << "#timestamp [ns],w_x,w_y,w_z,a_x,a_y,a_z\n";
    char buf[256];
    for (const auto& s : samples) {
        std::snprintf(buf, sizeof(buf), "%lld,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                      static_cast<long long>(std::llround(s.t * 1e9)), s.gyro.x(), s.gyro.y(),
                      s.gyro.z(), s.accel.x(), s.accel.y(), s.accel.z());
        out << buf;
    }
}

inline void write_pose_file(const std::string& path, const std::vector<KeyframePose>& poses) {
    std::ofstream out(path);
    if (!out) throw DataError("write_pose_file: cannot open " + path);
    out << "# timestamp_s p_x p_y p_z q_x q_y q_z q_w\n";
    char buf[320];
    for (const auto& p : poses) {
        const auto q = rot_to_quat(p.rotation);
        std::snprintf(buf, sizeof(buf), "%.9f %.17g %.17g %.17g %.17g %.17g %.17g %.17g\n", p.t,
                      p.position.x(), p.position.y(), p.position.z(), q.x(), q.y(), q.z(), q.w());
        out << buf;
    }
}

}  // namespace vinit
