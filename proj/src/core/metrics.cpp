#include "core/metrics.hpp"

#include <charconv>
#include <cmath>

#include <json.hpp>

#include "core/error.hpp"

namespace sucmpc {

namespace {

// shortest round-trip decimal form; locale-free and deterministic
std::string format_double(double v) {
    char buf[32];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, end);
}

} // namespace

std::string SuctionCurve::to_csv() const {
    std::string out = "step,fraction\n";
    for (const auto& [step, fraction] : samples) {
        out += std::to_string(step);
        out += ',';
        out += format_double(fraction);
        out += '\n';
    }
    return out;
}

SuctionCurve record_curve(std::span<const int> below_goal_counts, int t0) {
    SuctionCurve curve;
    curve.t0 = t0;
    curve.tf = t0 + static_cast<int>(below_goal_counts.size()) - 1;
    if (below_goal_counts.empty()) return curve;
    const double ref = below_goal_counts.front() > 0 ? below_goal_counts.front() : 1.0;
    curve.samples.reserve(below_goal_counts.size());
    for (size_t k = 0; k < below_goal_counts.size(); ++k)
        curve.samples.emplace_back(t0 + static_cast<int>(k), below_goal_counts[k] / ref);
    return curve;
}

std::optional<int> convergence_time(const SuctionCurve& curve, double percent) {
    if (percent <= 0.0 || percent >= 100.0)
        throw ConfigError("convergence_time: percent must be in (0, 100)");
    if (curve.samples.empty()) return std::nullopt;
    const double threshold = curve.samples.front().second * (100.0 - percent) / 100.0;
    for (const auto& [step, fraction] : curve.samples)
        if (fraction <= threshold) return step - curve.t0;
    return std::nullopt;
}

double trajectory_length(std::span<const Vec3> controls) {
    double len = 0.0;
    for (size_t i = 0; i + 1 < controls.size(); ++i) len += norm(controls[i + 1] - controls[i]);
    return len;
}

std::string RunResult::to_json() const {
    nlohmann::ordered_json j;
    j["policy"] = policy;
    j["seed"] = seed;
    j["config_hash"] = config_hash;
    j["residual"] = residual;
    j["tau50"] = tau50 ? nlohmann::ordered_json(*tau50) : nlohmann::ordered_json(nullptr);
    j["tau60"] = tau60 ? nlohmann::ordered_json(*tau60) : nlohmann::ordered_json(nullptr);
    j["tau90"] = tau90 ? nlohmann::ordered_json(*tau90) : nlohmann::ordered_json(nullptr);
    j["trajectory_length_cm"] = trajectory_length_cm;
    j["emission_ongoing"] = emission_ongoing;
    j["reference_count"] = reference_count;
    j["t0"] = curve.t0;
    j["tf"] = curve.tf;
    return j.dump(2) + "\n";
}

std::string trajectory_to_csv(std::span<const Vec3> controls, int t0) {
    std::string out = "step,x,y,z\n";
    for (size_t k = 0; k < controls.size(); ++k) {
        out += std::to_string(t0 + static_cast<int>(k));
        out += ',';
        out += format_double(controls[k].x);
        out += ',';
        out += format_double(controls[k].y);
        out += ',';
        out += format_double(controls[k].z);
        out += '\n';
    }
    return out;
}

} // namespace sucmpc
