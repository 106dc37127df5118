#include "sigman/config.hpp"

#include "sigman/error.hpp"

#include <fmt/format.h>

#include <fstream>
#include <map>
#include <optional>
#include <set>

namespace sigman {

using nlohmann::json;

std::string to_string(Convention c) { return c == Convention::Projection ? "projection" : "trace"; }

Convention parse_convention(const std::string& s) {
    if (s == "projection") return Convention::Projection;
    if (s == "trace") return Convention::Trace;
    throw ParameterError("unknown convention '" + s + "' (expected projection|trace)");
}

ChannelSpec ConvergenceConfig::channel() const {
    ChannelSpec spec;
    spec.hamiltonian = 0.5 * h_y * pauli_y();
    if (gamma_phi > 0.0) spec.lindblad.push_back({pauli_z(), gamma_phi});
    if (gamma_pump > 0.0) spec.lindblad.push_back({sigma_plus(), gamma_pump});
    return spec;
}

namespace {

// Consumes keys of one JSON object; whatever is left over is an unknown key.
class Section {
public:
    Section(const json& obj, std::string path) : path_(std::move(path)) {
        if (!obj.is_object()) throw ParameterError(fmt::format("{} must be an object", where()));
        for (const auto& [k, v] : obj.items()) left_.emplace(k, v);
    }

    template <class T>
    void get(const std::string& key, T& out) {
        auto it = left_.find(key);
        if (it == left_.end()) return;
        try {
            out = it->second.template get<T>();
        } catch (const json::exception& e) {
            throw ParameterError(fmt::format("{}: wrong type ({})", field(key), e.what()));
        }
        left_.erase(it);
    }

    bool has(const std::string& key) const { return left_.count(key) != 0; }

    std::optional<json> take(const std::string& key) {
        auto it = left_.find(key);
        if (it == left_.end()) return std::nullopt;
        json v = it->second;
        left_.erase(it);
        return v;
    }

    void finish() const {
        if (left_.empty()) return;
        std::string keys;
        for (const auto& [k, v] : left_) keys += (keys.empty() ? "" : ", ") + field(k);
        throw ParameterError("unknown config key(s): " + keys);
    }

    std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

private:
    std::string where() const { return path_.empty() ? "config" : path_; }

    std::string path_;
    std::map<std::string, json> left_;
};

void read_sequence(Section& s, SequenceSpec& q) {
    s.get("drive_mhz", q.drive_mhz);
    s.get("tau1_us", q.tau1_us);
    s.get("max_order", q.max_order);
    s.get("dt_us", q.dt_us);
    s.get("n_traj", q.n_traj);
    s.get("n_shots", q.n_shots);
    s.get("sigma_meas", q.sigma_meas);
}

void read_noise(Section& s, NoiseSpec& n) {
    s.get("b_mhz", n.b_mhz);
    s.get("tau_c_us", n.tau_c_us);
    s.get("gamma_pump_mhz", n.gamma_pump_mhz);
    s.get("gamma_phi_mhz", n.gamma_phi_mhz);
}

const std::set<std::string> kSequenceKeys{"drive_mhz", "tau1_us", "max_order", "dt_us",
                                          "n_traj",    "n_shots", "sigma_meas"};
const std::set<std::string> kNoiseKeys{"b_mhz", "tau_c_us", "gamma_pump_mhz", "gamma_phi_mhz"};

void require(bool ok, const std::string& msg) {
    if (!ok) throw ParameterError(msg);
}

}  // namespace

RunConfig config_from_json(const json& j) {
    RunConfig c;
    Section top(j, "");
    top.get("scenario", c.scenario);
    top.get("name", c.name);
    top.get("master_seed", c.master_seed);
    top.get("workers", c.workers);
    top.get("output_dir", c.output_dir);

    // Flat shorthand for sequence and noise fields.
    for (const auto& key : kSequenceKeys) {
        if (top.has(key) && j.contains("sequence") && j["sequence"].contains(key)) {
            throw ParameterError(fmt::format("{} given both at top level and as sequence.{}", key, key));
        }
    }
    for (const auto& key : kNoiseKeys) {
        if (top.has(key) && j.contains("noise") && j["noise"].contains(key)) {
            throw ParameterError(fmt::format("{} given both at top level and as noise.{}", key, key));
        }
    }
    read_sequence(top, c.sequence);
    read_noise(top, c.sequence.noise);

    if (auto v = top.take("sequence")) {
        Section s(*v, "sequence");
        read_sequence(s, c.sequence);
        s.finish();
    }
    if (auto v = top.take("noise")) {
        Section s(*v, "noise");
        read_noise(s, c.sequence.noise);
        s.finish();
    }
    if (auto v = top.take("analysis")) {
        Section s(*v, "analysis");
        auto& a = c.analysis;
        s.get("t2_ref_us", a.t2_ref_us);
        s.get("duration_us", a.duration_us);
        s.get("fit_window_us", a.fit_window_us);
        s.get("fit_points", a.fit_points);
        s.get("drive_grid_mhz", a.drive_grid_mhz);
        s.get("repeats", a.repeats);
        std::string model;
        s.get("sigma_model", model);
        if (!model.empty()) {
            try {
                a.sigma_model = parse_sigma_model(model);
            } catch (const ParameterError& e) {
                throw ParameterError(fmt::format("analysis.sigma_model: {}", e.what()));
            }
        }
        s.get("accerr_points", a.accerr_points);
        s.get("t_norm_max", a.t_norm_max);
        s.get("purity_max_dp", a.purity_max_dp);
        s.get("purity_t_max_us", a.purity_t_max_us);
        s.get("purity_points", a.purity_points);
        s.get("weight_orders", a.weight_orders);
        s.finish();
    }
    if (auto v = top.take("convergence")) {
        Section s(*v, "convergence");
        auto& cv = c.convergence;
        s.get("orders", cv.orders);
        s.get("x_min", cv.x_min);
        s.get("x_max", cv.x_max);
        s.get("x_points", cv.x_points);
        s.get("h_y", cv.h_y);
        s.get("gamma_phi", cv.gamma_phi);
        s.get("gamma_pump", cv.gamma_pump);
        std::string conv;
        s.get("convention", conv);
        if (!conv.empty()) {
            try {
                cv.convention = parse_convention(conv);
            } catch (const ParameterError& e) {
                throw ParameterError(fmt::format("convergence.convention: {}", e.what()));
            }
        }
        s.finish();
    }
    top.finish();
    c.validate();
    return c;
}

void RunConfig::validate() const {
    require(!scenario.empty(), "scenario: required");
    bool known = false;
    for (const auto& s : scenarios()) known = known || s == scenario;
    require(known, fmt::format("scenario: unknown value '{}'", scenario));
    require(workers >= 1, "workers: must be >= 1");
    require(!output_dir.empty(), "output_dir: must not be empty");

    if (scenario == "weights") {
        for (int n : analysis.weight_orders) {
            require(n >= 1 && n <= kMaxSigmaOrder,
                    fmt::format("analysis.weight_orders: order {} outside [1, {}]", n, kMaxSigmaOrder));
        }
        return;
    }
    if (scenario == "convergence") {
        const auto& cv = convergence;
        for (int n : cv.orders) {
            require(n >= 1 && n <= kMaxSigmaOrder,
                    fmt::format("convergence.orders: order {} outside [1, {}]", n, kMaxSigmaOrder));
        }
        require(cv.x_min >= 1e-3 && cv.x_max <= 0.3 && cv.x_min < cv.x_max,
                "convergence.x_min/convergence.x_max: need 1e-3 <= x_min < x_max <= 0.3");
        require(cv.x_points >= 6, "convergence.x_points: must be >= 6");
        require(cv.h_y != 0.0, "convergence.h_y: must be nonzero");
        require(cv.gamma_phi >= 0.0 && cv.gamma_pump >= 0.0,
                "convergence.gamma_phi/convergence.gamma_pump: must be >= 0");
        return;
    }

    sequence.validate();
    const auto& a = analysis;
    require(a.t2_ref_us > 0.0, "analysis.t2_ref_us: must be > 0");
    require(a.duration_us >= 0.0, "analysis.duration_us: must be >= 0");
    require(a.fit_window_us > 0.0, "analysis.fit_window_us: must be > 0");
    require(a.fit_points >= 6, "analysis.fit_points: must be >= 6");
    require(!a.drive_grid_mhz.empty(), "analysis.drive_grid_mhz: must not be empty");
    for (double d : a.drive_grid_mhz) {
        require(d >= 0.0, "analysis.drive_grid_mhz: drives must be >= 0");
        if (d > 0.0) {
            require(sequence.dt_us <= 1.0 / (20.0 * d) * (1.0 + 1e-12),
                    fmt::format("sequence.dt_us={} exceeds 1/(20 x analysis.drive_grid_mhz entry {})",
                                sequence.dt_us, d));
        }
    }
    require(a.repeats >= 1, "analysis.repeats: must be >= 1");
    if (scenario == "sweep") require(a.repeats >= 5, "analysis.repeats: sweep needs >= 5");
    require(a.accerr_points >= 1, "analysis.accerr_points: must be >= 1");
    require(a.t_norm_max > 0.0, "analysis.t_norm_max: must be > 0");
    require(a.purity_max_dp > 0.0, "analysis.purity_max_dp: must be > 0");
    require(a.purity_t_max_us > 0.0, "analysis.purity_t_max_us: must be > 0");
    require(a.purity_points >= 1, "analysis.purity_points: must be >= 1");
}

RunConfig parse_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParameterError(fmt::format("cannot open config file '{}'", path.string()));
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ParameterError(fmt::format("{}: malformed JSON ({})", path.string(), e.what()));
    }
    return config_from_json(j);
}

json to_json(const RunConfig& c) {
    const auto& q = c.sequence;
    const auto& n = q.noise;
    const auto& a = c.analysis;
    const auto& cv = c.convergence;
    json j;
    j["scenario"] = c.scenario;
    j["name"] = c.name;
    j["master_seed"] = c.master_seed;
    j["workers"] = c.workers;
    j["output_dir"] = c.output_dir;
    j["sequence"] = {{"drive_mhz", q.drive_mhz}, {"tau1_us", q.tau1_us},   {"max_order", q.max_order},
                     {"dt_us", q.dt_us},         {"n_traj", q.n_traj},     {"n_shots", q.n_shots},
                     {"sigma_meas", q.sigma_meas}};
    j["noise"] = {{"b_mhz", n.b_mhz},
                  {"tau_c_us", n.tau_c_us},
                  {"gamma_pump_mhz", n.gamma_pump_mhz},
                  {"gamma_phi_mhz", n.gamma_phi_mhz}};
    j["analysis"] = {{"t2_ref_us", a.t2_ref_us},
                     {"duration_us", a.duration_us},
                     {"fit_window_us", a.fit_window_us},
                     {"fit_points", a.fit_points},
                     {"drive_grid_mhz", a.drive_grid_mhz},
                     {"repeats", a.repeats},
                     {"sigma_model", to_string(a.sigma_model)},
                     {"accerr_points", a.accerr_points},
                     {"t_norm_max", a.t_norm_max},
                     {"purity_max_dp", a.purity_max_dp},
                     {"purity_t_max_us", a.purity_t_max_us},
                     {"purity_points", a.purity_points},
                     {"weight_orders", a.weight_orders}};
    j["convergence"] = {{"orders", cv.orders},       {"x_min", cv.x_min},
                        {"x_max", cv.x_max},         {"x_points", cv.x_points},
                        {"h_y", cv.h_y},             {"gamma_phi", cv.gamma_phi},
                        {"gamma_pump", cv.gamma_pump}, {"convention", to_string(cv.convention)}};
    return j;
}

}  // namespace sigman
