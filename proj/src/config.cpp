#include "raptor/config.hpp"

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace raptor {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

double parse_double(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw IoError("config: key '" + key + "' expects a number, got '" + value + "'");
    }
}

int parse_int(const std::string& key, const std::string& value) {
    int v = 0;
    const auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
    if (ec != std::errc() || p != value.data() + value.size())
        throw IoError("config: key '" + key + "' expects an integer, got '" + value + "'");
    return v;
}

std::vector<int> parse_int_list(const std::string& key, const std::string& value) {
    std::vector<int> out;
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(parse_int(key, trim(item)));
    if (out.empty()) throw IoError("config: key '" + key + "' expects a comma list of integers");
    return out;
}

std::string join_ints(const std::vector<int>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(v[i]);
    }
    return s;
}

std::string format_double(double v) {
    std::ostringstream ss;
    ss << v;
    return ss.str();
}

} // namespace

const std::vector<std::string>& valid_config_keys() {
    static const std::vector<std::string> keys = {
        "metric",          "alpha",          "c",
        "sigma",           "num_bins",       "patch_size",
        "patch_stride",    "min_variance",   "trunc_dims",
        "num_time_steps",  "pyramid_levels", "max_iterations",
        "step_size",       "momentum",       "convergence_tolerance",
        "regularizer_weight",
    };
    return keys;
}

void apply_config_entry(RegistrationConfig& cfg, const std::string& key, const std::string& value) {
    if (key == "metric") {
        if (value == "raptor") cfg.metric = MetricKind::raptor;
        else if (value == "ssd") cfg.metric = MetricKind::ssd;
        else throw IoError("config: metric must be 'raptor' or 'ssd', got '" + value + "'");
    } else if (key == "alpha") {
        cfg.alpha = parse_double(key, value);
    } else if (key == "c") {
        cfg.c = parse_int(key, value);
    } else if (key == "sigma") {
        cfg.sigma = parse_double(key, value);
    } else if (key == "num_bins") {
        cfg.raptor.num_bins = parse_int(key, value);
    } else if (key == "patch_size") {
        cfg.raptor.patch_size = parse_int(key, value);
    } else if (key == "patch_stride") {
        cfg.raptor.patch_stride = parse_int(key, value);
    } else if (key == "min_variance") {
        cfg.raptor.min_variance = parse_double(key, value);
    } else if (key == "trunc_dims") {
        const auto v = parse_int_list(key, value);
        if (v.size() == 1) cfg.trunc_dims = {v[0], v[0], v[0]};
        else if (v.size() == 3) cfg.trunc_dims = {v[0], v[1], v[2]};
        else throw IoError("config: trunc_dims expects 1 or 3 integers");
    } else if (key == "num_time_steps") {
        cfg.num_time_steps = parse_int(key, value);
    } else if (key == "pyramid_levels") {
        cfg.pyramid_levels = parse_int_list(key, value);
    } else if (key == "max_iterations") {
        cfg.max_iterations = parse_int_list(key, value);
    } else if (key == "step_size") {
        cfg.step_size = parse_double(key, value);
    } else if (key == "momentum") {
        cfg.momentum = parse_double(key, value);
    } else if (key == "convergence_tolerance") {
        cfg.convergence_tolerance = parse_double(key, value);
    } else if (key == "regularizer_weight") {
        cfg.regularizer_weight = parse_double(key, value);
    } else {
        std::string keys;
        for (const auto& k : valid_config_keys()) {
            if (!keys.empty()) keys += ", ";
            keys += k;
        }
        throw IoError("config: unknown key '" + key + "'; valid keys are: " + keys);
    }
}

void load_config_file(RegistrationConfig& cfg, const std::string& path) {
    if (!std::filesystem::exists(path)) throw FileNotFoundError(path);
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file " + path);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw IoError(path + ":" + std::to_string(lineno) + ": expected key = value");
        apply_config_entry(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
}

std::vector<std::pair<std::string, std::string>> config_entries(const RegistrationConfig& cfg) {
    return {
        {"metric", cfg.metric == MetricKind::raptor ? "raptor" : "ssd"},
        {"alpha", format_double(cfg.alpha)},
        {"c", std::to_string(cfg.c)},
        {"sigma", format_double(cfg.sigma)},
        {"num_bins", std::to_string(cfg.raptor.num_bins)},
        {"patch_size", std::to_string(cfg.raptor.patch_size)},
        {"patch_stride", std::to_string(cfg.raptor.patch_stride)},
        {"min_variance", format_double(cfg.raptor.min_variance)},
        {"trunc_dims", join_ints({cfg.trunc_dims[0], cfg.trunc_dims[1], cfg.trunc_dims[2]})},
        {"num_time_steps", std::to_string(cfg.num_time_steps)},
        {"pyramid_levels", join_ints(cfg.pyramid_levels)},
        {"max_iterations", join_ints(cfg.max_iterations)},
        {"step_size", format_double(cfg.step_size)},
        {"momentum", format_double(cfg.momentum)},
        {"convergence_tolerance", format_double(cfg.convergence_tolerance)},
        {"regularizer_weight", format_double(cfg.regularizer_weight)},
    };
}

} // namespace raptor
