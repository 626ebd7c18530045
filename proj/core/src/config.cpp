#include "mixlab/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace mixlab {
namespace {

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

double parse_number(const std::string& section, const std::string& key,
                    const std::string& value) {
    std::size_t pos = 0;
    double v = 0.0;
    try {
        v = std::stod(value, &pos);
    } catch (const std::exception&) {
        throw ConfigError("[" + section + "] " + key + ": not a number: '" + value + "'");
    }
    if (pos != value.size())
        throw ConfigError("[" + section + "] " + key + ": trailing junk in '" + value + "'");
    return v;
}

int parse_int(const std::string& section, const std::string& key, const std::string& value) {
    double v = parse_number(section, key, value);
    int i = static_cast<int>(v);
    if (static_cast<double>(i) != v)
        throw ConfigError("[" + section + "] " + key + ": expected an integer, got '" + value + "'");
    return i;
}

bool parse_bool(const std::string& section, const std::string& key, const std::string& value) {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    throw ConfigError("[" + section + "] " + key + ": expected true/false, got '" + value + "'");
}

std::vector<double> parse_list(const std::string& section, const std::string& key,
                               const std::string& value) {
    std::vector<double> out;
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty())
            throw ConfigError("[" + section + "] " + key + ": empty list entry");
        out.push_back(parse_number(section, key, item));
    }
    if (out.empty()) throw ConfigError("[" + section + "] " + key + ": empty list");
    return out;
}

const std::set<std::string> kCommands = {"simulate", "reduce-check", "mixing", "certify",
                                         "pushforward-check"};

} // namespace

RunConfig parse_config_text(const std::string& text) {
    RunConfig cfg;
    std::istringstream is(text);
    std::string raw;
    std::string section;
    int line_no = 0;
    while (std::getline(is, raw)) {
        ++line_no;
        std::string line = raw;
        std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::size_t semi = line.find(';');
        if (semi != std::string::npos) line.erase(semi);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError("line " + std::to_string(line_no) + ": malformed section header");
            section = trim(line.substr(1, line.size() - 2));
            if (section != "run" && section != "system" && section != "kernel" &&
                section != "noise" && section != "grid" && section != "mixing" &&
                section != "reduce" && section != "certify")
                throw ConfigError("unknown section [" + section + "]");
            continue;
        }
        std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty() || value.empty())
            throw ConfigError("line " + std::to_string(line_no) + ": empty key or value");
        if (section.empty())
            throw ConfigError("line " + std::to_string(line_no) + ": key outside any section");

        if (section == "run") {
            if (key == "command") {
                if (!kCommands.count(value))
                    throw ConfigError("[run] command: unknown command '" + value + "'");
                cfg.command = value;
            } else if (key == "seed") {
                double v = parse_number(section, key, value);
                if (v < 0) throw ConfigError("[run] seed: must be nonnegative");
                cfg.seed = static_cast<std::uint64_t>(v);
                cfg.seed_set = true;
            } else if (key == "out") {
                cfg.out_dir = value;
            } else if (key == "threads") {
                cfg.threads = parse_int(section, key, value);
            } else {
                throw ConfigError("[run]: unknown key '" + key + "'");
            }
        } else if (section == "system") {
            if (key == "name") cfg.system_name = value;
            else cfg.system_params[key] = parse_number(section, key, value);
        } else if (section == "kernel") {
            if (key == "name") cfg.kernel_name = value;
            else cfg.kernel_params[key] = parse_number(section, key, value);
        } else if (section == "noise") {
            if (key == "mode") {
                if (value == "markov") cfg.stationary = false;
                else if (value == "stationary") cfg.stationary = true;
                else throw ConfigError("[noise] mode: expected markov or stationary");
            } else if (key == "memory") {
                cfg.memory_m = parse_int(section, key, value);
            } else if (key == "iota") {
                cfg.iota = parse_number(section, key, value);
            } else {
                throw ConfigError("[noise]: unknown key '" + key + "'");
            }
        } else if (section == "grid") {
            if (key == "cells") cfg.cells = parse_int(section, key, value);
            else if (key == "noise_cells") cfg.noise_cells = parse_int(section, key, value);
            else if (key == "product_cells") cfg.product_cells = parse_int(section, key, value);
            else throw ConfigError("[grid]: unknown key '" + key + "'");
        } else if (section == "mixing") {
            if (key == "ensemble") cfg.ensemble = parse_int(section, key, value);
            else if (key == "horizon") cfg.horizon = parse_int(section, key, value);
            else if (key == "burn_in") cfg.burn_in = parse_int(section, key, value);
            else if (key == "u0") cfg.u0 = parse_list(section, key, value);
            else throw ConfigError("[mixing]: unknown key '" + key + "'");
        } else if (section == "reduce") {
            if (key == "horizon") cfg.law_horizon = parse_int(section, key, value);
            else if (key == "ensemble") cfg.law_ensemble = parse_int(section, key, value);
            else if (key == "cells") cfg.law_cells = parse_int(section, key, value);
            else if (key == "mutate") cfg.mutate = parse_bool(section, key, value);
            else throw ConfigError("[reduce]: unknown key '" + key + "'");
        } else if (section == "certify") {
            if (key == "radius") cfg.radius = parse_number(section, key, value);
            else if (key == "delta") cfg.delta = parse_number(section, key, value);
            else if (key == "budget") cfg.budget = parse_int(section, key, value);
            else if (key == "pairs") cfg.pairs = parse_int(section, key, value);
            else if (key == "mc_trials") cfg.mc_trials = parse_int(section, key, value);
            else if (key == "mc_probes") cfg.mc_probes = parse_int(section, key, value);
            else if (key == "mc_samples") cfg.mc_samples = parse_int(section, key, value);
            else throw ConfigError("[certify]: unknown key '" + key + "'");
        }
    }
    if (cfg.command.empty()) throw ConfigError("[run] command is required");
    if (!cfg.seed_set) throw ConfigError("[run] seed is required (no wall-clock default)");
    if (cfg.ensemble < 1 || cfg.law_ensemble < 1) throw ConfigError("ensemble must be positive");
    if (cfg.cells < 2 || cfg.noise_cells < 2 || cfg.product_cells < 2)
        throw ConfigError("grid resolutions must be at least 2");
    if (cfg.horizon < 1 || cfg.law_horizon < 1) throw ConfigError("horizon must be positive");
    if (cfg.law_horizon > 3) throw ConfigError("[reduce] horizon: joint grids above k = 3 are too large");
    if (cfg.memory_m < 1) throw ConfigError("[noise] memory must be positive");
    if (cfg.iota <= 1.0) throw ConfigError("[noise] iota must exceed 1");
    if (cfg.radius <= 0 || cfg.delta <= 0) throw ConfigError("[certify] radius and delta must be positive");
    return cfg;
}

RunConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

std::string config_to_text(const RunConfig& cfg) {
    std::ostringstream os;
    os.precision(17);
    os << "[run]\n";
    os << "command = " << cfg.command << "\n";
    os << "seed = " << cfg.seed << "\n";
    os << "out = " << cfg.out_dir << "\n";
    os << "threads = " << cfg.threads << "\n";
    os << "[system]\n";
    os << "name = " << cfg.system_name << "\n";
    for (const auto& [k, v] : cfg.system_params) os << k << " = " << v << "\n";
    os << "[kernel]\n";
    os << "name = " << cfg.kernel_name << "\n";
    for (const auto& [k, v] : cfg.kernel_params) os << k << " = " << v << "\n";
    os << "[noise]\n";
    os << "mode = " << (cfg.stationary ? "stationary" : "markov") << "\n";
    os << "memory = " << cfg.memory_m << "\n";
    os << "iota = " << cfg.iota << "\n";
    os << "[grid]\n";
    os << "cells = " << cfg.cells << "\n";
    os << "noise_cells = " << cfg.noise_cells << "\n";
    os << "product_cells = " << cfg.product_cells << "\n";
    os << "[mixing]\n";
    os << "ensemble = " << cfg.ensemble << "\n";
    os << "horizon = " << cfg.horizon << "\n";
    os << "burn_in = " << cfg.burn_in << "\n";
    if (!cfg.u0.empty()) {
        os << "u0 = ";
        for (std::size_t i = 0; i < cfg.u0.size(); ++i)
            os << (i ? "," : "") << cfg.u0[i];
        os << "\n";
    }
    os << "[reduce]\n";
    os << "horizon = " << cfg.law_horizon << "\n";
    os << "ensemble = " << cfg.law_ensemble << "\n";
    os << "cells = " << cfg.law_cells << "\n";
    os << "mutate = " << (cfg.mutate ? "true" : "false") << "\n";
    os << "[certify]\n";
    os << "radius = " << cfg.radius << "\n";
    os << "delta = " << cfg.delta << "\n";
    os << "budget = " << cfg.budget << "\n";
    os << "pairs = " << cfg.pairs << "\n";
    os << "mc_trials = " << cfg.mc_trials << "\n";
    os << "mc_probes = " << cfg.mc_probes << "\n";
    os << "mc_samples = " << cfg.mc_samples << "\n";
    return os.str();
}

} // namespace mixlab
