#include "mixlab/io.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace mixlab {

int log_level() {
    static int level = [] {
        const char* env = std::getenv("MIXLAB_LOG");
        if (!env || !*env) return 0;
        return std::atoi(env);
    }();
    return level;
}

void log_info(const std::string& msg) {
    if (log_level() >= 1) std::fprintf(stderr, "[mixlab] %s\n", msg.c_str());
}

void log_debug(const std::string& msg) {
    if (log_level() >= 2) std::fprintf(stderr, "[mixlab:debug] %s\n", msg.c_str());
}

std::uint64_t fnv1a(const std::string& data) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t fnv1a_file(const std::string& path) {
    return fnv1a(read_text_file(path));
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write file: " + path);
    out << content;
    if (!out) throw Error("write failed: " + path);
}

std::string RunManifest::to_json() const {
    nlohmann::json j;
    j["version"] = version;
    j["exit_code"] = exit_code;
    j["config"] = config_to_text(config);
    nlohmann::json jt = nlohmann::json::array();
    for (const auto& t : timings) jt.push_back({{"stage", t.name}, {"millis", t.millis}});
    j["timings"] = jt;
    nlohmann::json jv = nlohmann::json::object();
    for (const auto& [k, v] : verdicts) jv[k] = v;
    j["verdicts"] = jv;
    nlohmann::json jf = nlohmann::json::array();
    for (const auto& f : files) {
        char hex[17];
        std::snprintf(hex, sizeof hex, "%016llx",
                      static_cast<unsigned long long>(f.checksum));
        jf.push_back({{"name", f.name}, {"fnv1a", std::string(hex)}});
    }
    j["files"] = jf;
    return j.dump(2) + "\n";
}

void emit_file(RunManifest& manifest, const std::string& out_dir, const std::string& name,
               const std::string& content) {
    std::filesystem::create_directories(out_dir);
    write_text_file((std::filesystem::path(out_dir) / name).string(), content);
    manifest.files.push_back({name, fnv1a(content)});
    log_debug("wrote " + name + " (" + std::to_string(content.size()) + " bytes)");
}

void emit_plotdata(RunManifest& manifest, const std::string& out_dir,
                   const DecayCurve& curve, const RateFit& fit) {
    int n = static_cast<int>(curve.tv_values.size());
    std::ostringstream tv, ft, rs;
    tv.precision(17);
    ft.precision(17);
    rs.precision(17);
    tv << "# k tv\n";
    ft << "# k c*exp(-gamma*k)\n";
    rs << "# k residual\n";
    double max_residual = 0.0;
    for (int k = 0; k < n; ++k) {
        double observed = curve.tv_values[static_cast<std::size_t>(k)];
        double fitted = fit.c_fit * std::exp(-fit.gamma_fit * k);
        tv << k << " " << observed << "\n";
        ft << k << " " << fitted << "\n";
        rs << k << " " << observed - fitted << "\n";
        max_residual = std::max(max_residual, std::abs(observed - fitted));
    }
    emit_file(manifest, out_dir, "plot_tv.dat", tv.str());
    emit_file(manifest, out_dir, "plot_fit.dat", ft.str());
    emit_file(manifest, out_dir, "plot_residuals.dat", rs.str());
    std::ostringstream mr;
    mr.precision(17);
    mr << max_residual;
    manifest.verdicts.emplace_back("max_residual", mr.str());
}

} // namespace mixlab
