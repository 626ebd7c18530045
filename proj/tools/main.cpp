#include "mixlab/runner.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <optional>

int main(int argc, char** argv) {
    CLI::App app{"mixlab: random dynamical systems, Markovian reduction and TV mixing"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::uint64_t> seed_override;
    std::optional<std::string> out_override;
    std::optional<int> threads_override;

    const char* subcommands[] = {"simulate", "reduce-check", "mixing", "certify",
                                 "pushforward-check"};
    for (const char* name : subcommands) {
        CLI::App* sub = app.add_subcommand(name);
        sub->add_option("--config", config_path, "Config file path")->required();
        sub->add_option("--seed", seed_override, "Override [run] seed");
        sub->add_option("--out", out_override, "Override output directory");
        sub->add_option("--threads", threads_override, "Override worker count (0 = all cores)");
    }

    CLI11_PARSE(app, argc, argv);

    mixlab::RunConfig cfg;
    try {
        cfg = mixlab::parse_config_file(config_path);
        const std::string command = app.get_subcommands().front()->get_name();
        if (cfg.command != command)
            throw mixlab::ConfigError("config declares command '" + cfg.command +
                                      "' but '" + command + "' was invoked");
        if (seed_override) {
            cfg.seed = *seed_override;
            cfg.seed_set = true;
        }
        if (out_override) cfg.out_dir = *out_override;
        if (threads_override) cfg.threads = *threads_override;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 3;
    }

    mixlab::RunManifest manifest;
    int code = mixlab::run(cfg, manifest);
    for (const auto& [key, value] : manifest.verdicts)
        std::printf("%s: %s\n", key.c_str(), value.c_str());
    return code;
}
