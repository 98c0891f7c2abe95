// modeshare: command-line driver for the mode-share pipeline.

#include "modeshare/config.hpp"
#include "modeshare/error.hpp"
#include "modeshare/pipeline.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <string>
#include <utility>
#include <vector>

namespace fs = std::filesystem;
using modeshare::pipeline::Stage;

namespace {

// Pull `--section.key=value` / `--section.key value` overrides out of argv.
std::vector<std::pair<std::string, std::string>> take_overrides(std::vector<std::string>& args) {
    std::vector<std::pair<std::string, std::string>> out;
    std::vector<std::string> rest;
    for (std::size_t i = 0; i < args.size(); ++i) {
        const std::string& a = args[i];
        if (a.rfind("--", 0) != 0) {
            rest.push_back(a);
            continue;
        }
        const std::string body = a.substr(2);
        const auto eq = body.find('=');
        const std::string key = body.substr(0, eq);
        if (key.find('.') == std::string::npos) {
            rest.push_back(a);
            continue;
        }
        if (eq != std::string::npos) {
            out.emplace_back(key, body.substr(eq + 1));
        } else if (i + 1 < args.size()) {
            out.emplace_back(key, args[++i]);
        } else {
            throw modeshare::ConfigError(key, "override flag needs a value");
        }
    }
    args = std::move(rest);
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    std::vector<std::pair<std::string, std::string>> overrides;
    try {
        overrides = take_overrides(args);
    } catch (const modeshare::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    }

    CLI::App app{"City mode-share estimation pipeline"};
    app.require_subcommand(1);
    std::string config_path;
    std::string out_dir;
    long long seed = -1;
    app.add_option("--config", config_path, "Pipeline config file")->required();
    app.add_option("--out", out_dir, "Output directory (overrides run.out)");
    app.add_option("--seed", seed, "Sampling seed (overrides sampling.seed)");

    std::vector<std::pair<CLI::App*, Stage>> subs;
    for (auto [name, stage, help] : {std::tuple{"sample", Stage::sample, "Sample road points and plan image requests"},
                                     std::tuple{"aggregate", Stage::aggregate, "Aggregate detections per city"},
                                     std::tuple{"eval-detections", Stage::eval_detections,
                                                "Score detections against ground truth"},
                                     std::tuple{"fit", Stage::fit, "Fit the beta regression model"},
                                     std::tuple{"loocv", Stage::loocv, "Leave-one-out cross-validation"},
                                     std::tuple{"predict", Stage::predict, "Predict mode shares"},
                                     std::tuple{"report", Stage::report, "Combined report and scatter plot"}}) {
        CLI::App* sub = app.add_subcommand(name, help);
        sub->fallthrough();
        subs.emplace_back(sub, stage);
    }
    app.footer("Any config value can be overridden as --<section>.<key>=<value>.");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    Stage stage = Stage::fit;
    for (auto& [sub, s] : subs) {
        if (sub->parsed()) {
            stage = s;
        }
    }
    if (!out_dir.empty()) {
        overrides.emplace_back("run.out", fs::absolute(out_dir).string());
    }
    if (seed >= 0) {
        overrides.emplace_back("sampling.seed", std::to_string(seed));
    }

    modeshare::config::PipelineConfig cfg;
    try {
        cfg = modeshare::config::load_config(config_path, overrides);
    } catch (const modeshare::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    }

    try {
        for (const auto& p : modeshare::pipeline::run(stage, cfg)) {
            std::cout << p.string() << "\n";
        }
    } catch (const modeshare::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << modeshare::pipeline::to_string(stage) << " failed: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
