// cascadelab: config-driven cascade deferral experiments.
//
//   cascadelab run <config.json> [--out DIR] [--seed N]
//   cascadelab plot <csv...> --out FILE.svg
//   cascadelab compare <manifestA> <manifestB>
//
// Exit codes: 0 success, 2 config error, 3 training divergence, 4 I/O error.

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cascadelab/errors.hpp"
#include "cascadelab/scenario.hpp"
#include "cascadelab/svg.hpp"

int main(int argc, char** argv) {
    CLI::App app{"cascade deferral experiment runner"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    std::optional<std::uint64_t> seed;
    auto* run = app.add_subcommand("run", "run a scenario config");
    run->add_option("config", config_path, "scenario config (JSON)")->required();
    run->add_option("--out", out_dir, "output directory (overrides the config)");
    run->add_option("--seed", seed, "run seed (overrides the config)");

    std::vector<std::string> curve_files;
    std::string plot_out;
    auto* plot = app.add_subcommand("plot", "render curve CSVs as an SVG");
    plot->add_option("csv", curve_files, "curve CSV files")->required();
    plot->add_option("--out", plot_out, "output SVG path")->required();

    std::string manifest_a, manifest_b;
    auto* compare = app.add_subcommand("compare", "diff headline metrics of two runs");
    compare->add_option("manifestA", manifest_a)->required();
    compare->add_option("manifestB", manifest_b)->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) {
            std::optional<std::filesystem::path> out;
            if (!out_dir.empty()) out = out_dir;
            const auto artifacts = cascadelab::run_scenario(config_path, out, seed);
            std::cout << "wrote " << artifacts.files.size() << " artifacts to "
                      << artifacts.out_dir.string() << "\n";
        } else if (plot->parsed()) {
            std::vector<std::filesystem::path> paths(curve_files.begin(), curve_files.end());
            cascadelab::emit_plot(paths, plot_out);
            std::cout << "wrote " << plot_out << "\n";
        } else if (compare->parsed()) {
            std::cout << cascadelab::compare_report(manifest_a, manifest_b);
        }
    } catch (const cascadelab::TrainingDivergenceError& e) {
        std::cerr << "training divergence: " << e.what() << "\n";
        return 3;
    } catch (const cascadelab::IoError& e) {
        std::cerr << "i/o error: " << e.what() << "\n";
        return 4;
    } catch (const cascadelab::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
