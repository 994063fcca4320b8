// Command line entry point for the analysis pipeline.

#include <iostream>

#include "CLI11.hpp"

#include "tdiff/errors.hpp"
#include "tdiff/pipeline.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Translation difficulty analysis: surprisal and attention predictors of reading and production times"};
    std::string config_path;
    std::string stage = "all";
    std::optional<std::uint64_t> seed_override;
    int jobs = 1;
    bool force = false;
    app.add_option("--config", config_path, "Run configuration (JSON)")->required();
    app.add_option("--stage", stage, "ingest, extract, fit, evaluate, report or all")
        ->check(CLI::IsMember({"ingest", "extract", "fit", "evaluate", "report", "all"}));
    app.add_option("--seed-override", seed_override, "Replace the configured master seed");
    app.add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);
    app.add_flag("--force", force, "Overwrite existing stage outputs");
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        tdiff::RunConfig config = tdiff::load_config(config_path);
        if (seed_override) config.seed = *seed_override;
        tdiff::run_pipeline(config, tdiff::stage_from_string(stage), {jobs, force});
    } catch (const tdiff::StageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const tdiff::Error& e) {
        std::cerr << "invalid: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
