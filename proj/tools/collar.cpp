#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "collar/collar.hpp"

namespace {

int run(const std::string& sub, const std::string& config_path, const std::string& out, unsigned threads) {
    collar::ExperimentConfig config;
    try {
        config = collar::load_config(config_path);
    } catch (const collar::Error& e) {
        std::cerr << "collar: " << e.what() << '\n';
        return collar::exit_code_for(e.kind());
    }

    std::optional<collar::ExperimentKind> kind;
    if (sub == "validate") {
        kind = collar::ExperimentKind::hypothesis_report;
    } else if (sub != to_string(config.experiment.kind)) {
        std::cerr << "collar: config declares experiment '" << to_string(config.experiment.kind)
                  << "' but subcommand is '" << sub << "'\n";
        return collar::exit_config;
    }

    const auto outcome = collar::run_experiment(config, out, threads, kind);
    const auto& r = outcome.report;
    std::cout << sub << ": " << r["verdict"].get<std::string>();
    if (r.contains("error")) std::cout << " (" << r["error"]["message"].get<std::string>() << ')';
    std::cout << "\nreport: " << out << "/report.json\n";
    for (const auto& w : r["warnings"]) std::cerr << "warning: " << w.get<std::string>() << '\n';
    return outcome.exit_code;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"collar: collar approximations for degenerate weighted diffusion"};
    app.require_subcommand(1);

    std::string config_path, out = "out";
    unsigned threads = 1;
    const char* kinds[] = {"solve", "family", "barrier-certify", "duality",
                           "attainment", "dichotomy-sweep", "hypothesis-report", "validate"};
    for (const char* k : kinds) {
        auto* sc = app.add_subcommand(k, std::string(k) == "validate" ? "parse the config and report hypotheses"
                                                                      : std::string("run a ") + k + " experiment");
        sc->add_option("--config", config_path, "experiment config file")->required();
        sc->add_option("--out", out, "output directory");
        sc->add_option("--threads", threads, "worker threads for independent runs")->check(CLI::Range(1u, 256u));
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : collar::exit_config;
    }
    return run(app.get_subcommands().front()->get_name(), config_path, out, threads);
}
