#include <cstdio>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include <halfheat/lab/experiments.hpp>

namespace {

using halfheat::ConfigError;
using namespace halfheat::lab;

struct Options {
    std::string config;
    std::uint64_t seed = 0;
    bool seed_set = false;
    std::string out;
    std::string grid;
};

// "NTxNX[xNY[xNZ]]" overrides sample counts; periods are kept (padded from l_x[0]).
void apply_grid_override(GridSpec& g, const std::string& text) {
    std::vector<std::size_t> n;
    std::stringstream ss(text);
    std::string part;
    while (std::getline(ss, part, 'x')) {
        try {
            std::size_t used = 0;
            n.push_back(std::stoul(part, &used));
            if (used != part.size()) throw std::invalid_argument(part);
        } catch (const std::exception&) {
            throw ConfigError("--grid expects NTxNX[xNY[xNZ]], got '" + text + "'");
        }
    }
    if (n.size() < 2 || n.size() > 4) throw ConfigError("--grid expects NTxNX[xNY[xNZ]], got '" + text + "'");
    g.d = static_cast<int>(n.size() - 1);
    g.n_t = n[0];
    g.n_x.assign(n.begin() + 1, n.end());
    const double l0 = g.l_x.empty() ? 1.0 : g.l_x[0];
    g.l_x.resize(n.size() - 1, l0);
}

int run(const std::string& experiment, const Options& o) {
    ExperimentConfig cfg = default_config(experiment);
    if (!o.config.empty()) cfg = load_config(o.config, cfg);
    cfg.experiment = experiment;
    if (o.seed_set) cfg.seed = o.seed;
    if (!o.grid.empty()) apply_grid_override(cfg.grid, o.grid);
    const std::string out = o.out.empty() ? "halfheat-out/" + experiment : o.out;

    const Report rep = run_experiment(cfg);
    rep.write(out);
    if (rep.passed()) {
        const std::size_t n = rep.assertions().size();
        std::printf("%s: PASS (%zu assertion%s, config %s) -> %s\n", experiment.c_str(), n, n == 1 ? "" : "s",
                    rep.hash().c_str(), out.c_str());
        return 0;
    }
    json f = {{"experiment", experiment}, {"config_hash", rep.hash()}, {"failures", rep.failures()}};
    std::printf("%s\n", f.dump().c_str());
    return 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Half-time-derivative parabolic estimate lab"};
    app.require_subcommand(1);
    Options o;
    const std::vector<std::pair<std::string, std::string>> subs{
        {"identities", "time-calculus and weak-form identity suite"},
        {"l2", "L2 estimate trials"},
        {"lp-sweep", "Lp ratios over p, lambda and coefficient kinds"},
        {"tail-decay", "decay of the cutoff commutator"},
        {"oscillation", "mean-oscillation decay and local estimate"},
        {"assumptions", "small-oscillation assumption checkers"},
        {"solve", "single iterative solve"},
        {"oracle", "single Fourier-oracle solve"}};
    std::string chosen;
    for (const auto& [name, help] : subs) {
        CLI::App* s = app.add_subcommand(name, help);
        s->add_option("--config", o.config, "JSON config file (comments allowed)");
        s->add_option("--seed", o.seed, "master seed")->each([&](const std::string&) { o.seed_set = true; });
        s->add_option("--out", o.out, "output directory");
        s->add_option("--grid", o.grid, "sample counts NTxNX[xNY[xNZ]]");
        s->callback([&, n = name] { chosen = n; });
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }
    try {
        return run(chosen, o);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
