#include <iostream>

#include <CLI11.hpp>

#include "qsk/cli.hpp"

int main(int argc, char** argv) {
    using namespace qsk;
    CLI::App app{"qsk: numerical lab for the quantum SK model in a transverse field"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(kVersion));

    cli::Options o;
    o.workers = default_workers();
    app.add_option("--seed", o.seed, "master seed")->capture_default_str();
    app.add_option("--workers", o.workers, "worker threads (default from " + std::string(kWorkersEnv) + ")")
        ->check(CLI::PositiveNumber);
    app.add_option("--out", o.out, "output file (default stdout)");
    app.add_option("--format", o.format, "csv or json")->check(CLI::IsMember({"csv", "json"}))->capture_default_str();
    app.add_option("--config", o.config_path, "sectioned key = value config file");
    app.add_option("--set", o.sets, "override one config key, section.key=value");
    app.fallthrough();

    const std::pair<const char*, const char*> commands[] = {
        {"constants", "closed-form constants sweep with inequality checks"},
        {"exactdiag", "exact diagonalization of drawn disorder samples"},
        {"annealed", "path Monte Carlo of the annealed free energy with bound checks"},
        {"variational", "fixed-point solve of the critical equation"},
        {"static", "static approximation J(lambda) sweep"},
        {"quenched", "disorder study: quenched mean, second moment, concentration"},
        {"region", "temperature-field region classification"},
        {"verify", "run the acceptance suite"},
    };
    for (auto [name, help] : commands) {
        auto* sub = app.add_subcommand(name, help);
        sub->callback([&o, n = std::string(name)] { o.command = n; });
        if (std::string(name) == "variational")
            sub->add_flag("--allow-noncontractive", o.allow_noncontractive, "permit 2 lambda >= 1");
        if (std::string(name) == "verify")
            sub->add_option("--only", o.only, "criterion ids or group names")->delimiter(',');
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return cli::kUsage;
    }
    return cli::execute(o, std::cout, std::cerr);
}
