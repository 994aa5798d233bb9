// One PASS/FAIL line per criterion; check details are indented below it.
#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>
#include <unistd.h>

#include "qsk/acceptance.hpp"

namespace {

// Criterion 11 runs the CLI verify subcommand twice; this is the subset it runs.
const char* const kDeterminismSubset = "ALL";
constexpr double kDeterminismBudget = 1800.0;

std::string slurp(const std::filesystem::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

int run_cli(const std::string& args) {
    std::string cmd = std::string("'") + QSK_CLI_PATH + "' " + args + " 2>/dev/null";
    int st = std::system(cmd.c_str());
    return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

bool criterion_11(std::uint64_t seed) {
    namespace fs = std::filesystem;
    auto t0 = std::chrono::steady_clock::now();
    fs::path dir = fs::temp_directory_path() / ("qsk_accept_" + std::to_string(::getpid()));
    fs::create_directories(dir);
    std::string only = std::string(kDeterminismSubset) == "ALL" ? "" : std::string(" --only ") + kDeterminismSubset;
    std::string base = "--seed " + std::to_string(seed) + " --format csv";
    int rc1 = run_cli(base + " --workers 1 --out '" + (dir / "w1.csv").string() + "' verify" + only);
    int rc2 = run_cli(base + " --workers 3 --out '" + (dir / "w3.csv").string() + "' verify" + only);
    std::string a = slurp(dir / "w1.csv"), b = slurp(dir / "w3.csv");
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    bool same = !a.empty() && a == b;
    bool ok = same && rc1 == rc2 && rc1 >= 0 && rc1 <= 1 && secs <= kDeterminismBudget;
    std::printf("%s criterion 11: determinism across worker counts (%.1f s, budget %.0f s)\n", ok ? "PASS" : "FAIL", secs,
                kDeterminismBudget);
    std::printf("    verify subset: %s; exit codes %d and %d; outputs %zu and %zu bytes, %s\n", kDeterminismSubset, rc1, rc2,
                a.size(), b.size(), same ? "byte-identical" : "DIFFERENT");
    std::fflush(stdout);
    fs::remove_all(dir);
    return ok;
}

}  // namespace

int main(int argc, char** argv) {
    using namespace qsk::acceptance;
    Context ctx;
    ctx.workers = 1;
    std::vector<std::string> only(argv + 1, argv + argc);
    bool all_ok = true;
    run(ctx, only, [&](const CriterionResult& r) {
        bool ok = r.pass && within_budget(r);
        all_ok &= ok;
        std::printf("%s criterion %d: %s (%.2f s, budget %.0f s)\n", ok ? "PASS" : "FAIL", r.id, r.name.c_str(), r.seconds,
                    r.budget_seconds);
        for (const auto& d : r.details) std::printf("    %s\n", d.c_str());
        if (!within_budget(r)) std::printf("    not ok runtime over budget\n");
        std::fflush(stdout);
    });
    if (only.empty() || std::find(only.begin(), only.end(), "11") != only.end()) all_ok &= criterion_11(ctx.seed);
    return all_ok ? 0 : 1;
}
