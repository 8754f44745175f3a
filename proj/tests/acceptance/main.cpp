// Acceptance suite: one PASS/FAIL line per criterion.

#include "acceptance.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <exception>
#include <iostream>
#include <set>
#include <vector>

using namespace epitrace::acceptance;

namespace {

struct Criterion
{
    int number;
    const char* title;
    Outcome (*run)(const Options&);
    double limit_seconds; ///< 0 when the criterion sets no runtime bound
};

const std::vector<Criterion> kCriteria = {
    {1, "likelihood oracle equivalence", likelihood_oracle, 60.0},
    {2, "window reduction", window_reduction, 0.0},
    {3, "prior reproduction", prior_reproduction, 300.0},
    {4, "small-state exactness", small_state, 600.0},
    {5, "parameter recovery", parameter_recovery, 0.0},
    {6, "tracing precision effect", tracing_precision, 0.0},
    {7, "estimator variance", estimator_variance_check, 1.0},
    {8, "simulator calibration", simulator_calibration, 0.0},
    {9, "surveillance ordering", surveillance_ordering, 0.0},
    {10, "determinism", determinism, 0.0},
};

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"epitrace acceptance checks"};
    std::vector<int> only;
    Options opt;
    opt.scratch = std::filesystem::temp_directory_path() / "epitrace-acceptance";
    app.add_option("-c,--criteria", only, "criterion numbers to run (default all)")->delimiter(',');
    app.add_option("--seed", opt.seed, "master seed");
    app.add_option("--jobs", opt.jobs, "worker threads for replicate-parallel checks");
    app.add_option("--scratch", opt.scratch, "directory for intermediate files");
    CLI11_PARSE(app, argc, argv);

    const std::set<int> wanted(only.begin(), only.end());
    std::filesystem::create_directories(opt.scratch);
    int failures = 0;
    for (const auto& c : kCriteria) {
        if (!wanted.empty() && !wanted.count(c.number))
            continue;
        const auto start = std::chrono::steady_clock::now();
        Outcome out;
        try {
            out = c.run(opt);
        } catch (const std::exception& e) {
            out = {false, std::string("exception: ") + e.what()};
        }
        const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (c.limit_seconds > 0.0 && seconds > c.limit_seconds) {
            out.pass = false;
            out.detail += "; runtime limit exceeded";
        }
        std::printf("AC%-2d %s  %s: %s [%.1f s]\n", c.number, out.pass ? "PASS" : "FAIL", c.title, out.detail.c_str(),
                    seconds);
        std::fflush(stdout);
        failures += out.pass ? 0 : 1;
    }
    return failures == 0 ? 0 : 1;
}
