#ifndef EPITRACE_SURVEILLANCE_HPP
#define EPITRACE_SURVEILLANCE_HPP

#include "epitrace/mcmc.hpp"
#include "epitrace/population.hpp"
#include "epitrace/rng.hpp"
#include "epitrace/simulator.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace epitrace {

/// Reactive is also known as SOS: detection by the farmer only.
enum class StrategyKind : std::uint8_t { Reactive, Random, Bayes, BayesCT };

std::string_view strategy_name(StrategyKind k);
/// Accepts reactive, sos, random, bayes, bayes-ct (case-insensitive).
StrategyKind parse_strategy(std::string_view s);

struct StrategySpec
{
    StrategyKind kind = StrategyKind::Reactive;
    std::size_t z = 15;
    double start_day = 14.0;
    double zone_radius = 10.0;
    std::size_t mcmc_budget = 20000; ///< iterations per daily analysis
    std::size_t min_budget = 10;     ///< smallest chain that yields a posterior

    void validate() const;
};

struct ConditioningSpec
{
    std::size_t min_infections = 2;
    double day = 14.0; ///< still active and with enough infections at this time
};

/// Orders candidate holdings for a targeted visit; used to inject oracle
/// rankings in tests.
using RankingHook = std::function<std::vector<Id>(const OutbreakSimulation& sim, double day)>;

struct CullEntry
{
    double day;
    Id id;
    bool surveillance; ///< found by a visit rather than notified
};

struct ReplicateResult
{
    StrategyKind strategy = StrategyKind::Reactive;
    std::size_t replicate = 0;
    std::size_t culled = 0;
    double duration = 0.0;
    std::size_t visits = 0;
    std::vector<CullEntry> culls;
};

struct StrategyContext
{
    SamplerConfig sampler;   ///< priors and constants for Bayes analyses
    double ct_window = 21.0; ///< tracing window for Bayes-CT
    RankingHook ranking;     ///< overrides the posterior ranking when set
};

/// Runs one strategy from the given snapshot until extinction or t_max.
ReplicateResult run_strategy(OutbreakSimulation sim, const StrategySpec& strategy, const StrategyContext& context,
                             Rng& rng);

struct StudyConfig
{
    SimConfig sim;
    std::vector<StrategySpec> strategies;
    std::size_t n_reps = 100;
    ConditioningSpec conditioning;
    StrategyContext context;
    unsigned jobs = 1;
};

struct StrategySummary
{
    StrategyKind strategy;
    double mean_culled, culled_lo, culled_hi;
    double mean_duration, duration_lo, duration_hi;
};

struct StudyResult
{
    std::vector<ReplicateResult> replicates; ///< replicate-major, strategy order within
    std::vector<StrategySummary> summary;
    std::size_t attempts = 0; ///< realisations simulated to satisfy conditioning
};

/// Conditioned replicates with common random numbers: every strategy of a
/// replicate starts from the same snapshot.
StudyResult run_study(const Population& pop, const StudyConfig& config, std::uint64_t seed);

/// Mean and empirical 2.5/97.5 percentiles per strategy.
std::vector<StrategySummary> summarize_study(const std::vector<ReplicateResult>& replicates,
                                             const std::vector<StrategySpec>& strategies);

/// One-sided paired sign test of a > b; ties are dropped. Returns the p-value.
double sign_test(const std::vector<double>& a, const std::vector<double>& b);

/// Empirical quantile with linear interpolation (type 7).
double empirical_quantile(std::vector<double> values, double p);

} // namespace epitrace

#endif // EPITRACE_SURVEILLANCE_HPP
