#include "epitrace/surveillance.hpp"

#include "epitrace/errors.hpp"
#include "epitrace/parallel.hpp"

#include <boost/math/distributions/binomial.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <memory>

namespace epitrace {

std::string_view strategy_name(StrategyKind k)
{
    switch (k) {
    case StrategyKind::Reactive:
        return "reactive";
    case StrategyKind::Random:
        return "random";
    case StrategyKind::Bayes:
        return "bayes";
    case StrategyKind::BayesCT:
        return "bayes-ct";
    }
    return "?";
}

StrategyKind parse_strategy(std::string_view s)
{
    std::string lower(s);
    std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
    if (lower == "reactive" || lower == "sos")
        return StrategyKind::Reactive;
    if (lower == "random")
        return StrategyKind::Random;
    if (lower == "bayes")
        return StrategyKind::Bayes;
    if (lower == "bayes-ct" || lower == "bayesct" || lower == "bayes_ct")
        return StrategyKind::BayesCT;
    throw ConfigError("unknown strategy '" + std::string(s) + "'");
}

void StrategySpec::validate() const
{
    if (!(start_day >= 0.0))
        throw ConfigError("start day must be non-negative");
    if (!(zone_radius > 0.0))
        throw ConfigError("zone radius must be positive");
}

namespace {

bool known(const EpidemicRecord& truth, Id j, double day)
{
    return truth.N[j] <= day;
}

std::vector<Id> random_targets(const OutbreakSimulation& sim, const StrategySpec& spec, double day, Rng& rng)
{
    const auto& pop = sim.population();
    const auto& truth = sim.truth();
    std::vector<Id> notified, zone;
    for (Id j = 0; j < pop.size(); ++j)
        if (known(truth, j, day))
            notified.push_back(j);
    for (Id j = 0; j < pop.size(); ++j) {
        if (known(truth, j, day))
            continue;
        const bool near = std::any_of(notified.begin(), notified.end(),
                                      [&](Id i) { return euclidean_distance(pop, i, j) <= spec.zone_radius; });
        if (near)
            zone.push_back(j);
    }
    const std::size_t k = std::min(spec.z, zone.size());
    for (std::size_t a = 0; a < k; ++a)
        std::swap(zone[a], zone[a + rng.index(zone.size() - a)]);
    zone.resize(k);
    return zone;
}

std::vector<Id> top_unnotified(const std::vector<Id>& ranked, const EpidemicRecord& truth, double day, std::size_t z)
{
    std::vector<Id> out;
    for (Id j : ranked) {
        if (out.size() == z)
            break;
        if (!known(truth, j, day))
            out.push_back(j);
    }
    return out;
}

class BayesController
{
public:
    BayesController(const StrategySpec& spec, const StrategyContext& context, bool use_ct)
        : spec_(spec), context_(context), use_ct_(use_ct)
    {
        if (!context.ranking && spec.mcmc_budget < spec.min_budget)
            throw BudgetError("MCMC budget of " + std::to_string(spec.mcmc_budget) +
                              " iterations is below the minimum of " + std::to_string(spec.min_budget));
    }

    std::vector<Id> targets(const OutbreakSimulation& sim, double day, Rng& rng)
    {
        const auto& truth = sim.truth();
        if (context_.ranking)
            return top_unnotified(context_.ranking(sim, day), truth, day, spec_.z);
        const EpidemicRecord observed = observe(truth, day);
        bool any = false;
        for (Id j = 0; j < observed.size() && !any; ++j)
            any = observed.notified(j);
        if (!any)
            return {};
        const auto& pop = sim.population();
        ContactTraceSet cts = use_ct_ ? extract_ctd(sim, day, context_.ct_window, 1.0, rng)
                                      : ContactTraceSet(pop.size(), context_.ct_window);
        if (!sampler_) {
            SamplerConfig cfg = context_.sampler;
            cfg.iterations = spec_.mcmc_budget;
            cfg.burn_in = spec_.mcmc_budget / 2;
            cfg.thin = std::max<std::size_t>(1, (cfg.iterations - cfg.burn_in) / 500);
            sampler_ = std::make_unique<Sampler>(pop, std::move(cts), observed, cfg, Rng(rng.next()));
        } else {
            sampler_->update_data(observed, std::move(cts));
        }
        const PosteriorSet post = sampler_->run();
        std::vector<Id> ranked;
        for (const auto& r : occult_risk_ranking(post, pop))
            if (r.probability > 0.0)
                ranked.push_back(r.id);
        return top_unnotified(ranked, truth, day, spec_.z);
    }

private:
    const StrategySpec& spec_;
    const StrategyContext& context_;
    bool use_ct_;
    std::unique_ptr<Sampler> sampler_;
};

} // namespace

ReplicateResult run_strategy(OutbreakSimulation sim, const StrategySpec& strategy, const StrategyContext& context,
                             Rng& rng)
{
    strategy.validate();
    const double t_max = sim.config().t_max;
    ReplicateResult out;
    out.strategy = strategy.kind;

    std::unique_ptr<BayesController> bayes;
    if (strategy.kind == StrategyKind::Bayes || strategy.kind == StrategyKind::BayesCT)
        bayes = std::make_unique<BayesController>(strategy, context, strategy.kind == StrategyKind::BayesCT);

    if (strategy.kind != StrategyKind::Reactive && strategy.z > 0) {
        for (double day = std::max(strategy.start_day, std::ceil(sim.now())); day <= t_max; day += 1.0) {
            sim.advance_to(day);
            if (sim.extinct())
                break;
            const std::vector<Id> targets =
                bayes ? bayes->targets(sim, day, rng) : random_targets(sim, strategy, day, rng);
            for (Id j : targets) {
                sim.visit(j, day);
                ++out.visits;
            }
        }
    }
    sim.advance_to(t_max);

    const auto& truth = sim.truth();
    for (Id j = 0; j < truth.size(); ++j)
        if (truth.N[j] <= t_max)
            out.culls.push_back({truth.N[j], j, truth.visit_detected[j] != 0});
    std::sort(out.culls.begin(), out.culls.end(),
              [](const CullEntry& a, const CullEntry& b) { return std::tie(a.day, a.id) < std::tie(b.day, b.id); });
    out.culled = out.culls.size();
    out.duration = sim.end_time();
    return out;
}

StudyResult run_study(const Population& pop, const StudyConfig& config, std::uint64_t seed)
{
    if (config.n_reps == 0)
        throw ConfigError("a study needs at least one replicate");
    if (config.strategies.empty())
        throw ConfigError("a study needs at least one strategy");
    for (const auto& s : config.strategies)
        s.validate();

    double snapshot_day = config.conditioning.day;
    for (const auto& s : config.strategies)
        snapshot_day = std::min(snapshot_day, s.start_day);

    StudyResult result;
    std::vector<OutbreakSimulation> snapshots;
    snapshots.reserve(config.n_reps);
    std::size_t attempts = 0;
    while (snapshots.size() < config.n_reps) {
        OutbreakSimulation sim(pop, config.sim, Rng::stream(seed, attempts));
        ++attempts;
        sim.advance_to(snapshot_day);
        OutbreakSimulation snapshot = sim;
        sim.advance_to(config.conditioning.day);
        if (!sim.extinct() && sim.truth().infected_count() >= config.conditioning.min_infections)
            snapshots.push_back(std::move(snapshot));
        const double rate = static_cast<double>(snapshots.size()) / static_cast<double>(attempts);
        if (attempts >= 10 * config.n_reps && rate < 0.01)
            throw ConditioningTimeout("conditioning accepted " + std::to_string(snapshots.size()) + " of " +
                                      std::to_string(attempts) + " realisations");
    }
    result.attempts = attempts;

    const std::size_t S = config.strategies.size();
    result.replicates.resize(config.n_reps * S);
    const std::uint64_t control_seed = mix64(seed ^ 0x5bd1e9955bd1e995ULL);
    parallel_for(config.n_reps, config.jobs, [&](std::size_t begin, std::size_t end) {
        for (std::size_t k = begin; k < end; ++k) {
            for (std::size_t s = 0; s < S; ++s) {
                Rng rng = Rng::stream(control_seed, k * S + s);
                ReplicateResult r = run_strategy(snapshots[k], config.strategies[s], config.context, rng);
                r.replicate = k;
                result.replicates[k * S + s] = std::move(r);
            }
        }
    });
    result.summary = summarize_study(result.replicates, config.strategies);
    return result;
}

double empirical_quantile(std::vector<double> values, double p)
{
    if (values.empty())
        throw DomainError("quantile of an empty sample");
    std::sort(values.begin(), values.end());
    const double h = (static_cast<double>(values.size()) - 1.0) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

std::vector<StrategySummary> summarize_study(const std::vector<ReplicateResult>& replicates,
                                             const std::vector<StrategySpec>& strategies)
{
    std::vector<StrategySummary> out;
    std::vector<StrategyKind> seen;
    for (const auto& spec : strategies) {
        if (std::find(seen.begin(), seen.end(), spec.kind) != seen.end())
            continue;
        seen.push_back(spec.kind);
        std::vector<double> culled, duration;
        for (const auto& r : replicates) {
            if (r.strategy != spec.kind)
                continue;
            culled.push_back(static_cast<double>(r.culled));
            duration.push_back(r.duration);
        }
        if (culled.empty())
            continue;
        auto mean = [](const std::vector<double>& v) {
            double s = 0.0;
            for (double x : v)
                s += x;
            return s / static_cast<double>(v.size());
        };
        out.push_back({spec.kind, mean(culled), empirical_quantile(culled, 0.025), empirical_quantile(culled, 0.975),
                       mean(duration), empirical_quantile(duration, 0.025), empirical_quantile(duration, 0.975)});
    }
    return out;
}

double sign_test(const std::vector<double>& a, const std::vector<double>& b)
{
    if (a.size() != b.size())
        throw DomainError("sign test needs paired samples");
    unsigned plus = 0, minus = 0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        plus += a[k] > b[k] ? 1 : 0;
        minus += a[k] < b[k] ? 1 : 0;
    }
    const unsigned n = plus + minus;
    if (n == 0 || plus == 0)
        return 1.0;
    const boost::math::binomial_distribution<double> bin(n, 0.5);
    return boost::math::cdf(boost::math::complement(bin, plus - 1));
}

} // namespace epitrace
