#include "acceptance.hpp"
#include "stats.hpp"

#include "epitrace/simulator.hpp"

#include <boost/math/distributions/poisson.hpp>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace epitrace::acceptance {

namespace {

Population pair(double distance_km, double fm_rate)
{
    std::vector<Individual> people(2);
    people[0].label = 1;
    people[1].label = 2;
    people[1].location = {distance_km, 0.0};
    NetworkSet net;
    net.feedmill = RateLayer(2, {{0, 1, fm_rate}});
    return Population(std::move(people), std::move(net));
}

double log_survival(const SojournParams& sp, double t)
{
    return -sp.a * (std::exp(sp.b * t) - 1.0);
}

} // namespace

Outcome estimator_variance_check(const Options&)
{
    bool exact = true, ordered = true, shrinking = true;
    double previous = kInf;
    for (double delta : {0.5, 1.0, 2.0}) {
        for (int k = 1; k <= 400; ++k) {
            const double r = static_cast<double>(k) / delta;
            const double x = r * delta;
            const EstimatorVariance v = estimator_variance(r, delta);
            exact = exact && v.geometric == v.exponential - 1.0 / (x * x * x);
            if (x >= 1.0)
                ordered = ordered && v.geometric <= v.exponential;
            const double ratio = std::abs(v.geometric - v.exponential) / v.exponential;
            if (delta == 1.0) {
                shrinking = shrinking && ratio < previous;
                previous = ratio;
            }
        }
    }
    const EstimatorVariance at100 = estimator_variance(100.0, 1.0);
    const double ratio100 = std::abs(at100.geometric - at100.exponential) / at100.exponential;
    std::ostringstream out;
    out.precision(17);
    out << "identity " << (exact ? "exact" : "violated") << ", ordering " << (ordered ? "holds" : "violated")
        << ", ratio decreasing " << (shrinking ? "yes" : "no") << ", ratio at r*delta=100 " << ratio100;
    return {exact && ordered && shrinking && ratio100 < 0.01, out.str()};
}

Outcome simulator_calibration(const Options& opt)
{
    // Feedmill contact counts over the source's infectious period against
    // Poisson(r * exposure), via randomised probability integral transform.
    constexpr std::size_t kCountReps = 500;
    const Population fm_pair = pair(50.0, 1.0);
    SimConfig cfg;
    cfg.index_case = 0;
    cfg.true_params.epsilon = 0.0;
    Rng aux = Rng::stream(opt.seed, 80);
    std::vector<double> pit;
    double mean_count = 0.0;
    for (std::size_t k = 0; k < kCountReps; ++k) {
        Rng rng = Rng::stream(opt.seed, 800000 + k);
        const SimResult res = simulate_epidemic(fm_pair, cfg, rng);
        const double I = res.events.I[0], N = res.events.N[0];
        unsigned count = 0;
        for (const auto& c : res.contact_log)
            count += c.source == 0 && c.time >= I && c.time < N ? 1 : 0;
        mean_count += count;
        const boost::math::poisson_distribution<double> law(1.0 * (N - I));
        const double below = count == 0 ? 0.0 : boost::math::cdf(law, count - 1);
        const double at = boost::math::cdf(law, count);
        pit.push_back(below + aux.uniform() * (at - below));
    }
    const double d_counts = testing::ks_statistic(pit, [](double u) { return std::clamp(u, 0.0, 1.0); });
    const double p_counts = testing::ks_pvalue(d_counts, pit.size());

    // Infection time of a susceptible neighbour against
    // 1 - E_D[exp(-integrated hazard)], with no background pressure.
    constexpr std::size_t kSurvivalReps = 2000;
    const Population sp_pair = pair(5.0, 1.0);
    SimConfig cfg2;
    cfg2.index_case = 0;
    auto& p = cfg2.true_params;
    p.epsilon = 0.0;
    p.beta = {0.0, 0.2};
    p.p = {0.3, 0.9};
    p.gamma = 0.5;
    std::vector<double> times;
    for (std::size_t k = 0; k < kSurvivalReps; ++k) {
        Rng rng = Rng::stream(opt.seed, 900000 + k);
        const SimResult res = simulate_epidemic(sp_pair, cfg2, rng);
        times.push_back(res.events.I[1] - res.events.I[0]);
    }
    const auto& ip = cfg2.infectivity;
    const auto& sj = cfg2.sojourn;
    const double pre = p.beta[1] + p.p[0] * 1.0; // kernel is 1 at 5 km
    const double post = p.gamma * p.beta[1];
    const double removal = cfg2.removal.days;
    auto primitive = [&](double tau) { return std::log(ip.mu + std::exp(ip.nu * tau)) / ip.nu; };
    auto cdf = [&](double t) {
        if (t <= 0.0)
            return 0.0;
        // Midpoint rule over the sojourn density on [0, 40].
        constexpr int kSteps = 8000;
        const double h = 40.0 / kSteps;
        double sum = 0.0;
        for (int s = 0; s < kSteps; ++s) {
            const double d = (s + 0.5) * h;
            const double density = std::exp(std::log(sj.a * sj.b) + sj.b * d + log_survival(sj, d));
            const double hazard = pre * (primitive(std::min(t, d)) - primitive(0.0)) +
                                  post * std::max(0.0, std::min(t, d + removal) - d);
            sum += density * (1.0 - std::exp(-hazard)) * h;
        }
        return sum;
    };
    const double d_times = testing::ks_statistic(times, cdf);
    const double p_times = testing::ks_pvalue(d_times, times.size());
    std::size_t infected = 0;
    for (double t : times)
        infected += std::isfinite(t) ? 1 : 0;

    std::ostringstream out;
    out << "contact counts KS D=" << d_counts << " p=" << p_counts << " (mean " << mean_count / kCountReps
        << "); infection time KS D=" << d_times << " p=" << p_times << " (" << infected << "/" << kSurvivalReps
        << " infected)";
    return {p_counts > 0.01 && p_times > 0.01, out.str()};
}

} // namespace epitrace::acceptance
