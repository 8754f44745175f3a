#include "oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <tuple>

namespace epitrace::testing {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

Population random_population(Rng& rng, std::size_t n)
{
    std::vector<Individual> people(n);
    for (Id i = 0; i < n; ++i) {
        people[i].label = static_cast<std::int64_t>(100 + i);
        people[i].location = {rng.uniform(0.0, 20.0), rng.uniform(0.0, 20.0)};
        people[i].production_type = 1 + static_cast<int>(rng.index(3));
    }
    NetworkSet net;
    std::vector<RateEdge> fm, sh;
    std::vector<std::pair<Id, Id>> cp;
    for (Id i = 0; i < n; ++i) {
        for (Id j = 0; j < n; ++j) {
            if (i == j)
                continue;
            if (rng.bernoulli(0.6))
                fm.push_back({i, j, rng.uniform(0.2, 1.5)});
            if (rng.bernoulli(0.4))
                sh.push_back({i, j, rng.uniform(0.05, 0.5)});
            if (i < j && rng.bernoulli(0.3))
                cp.emplace_back(i, j);
        }
    }
    net.feedmill = RateLayer(n, std::move(fm));
    net.slaughterhouse = RateLayer(n, std::move(sh));
    net.company = AssociationLayer(n, cp);
    return Population(std::move(people), std::move(net));
}

// Poisson contact times at `rate` over [a, b).
void poisson_times(Rng& rng, double rate, double a, double b, std::vector<double>& out)
{
    for (double t = a + rng.exponential(rate); t < b; t += rng.exponential(rate))
        out.push_back(t);
}

struct Windows
{
    std::vector<double> begin, end;
    // Left-limit membership: the bin just before t lies in the window.
    bool covers(Id j, double t) const { return begin[j] < t && t <= end[j]; }
};

double log_density(const SojournParams& sp, double t)
{
    return std::log(sp.a * sp.b) + sp.b * t - sp.a * (std::exp(sp.b * t) - 1.0);
}

double log_tail(const SojournParams& sp, double t)
{
    return -sp.a * (std::exp(sp.b * t) - 1.0);
}

double logistic(const InfectivityParams& ip, double tau)
{
    const double e = std::exp(ip.nu * tau);
    return e / (ip.mu + e);
}

class Pressure
{
public:
    Pressure(const Instance& inst, const Windows& w, bool traced) : inst_(inst), w_(w), traced_(traced)
    {
        const auto& pop = inst.pop;
        const std::size_t n = pop.size();
        kernel_.assign(n * n, 0.0);
        for (Id i = 0; i < n; ++i)
            for (Id j = 0; j < n; ++j) {
                const auto& a = pop.individual(i).location;
                const auto& b = pop.individual(j).location;
                const double rho = std::hypot(a.x - b.x, a.y - b.y);
                kernel_[i * n + j] = inst.params.beta[1] * std::exp(-inst.params.psi * (rho - 5.0));
            }
    }

    /// Force of infection on j from unobserved sources just before t.
    double operator()(Id j, double t) const
    {
        const auto& rec = inst_.rec;
        const auto& p = inst_.params;
        const auto& net = inst_.pop.networks();
        const std::size_t n = rec.size();
        const double s = p.eta[static_cast<std::size_t>(inst_.pop.production_type(j) - 1)];
        double total = p.epsilon;
        for (Id i = 0; i < n; ++i) {
            if (i == j)
                continue;
            const double I = rec.I[i], N = rec.N[i], R = rec.R[i];
            if (I < t && t <= N) {
                double rate = kernel_[i * n + j];
                if (net.company.connected(i, j))
                    rate += p.beta[0];
                const bool seen = traced_ && (w_.covers(i, t) || w_.covers(j, t));
                if (!seen)
                    rate += p.p[0] * net.feedmill.rate(i, j) + p.p[1] * net.slaughterhouse.rate(i, j);
                total += logistic(inst_.ip, t - I) * s * rate;
            } else if (N < t && t <= R) {
                total += p.gamma * s * kernel_[i * n + j];
            }
        }
        return total;
    }

private:
    const Instance& inst_;
    const Windows& w_;
    bool traced_;
    std::vector<double> kernel_;
};

} // namespace

Instance random_instance(Rng& rng, const InstanceOptions& options)
{
    Instance inst;
    const std::size_t n = options.min_size + rng.index(options.max_size - options.min_size + 1);
    inst.pop = random_population(rng, n);

    auto& p = inst.params;
    p.epsilon = rng.uniform(1e-3, 1e-2);
    p.p = {rng.uniform(0.1, 0.9), rng.uniform(0.1, 0.9)};
    p.beta = {rng.uniform(0.01, 0.1), rng.uniform(0.01, 0.1)};
    p.gamma = rng.uniform(0.2, 1.5);
    p.psi = rng.uniform(0.05, 0.5);
    for (std::size_t k = 1; k < p.eta.size(); ++k)
        p.eta[k] = rng.uniform(0.2, 1.0);

    const double t_obs = rng.uniform(15.0, 30.0);
    EpidemicRecord rec(n, t_obs);
    // Individual 0 starts the outbreak; the rest are infected at random.
    for (Id j = 0; j < n; ++j) {
        if (j > 0 && !rng.bernoulli(0.75)) {
            if (options.negative_tests && rng.bernoulli(0.3))
                rec.negative_test[j] = rng.uniform(0.0, t_obs);
            continue;
        }
        const double I = j == 0 ? 0.0 : rng.uniform(0.5, t_obs - 0.5);
        const double N = I + rng.uniform(2.0, 10.0);
        double R = N + rng.uniform(0.5, 2.0);
        rec.I[j] = I;
        if (N <= t_obs) {
            rec.N[j] = N;
            if (options.visit_detection && rng.bernoulli(0.15)) {
                R = N;
                rec.visit_detected[j] = 1;
            }
            rec.R[j] = R <= t_obs ? R : kInf;
        }
        if (options.negative_tests && rng.bernoulli(0.2))
            rec.negative_test[j] = I - rng.uniform(0.1, 3.0);
    }

    inst.window = 10.0;
    Windows w{std::vector<double>(n, kInf), std::vector<double>(n, kInf)};
    for (Id j = 0; j < n; ++j) {
        if (rec.notified(j) && rng.bernoulli(options.trace_probability)) {
            inst.traced.emplace_back(j, rec.N[j]);
            w.begin[j] = rec.N[j] - inst.window;
            w.end[j] = rec.N[j];
        }
    }

    // Record every network contact inside the union of the two windows.
    const auto& net = inst.pop.networks();
    for (Channel c : {Channel::FM, Channel::SH}) {
        for (const auto& e : net.frequency(c).edges()) {
            std::vector<std::pair<double, double>> spans;
            for (Id k : {e.src, e.dst})
                if (w.end[k] < kInf)
                    spans.emplace_back(w.begin[k], w.end[k]);
            std::sort(spans.begin(), spans.end());
            double covered = -kInf;
            std::vector<double> times;
            for (auto [a, b] : spans) {
                a = std::max(a, covered);
                if (a < b)
                    poisson_times(rng, e.rate, a, b, times);
                covered = std::max(covered, b);
            }
            for (double t : times)
                inst.events.push_back({e.src, e.dst, c, t});
        }
    }

    // Move some infections onto an observed contact from an infectious source.
    for (Id j = 1; j < n; ++j) {
        if (!(rec.I[j] < kInf) || !rng.bernoulli(options.contact_infection_probability))
            continue;
        std::vector<double> candidates;
        for (const auto& ev : inst.events) {
            const Id i = ev.source;
            if (ev.dest != j || !(rec.I[i] < ev.time && ev.time < rec.N[i]))
                continue;
            if (ev.time < rec.N[j] && ev.time > rec.negative_test[j] && ev.time < t_obs)
                candidates.push_back(ev.time);
        }
        if (!candidates.empty())
            rec.I[j] = candidates[rng.index(candidates.size())];
    }
    inst.rec = std::move(rec);
    return inst;
}

double discretised_log_lik(const Instance& inst, bool traced, double delta)
{
    const auto& rec = inst.rec;
    const std::size_t n = rec.size();
    Windows w{std::vector<double>(n, kInf), std::vector<double>(n, kInf)};
    if (traced)
        for (auto [j, N] : inst.traced) {
            w.begin[j] = N - inst.window;
            w.end[j] = N;
        }
    const Pressure lambda(inst, w, traced);

    Id kappa = n;
    for (Id j = 0; j < n; ++j)
        if (rec.I[j] < kInf && (kappa == n || rec.I[j] < rec.I[kappa]))
            kappa = j;
    if (kappa == n)
        return 0.0;
    const double t0 = rec.I[kappa];

    // Reported contacts grouped by destination.
    std::map<Id, std::vector<ContactEvent>> inbound;
    if (traced)
        for (const auto& ev : inst.events)
            inbound[ev.dest].push_back(ev);

    double total = 0.0;
    for (Id j = 0; j < n; ++j) {
        const double Ij = rec.I[j];
        const bool infected = Ij < kInf;

        if (infected) {
            if (!(Ij > rec.negative_test[j]))
                return kNegInf;
            if (rec.visit_detected[j])
                total += log_tail(inst.sp, rec.N[j] - Ij);
            else if (rec.N[j] <= rec.t_obs)
                total += log_density(inst.sp, rec.N[j] - Ij);
            else
                total += log_tail(inst.sp, rec.t_obs - Ij);
        }
        if (j == kappa)
            continue;

        // Per-contact terms; contacts after infection carry no information.
        bool by_contact = false;
        double escape_at_infection = 1.0;
        for (const auto& ev : inbound[j]) {
            const Id i = ev.source;
            const double s = inst.params.eta[static_cast<std::size_t>(inst.pop.production_type(j) - 1)];
            const double pk = inst.params.p[ev.channel == Channel::FM ? 0 : 1];
            const bool live = rec.I[i] < ev.time && ev.time < rec.N[i];
            const double pt = live ? logistic(inst.ip, ev.time - rec.I[i]) * s * pk : 0.0;
            if (ev.time < Ij) {
                total += std::log(1.0 - pt);
            } else if (ev.time == Ij) {
                by_contact = true;
                escape_at_infection *= 1.0 - pt;
            }
        }
        if (by_contact) {
            if (escape_at_infection >= 1.0)
                return kNegInf;
            total += std::log(1.0 - escape_at_infection);
        } else if (infected) {
            const double rate = lambda(j, Ij);
            if (!(rate > 0.0))
                return kNegInf;
            total += std::log(rate);
        }

        // Unobserved exposure as a product over bins.
        const double h = std::min(Ij, rec.t_obs);
        for (std::size_t k = 0;; ++k) {
            const double a = t0 + static_cast<double>(k) * delta;
            if (!(a < h))
                break;
            const double b = std::min(h, t0 + static_cast<double>(k + 1) * delta);
            const double width = b - a;
            total += std::log1p(-width * lambda(j, a + 0.5 * width));
        }
    }
    return total;
}

double richardson_log_lik(const Instance& inst, bool traced, double delta)
{
    const double coarse = discretised_log_lik(inst, traced, delta);
    const double fine = discretised_log_lik(inst, traced, 0.5 * delta);
    if (!std::isfinite(coarse) || !std::isfinite(fine))
        return fine;
    return 2.0 * fine - coarse;
}

} // namespace epitrace::testing
