#include "epitrace/simulator.hpp"

#include "epitrace/errors.hpp"

#include <algorithm>
#include <cmath>

namespace epitrace {

namespace {

constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

double unit(std::uint64_t bits)
{
    return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

} // namespace

double RemovalDelay::draw(Rng& rng) const
{
    return kind == Kind::Fixed ? days : rng.exponential(1.0 / days);
}

void SimConfig::validate() const
{
    true_params.validate();
    infectivity.validate();
    sojourn.validate();
    if (!(ct_window > 0.0))
        throw ConfigError("contact-tracing window must be positive");
    if (!(removal.days >= 0.0) || (removal.kind == RemovalDelay::Kind::Exponential && !(removal.days > 0.0)))
        throw ConfigError("removal delay must be non-negative");
    if (!(t_max > 0.0))
        throw ConfigError("t_max must be positive");
}

// ------------------------------------------------------ OutbreakSimulation

OutbreakSimulation::OutbreakSimulation(const Population& pop, SimConfig config, Rng rng)
    : pop_(&pop), config_(std::move(config)), rng_(rng), rec_(pop.size())
{
    config_.validate();
    if (pop.size() == 0)
        throw ConfigError("population is empty");
    stream_seed_ = rng_.next();
    const auto& net = pop.networks();
    cursors_.resize(net.feedmill.size() + net.slaughterhouse.size());
    Id index;
    if (config_.index_case) {
        pop.check_id(*config_.index_case);
        index = *config_.index_case;
    } else {
        index = rng_.index(pop.size());
    }
    infect(index, 0.0, std::nullopt, std::nullopt);
}

double OutbreakSimulation::end_time() const
{
    return extinct_ ? last_removal_ : now_;
}

double OutbreakSimulation::stream_end(Id i) const
{
    return config_.contacts_stop_at_notification ? rec_.N[i] : rec_.R[i];
}

OutbreakSimulation::Cursor OutbreakSimulation::first_contact(Channel c, std::size_t e) const
{
    const std::uint64_t key = c == Channel::FM ? e : pop_->networks().feedmill.size() + e;
    Cursor cur{mix64(stream_seed_ ^ mix64(key + 1)), -config_.ct_window, 0.0};
    step(cur, c, e);
    return cur;
}

void OutbreakSimulation::step(Cursor& cur, Channel c, std::size_t e) const
{
    const double rate = pop_->networks().frequency(c).edge(e).rate;
    cur.state += kGolden;
    cur.time += -std::log(unit(mix64(cur.state))) / rate;
    cur.state += kGolden;
    cur.u = unit(mix64(cur.state));
}

template <class F>
void OutbreakSimulation::for_each_contact(Channel c, std::size_t e, double begin, double end, F&& f) const
{
    const RateEdge& edge = pop_->networks().frequency(c).edge(e);
    end = std::min({end, now_, stream_end(edge.src)});
    for (Cursor cur = first_contact(c, e); cur.time < end; step(cur, c, e))
        if (cur.time >= begin)
            f(edge, cur.time);
}

void OutbreakSimulation::infect(Id j, double t, std::optional<Channel> channel, std::optional<Id> source)
{
    rec_.I[j] = t;
    rec_.N[j] = t + config_.sojourn.quantile(rng_.uniform());
    rec_.R[j] = rec_.N[j] + config_.removal.draw(rng_);
    attribution_.push_back({j, channel, source, t});
    ++active_;
    queue_.push({rec_.R[j], 1, j});
    const auto& net = pop_->networks();
    for (Channel c : {Channel::FM, Channel::SH}) {
        const std::uint64_t offset = c == Channel::FM ? 0 : net.feedmill.size();
        for (std::size_t e : net.frequency(c).out_edges(j)) {
            Cursor cur = first_contact(c, e);
            while (cur.time <= t)
                step(cur, c, e);
            cursors_[offset + e] = cur;
            if (cur.time < stream_end(j))
                queue_.push({cur.time, 0, offset + e});
        }
    }
    add_source(j);
    redraw();
}

// Dominating rate for i -> j uses q <= 1 and max(1, gamma) so it covers both
// the pre-notification and the notified phase.
void OutbreakSimulation::add_source(Id i)
{
    const auto& p = config_.true_params;
    const auto& company = pop_->networks().company;
    const double gmax = std::max(1.0, p.gamma);
    Source src{i, 0.0, std::vector<double>(pop_->size())};
    double acc = 0.0;
    for (Id j = 0; j < pop_->size(); ++j) {
        if (j != i) {
            const double s = p.susceptibility(pop_->production_type(j));
            const double cp = company.connected(i, j) ? p.beta[0] : 0.0;
            acc += s * (cp + gmax * p.beta[1] * spatial_kernel(p.psi, euclidean_distance(*pop_, i, j)));
        }
        src.cumulative[j] = acc;
    }
    src.total = acc;
    sources_.push_back(std::move(src));
}

void OutbreakSimulation::drop_source(Id i)
{
    std::erase_if(sources_, [i](const Source& s) { return s.id == i; });
}

void OutbreakSimulation::redraw()
{
    lambda_ = config_.true_params.epsilon * static_cast<double>(pop_->size());
    for (const auto& s : sources_)
        lambda_ += s.total;
    pending_ = lambda_ > 0.0 ? now_ + rng_.exponential(lambda_) : kInf;
}

void OutbreakSimulation::fire_candidate(double t)
{
    now_ = t;
    const auto& p = config_.true_params;
    double u = rng_.uniform() * lambda_;
    const double background = p.epsilon * static_cast<double>(pop_->size());
    if (u < background) {
        const Id j = rng_.index(pop_->size());
        if (rec_.I[j] == kInf) {
            infect(j, t, Channel::Background, std::nullopt);
            return;
        }
    } else {
        u -= background;
        const Source* src = &sources_.back();
        for (const auto& s : sources_) {
            if (u < s.total) {
                src = &s;
                break;
            }
            u -= s.total;
        }
        const auto it = std::upper_bound(src->cumulative.begin(), src->cumulative.end(), u);
        const Id j = std::min<Id>(static_cast<Id>(it - src->cumulative.begin()), pop_->size() - 1);
        const Id i = src->id;
        if (j != i && rec_.I[j] == kInf) {
            const double bound = src->cumulative[j] - (j > 0 ? src->cumulative[j - 1] : 0.0);
            const double q = t < rec_.N[i] ? config_.infectivity.ramp(t - rec_.I[i]) : 1.0;
            const double s = p.susceptibility(pop_->production_type(j));
            const double spatial = q * s * p.beta[1] * spatial_kernel(p.psi, euclidean_distance(*pop_, i, j));
            double cp = 0.0, sp = 0.0;
            if (t < rec_.N[i]) {
                cp = pop_->networks().company.connected(i, j) ? q * s * p.beta[0] : 0.0;
                sp = spatial;
            } else if (t < rec_.R[i]) {
                sp = p.gamma * spatial;
            }
            const double v = rng_.uniform() * bound;
            if (v < cp) {
                infect(j, t, Channel::CP, i);
                return;
            }
            if (v < cp + sp) {
                infect(j, t, Channel::Spatial, i);
                return;
            }
        }
    }
    pending_ = t + rng_.exponential(lambda_);
}

void OutbreakSimulation::fire_contact(std::uint64_t key, double t)
{
    const auto& net = pop_->networks();
    const bool fm = key < net.feedmill.size();
    const Channel c = fm ? Channel::FM : Channel::SH;
    const std::size_t e = fm ? key : key - net.feedmill.size();
    const RateEdge& edge = net.frequency(c).edge(e);
    Cursor& cur = cursors_[key];
    const Id i = edge.src, j = edge.dst;
    if (!(t < stream_end(i)))
        return;
    now_ = t;
    const double u = cur.u;
    step(cur, c, e);
    const double next = cur.time;
    if (t < rec_.N[i] && rec_.I[j] == kInf) {
        const auto& p = config_.true_params;
        const double prob = config_.infectivity.ramp(t - rec_.I[i]) * p.susceptibility(pop_->production_type(j)) *
                            p.contact_probability(c);
        if (u < prob)
            infect(j, t, c, i);
    }
    if (next < stream_end(i))
        queue_.push({next, 0, key});
}

void OutbreakSimulation::advance_to(double t)
{
    while (!extinct_) {
        const double next_event = queue_.empty() ? kInf : queue_.top().time;
        if (pending_ <= next_event) {
            if (pending_ > t)
                break;
            fire_candidate(pending_);
            continue;
        }
        if (next_event > t)
            break;
        const Event ev = queue_.top();
        queue_.pop();
        if (ev.kind == 0) {
            fire_contact(ev.key, ev.time);
        } else if (rec_.R[ev.key] == ev.time) {
            now_ = ev.time;
            drop_source(ev.key);
            last_removal_ = ev.time;
            if (--active_ == 0)
                extinct_ = true;
            else
                redraw();
        }
    }
    now_ = std::max(now_, t);
}

bool OutbreakSimulation::visit(Id j, double t)
{
    pop_->check_id(j);
    if (t < now_)
        throw DomainError("visit time precedes the simulation clock");
    advance_to(t);
    if (rec_.I[j] <= t && rec_.N[j] > t) {
        rec_.N[j] = rec_.R[j] = t;
        rec_.visit_detected[j] = 1;
        drop_source(j);
        last_removal_ = std::max(last_removal_, t);
        if (--active_ == 0)
            extinct_ = true;
        else
            redraw();
        return true;
    }
    if (rec_.I[j] == kInf)
        rec_.negative_test[j] = std::max(rec_.negative_test[j], t);
    return false;
}

namespace {

struct InfectionKey
{
    std::vector<const Attribution*> by_id;

    explicit InfectionKey(std::size_t n, const std::vector<Attribution>& attribution) : by_id(n, nullptr)
    {
        for (const auto& a : attribution)
            by_id[a.id] = &a;
    }

    bool caused(const RateEdge& edge, Channel c, double t) const
    {
        const Attribution* a = by_id[edge.dst];
        return a && a->channel == c && a->source == edge.src && a->time == t;
    }
};

bool contact_order(const ContactRecord& a, const ContactRecord& b)
{
    return std::tie(a.time, a.source, a.dest, a.channel) < std::tie(b.time, b.source, b.dest, b.channel);
}

} // namespace

std::vector<ContactRecord> OutbreakSimulation::contact_log() const
{
    const InfectionKey key(pop_->size(), attribution_);
    std::vector<ContactRecord> out;
    for (Channel c : {Channel::FM, Channel::SH}) {
        const auto& layer = pop_->networks().frequency(c);
        for (std::size_t e = 0; e < layer.size(); ++e)
            for_each_contact(c, e, -kInf, kInf, [&](const RateEdge& edge, double t) {
                out.push_back({edge.src, edge.dst, c, t, key.caused(edge, c, t)});
            });
    }
    std::sort(out.begin(), out.end(), contact_order);
    return out;
}

std::vector<ContactRecord> OutbreakSimulation::contacts_of(Id j, double begin, double end) const
{
    pop_->check_id(j);
    const InfectionKey key(pop_->size(), attribution_);
    std::vector<ContactRecord> out;
    for (Channel c : {Channel::FM, Channel::SH}) {
        const auto& layer = pop_->networks().frequency(c);
        auto emit = [&](const RateEdge& edge, double t) {
            out.push_back({edge.src, edge.dst, c, t, key.caused(edge, c, t)});
        };
        for (std::size_t e : layer.in_edges(j))
            for_each_contact(c, e, begin, end, emit);
        for (std::size_t e : layer.out_edges(j))
            for_each_contact(c, e, begin, end, emit);
    }
    std::sort(out.begin(), out.end(), contact_order);
    return out;
}

SimResult OutbreakSimulation::result() const
{
    return {rec_, contact_log(), attribution_};
}

SimResult simulate_epidemic(const Population& pop, const SimConfig& config, Rng& rng)
{
    OutbreakSimulation sim(pop, config, Rng(rng.next()));
    sim.advance_to(config.t_max);
    return sim.result();
}

// ------------------------------------------------------------- observation

EpidemicRecord observe(const EpidemicRecord& truth, double t_obs)
{
    if (!(t_obs >= 0.0))
        throw DomainError("observation time must be non-negative");
    EpidemicRecord rec(truth.size(), t_obs);
    for (Id j = 0; j < truth.size(); ++j) {
        if (truth.negative_test[j] <= t_obs)
            rec.negative_test[j] = truth.negative_test[j];
        if (!(truth.N[j] <= t_obs))
            continue;
        rec.I[j] = std::nan("");
        rec.N[j] = truth.N[j];
        rec.R[j] = truth.R[j] <= t_obs ? truth.R[j] : kInf;
        rec.visit_detected[j] = truth.visit_detected[j];
    }
    return rec;
}

EpidemicRecord censor(const EpidemicRecord& truth, double t_obs)
{
    if (!(t_obs >= 0.0))
        throw DomainError("observation time must be non-negative");
    EpidemicRecord rec(truth.size(), t_obs);
    for (Id j = 0; j < truth.size(); ++j) {
        if (truth.negative_test[j] <= t_obs)
            rec.negative_test[j] = truth.negative_test[j];
        if (!(truth.I[j] <= t_obs))
            continue;
        rec.I[j] = truth.I[j];
        if (truth.N[j] <= t_obs) {
            rec.N[j] = truth.N[j];
            rec.R[j] = truth.R[j] <= t_obs ? truth.R[j] : kInf;
            rec.visit_detected[j] = truth.visit_detected[j];
        }
    }
    return rec;
}

namespace {

std::vector<std::pair<Id, double>> traced_cases(const EpidemicRecord& truth, double t_obs, double window, double phi,
                                                Rng& rng)
{
    if (!(window > 0.0))
        throw DomainError("tracing window must be positive");
    if (!(phi >= 0.0 && phi <= 1.0))
        throw DomainError("tracing fraction must lie in [0, 1]");
    std::vector<std::pair<Id, double>> traced;
    for (Id j = 0; j < truth.size(); ++j) {
        if (!(truth.N[j] <= t_obs))
            continue;
        const bool keep = phi >= 1.0 || (phi > 0.0 && rng.bernoulli(phi));
        if (keep)
            traced.emplace_back(j, truth.N[j]);
    }
    return traced;
}

} // namespace

ContactTraceSet extract_ctd(const OutbreakSimulation& sim, double t_obs, double window, double phi, Rng& rng)
{
    if (t_obs > sim.now())
        throw DomainError("tracing time is ahead of the simulation clock");
    const auto traced = traced_cases(sim.truth(), t_obs, window, phi, rng);
    std::vector<ContactEvent> events;
    for (const auto& [j, n] : traced)
        for (const auto& c : sim.contacts_of(j, n - window, n))
            events.push_back({c.source, c.dest, c.channel, c.time});
    return ContactTraceSet(sim.truth().size(), window, traced, std::move(events));
}

ContactTraceSet extract_ctd(const SimResult& sim, std::size_t n, double t_obs, double window, double phi, Rng& rng)
{
    if (sim.events.size() != n)
        throw DomainError("simulation record does not match the population size");
    const auto traced = traced_cases(sim.events, t_obs, window, phi, rng);
    std::vector<std::pair<double, double>> span(n, {kInf, kInf});
    for (const auto& [j, N] : traced)
        span[j] = {N - window, N};
    auto inside = [&](Id j, double t) { return span[j].first <= t && t < span[j].second; };
    std::vector<ContactEvent> events;
    for (const auto& c : sim.contact_log)
        if (inside(c.source, c.time) || inside(c.dest, c.time))
            events.push_back({c.source, c.dest, c.channel, c.time});
    return ContactTraceSet(n, window, traced, std::move(events));
}

EstimatorVariance estimator_variance(double r, double delta)
{
    if (!(r > 0.0) || !(delta > 0.0) || !std::isfinite(r * delta))
        throw DomainError("contact rate and bin width must be positive and finite");
    const double x = r * delta;
    const double inv2 = 1.0 / (x * x);
    return {inv2, inv2 - 1.0 / (x * x * x)};
}

} // namespace epitrace
