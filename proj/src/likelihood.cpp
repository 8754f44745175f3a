#include "epitrace/likelihood.hpp"

#include "epitrace/errors.hpp"
#include "epitrace/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace epitrace {

const char* infeasibility_name(Infeasibility r)
{
    switch (r) {
    case Infeasibility::None: return "none";
    case Infeasibility::ZeroRate: return "zero-rate";
    case Infeasibility::InconsistentState: return "inconsistent-state";
    case Infeasibility::NegativeTest: return "negative-test";
    case Infeasibility::OutOfSupport: return "out-of-support";
    }
    return "?";
}

// ---------------------------------------------------------- ContactTraceSet

ContactTraceSet::ContactTraceSet(std::size_t n, double window_length)
    : window_(window_length), start_(n, kInf), end_(n, kInf), in_offsets_(n + 1, 0), out_offsets_(n + 1, 0)
{
    if (!(window_length > 0.0))
        throw DomainError("tracing window must be positive");
}

ContactTraceSet::ContactTraceSet(std::size_t n, double window_length,
                                 const std::vector<std::pair<Id, double>>& traced,
                                 std::vector<ContactEvent> events)
    : ContactTraceSet(n, window_length)
{
    for (auto [j, notified] : traced) {
        if (j >= n)
            throw UnknownId("traced id out of range");
        if (!std::isfinite(notified))
            throw ValidationError("traced individual " + std::to_string(j) + " has no notification time");
        start_[j] = notified - window_length;
        end_[j] = notified;
    }
    std::sort(events.begin(), events.end());
    events.erase(std::unique(events.begin(), events.end()), events.end());
    for (const auto& ev : events) {
        if (ev.source >= n || ev.dest >= n)
            throw UnknownId("contact endpoint out of range");
        if (ev.source == ev.dest)
            throw ValidationError("contact from an individual to itself");
        if (ev.channel != Channel::FM && ev.channel != Channel::SH)
            throw ValidationError("only frequency-network contacts can be traced");
        if (!observed(ev.source, ev.dest, ev.time))
            throw ValidationError("contact at " + std::to_string(ev.time) + " lies outside every tracing window");
    }
    events_ = std::move(events);

    auto build = [&](std::vector<std::size_t>& offsets, std::vector<std::size_t>& index, auto key) {
        for (const auto& ev : events_)
            ++offsets[key(ev) + 1];
        std::partial_sum(offsets.begin(), offsets.end(), offsets.begin());
        index.resize(events_.size());
        std::vector<std::size_t> order(events_.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return events_[a].time < events_[b].time; });
        auto fill = offsets;
        for (auto k : order)
            index[fill[key(events_[k])]++] = k;
    };
    build(in_offsets_, in_index_, [](const ContactEvent& ev) { return ev.dest; });
    build(out_offsets_, out_index_, [](const ContactEvent& ev) { return ev.source; });
}

bool ContactTraceSet::traced(Id j) const
{
    return end_[j] < kInf;
}

std::optional<Interval> ContactTraceSet::window(Id j) const
{
    if (j >= start_.size())
        throw UnknownId("individual index " + std::to_string(j) + " out of range");
    if (!traced(j))
        return std::nullopt;
    return Interval{start_[j], end_[j]};
}

std::size_t ContactTraceSet::traced_count() const
{
    return static_cast<std::size_t>(std::count_if(end_.begin(), end_.end(), [](double v) { return v < kInf; }));
}

std::span<const std::size_t> ContactTraceSet::inbound(Id j) const
{
    return {in_index_.data() + in_offsets_[j], in_offsets_[j + 1] - in_offsets_[j]};
}

std::span<const std::size_t> ContactTraceSet::outbound(Id i) const
{
    return {out_index_.data() + out_offsets_[i], out_offsets_[i + 1] - out_offsets_[i]};
}

void ContactTraceSet::validate(const EpidemicRecord& rec) const
{
    if (rec.size() != start_.size())
        throw ValidationError("contact-trace set and record sizes differ");
    for (Id j = 0; j < start_.size(); ++j) {
        if (!traced(j))
            continue;
        if (!(rec.N[j] <= rec.t_obs))
            throw ValidationError("individual " + std::to_string(j) + " is traced but not notified by t_obs");
        if (end_[j] != rec.N[j])
            throw ValidationError("tracing window of " + std::to_string(j) + " does not end at notification");
    }
}

std::optional<Interval> window_of(const ContactTraceSet& cts, Id j)
{
    return cts.window(j);
}

// ------------------------------------------------------------ Kernel pieces

namespace {

// Ramp integral of source i over its pre-notified phase, from I_i up to `upper`.
double exposure_ramp(const InfectivityParams& ip, double I, double N, double upper)
{
    if (!(I < upper))
        return 0.0;
    return ip.ramp_integral(0.0, std::min(N, upper) - I);
}

double notified_time(double N, double R, double upper)
{
    return std::max(0.0, std::min(R, upper) - N);
}

// Part of exposure_ramp lying inside the reporting windows of src or dst.
double observed_ramp(const InfectivityParams& ip, const ContactTraceSet& cts, Id src, Id dst, double I, double N,
                     double upper)
{
    const double hi = std::min(N, upper);
    if (!(I < hi))
        return 0.0;
    double seg[2][2];
    int k = 0;
    for (Id who : {src, dst}) {
        auto w = cts.window(who);
        if (!w)
            continue;
        const double a = std::max(w->begin, I), b = std::min(w->end, hi);
        if (a < b) {
            seg[k][0] = a;
            seg[k][1] = b;
            ++k;
        }
    }
    if (k == 2 && seg[1][0] <= seg[0][1] && seg[0][0] <= seg[1][1]) {
        seg[0][0] = std::min(seg[0][0], seg[1][0]);
        seg[0][1] = std::max(seg[0][1], seg[1][1]);
        k = 1;
    }
    double sum = 0.0;
    for (int m = 0; m < k; ++m)
        sum += ip.ramp_integral(seg[m][0] - I, seg[m][1] - I);
    return sum;
}

// Infectivity of a source at a reported contact: only pre-notified sources
// transmit along networks.
double contact_infectivity(const InfectivityParams& ip, double I, double N, double t)
{
    return (I < t && t < N) ? ip.ramp(t - I) : 0.0;
}

double pre_notified_at(const InfectivityParams& ip, double I, double N, double t)
{
    return (I < t && t <= N) ? ip.ramp(t - I) : 0.0;
}

bool notified_at(double N, double R, double t)
{
    return N < t && t <= R;
}

bool has_contact_at(const ContactTraceSet& cts, Id j, double t)
{
    for (auto k : cts.inbound(j)) {
        const double tc = cts.events()[k].time;
        if (tc == t)
            return true;
        if (tc > t)
            break;
    }
    return false;
}

LogValue sojourn_term(const SojournParams& sp, const EpidemicRecord& rec, Id j)
{
    const double I = rec.I[j];
    if (!(I > rec.negative_test[j]))
        return LogValue::impossible(Infeasibility::NegativeTest);
    if (rec.visit_detected[j]) {
        if (!(rec.N[j] > I))
            return LogValue::impossible(Infeasibility::OutOfSupport);
        return {sp.log_survival(rec.N[j] - I)};
    }
    if (rec.N[j] <= rec.t_obs) {
        if (!(rec.N[j] > I))
            return LogValue::impossible(Infeasibility::OutOfSupport);
        return {sp.log_pdf(rec.N[j] - I)};
    }
    return {sp.log_survival(rec.t_obs - I)};
}

// Window term given the infectivity of each inbound event's source.
template <class SourceQ>
LogValue geometric_sum(const ContactTraceSet& cts, const TransmissionParams& params, double s, double Ij, Id j,
                       SourceQ&& q_of)
{
    double sum = 0.0, escape_all = 1.0;
    bool tie = false;
    for (auto k : cts.inbound(j)) {
        const auto& ev = cts.events()[k];
        if (ev.time > Ij)
            break;
        const double p = q_of(k, ev) * s * params.contact_probability(ev.channel);
        if (ev.time < Ij) {
            sum += std::log1p(-p);
        } else {
            escape_all *= 1.0 - p;
            tie = true;
        }
    }
    if (tie) {
        const double infect = 1.0 - escape_all;
        if (!(infect > 0.0))
            return LogValue::impossible(Infeasibility::InconsistentState);
        sum += std::log(infect);
    }
    return {sum};
}

void check_inputs(const Population& pop, const TransmissionParams& params, const EpidemicRecord& rec,
                  const ContactTraceSet& cts)
{
    params.validate();
    if (rec.size() != pop.size())
        throw ValidationError("epidemic record size differs from population size");
    if (!std::isfinite(rec.t_obs))
        throw DomainError("likelihood needs a finite observation time");
    for (Id j = 0; j < rec.size(); ++j)
        if (std::isnan(rec.I[j]))
            throw ValidationError("individual " + std::to_string(j) + " has a latent infection time");
    rec.validate_structure();
    if (cts.population_size() != pop.size())
        throw ValidationError("contact-trace set size differs from population size");
    cts.validate(rec);
}

LogValue evaluate(const Population& pop, const TransmissionParams& params, const InfectivityParams& ip,
                  const SojournParams& sp, const EpidemicRecord& rec, const ContactTraceSet& cts,
                  EvalOptions options)
{
    check_inputs(pop, params, rec, cts);
    const auto kappa = rec.index_case();
    if (!kappa)
        return {0.0};
    std::vector<Id> infected;
    for (Id j = 0; j < rec.size(); ++j)
        if (rec.I[j] < kInf)
            infected.push_back(j);

    const double Ik = rec.I[*kappa];
    const auto& net = pop.networks();
    std::vector<LogValue> term(pop.size());

    auto individual = [&](Id j) -> LogValue {
        const double Ij = rec.I[j];
        const bool inf = Ij < kInf;
        const double s = params.susceptibility(pop.production_type(j));
        double sum = 0.0;
        if (inf) {
            auto soj = sojourn_term(sp, rec, j);
            if (!soj.feasible())
                return soj;
            sum += soj.value;
        }
        if (j != *kappa) {
            const double ej = inf ? Ij : rec.t_obs;
            double spatial = 0.0, network = 0.0;
            for (Id i : infected) {
                if (i == j || !(rec.I[i] < ej))
                    continue;
                const double A = exposure_ramp(ip, rec.I[i], rec.N[i], ej);
                const double B = notified_time(rec.N[i], rec.R[i], ej);
                spatial += spatial_kernel(params.psi, euclidean_distance(pop, i, j)) * (A + params.gamma * B);
            }
            for (auto ch : {Channel::FM, Channel::SH}) {
                const auto& layer = net.frequency(ch);
                const double p = params.contact_probability(ch);
                for (auto e : layer.in_edges(j)) {
                    const Id i = layer.edge(e).src;
                    if (!(rec.I[i] < ej))
                        continue;
                    const double A = exposure_ramp(ip, rec.I[i], rec.N[i], ej);
                    const double seen = observed_ramp(ip, cts, i, j, rec.I[i], rec.N[i], ej);
                    network += p * layer.edge(e).rate * (A - seen);
                }
            }
            for (Id i : net.company.neighbours(j))
                if (rec.I[i] < ej)
                    network += params.beta[0] * exposure_ramp(ip, rec.I[i], rec.N[i], ej);
            sum -= params.epsilon * (ej - Ik) + s * (network + params.beta[1] * spatial);

            if (inf && !has_contact_at(cts, j, Ij)) {
                double rate_spatial = 0.0, rate_network = 0.0;
                for (Id i : infected) {
                    if (i == j)
                        continue;
                    const double k = spatial_kernel(params.psi, euclidean_distance(pop, i, j));
                    rate_spatial += k * pre_notified_at(ip, rec.I[i], rec.N[i], Ij);
                    if (notified_at(rec.N[i], rec.R[i], Ij))
                        rate_spatial += params.gamma * k;
                }
                for (auto ch : {Channel::FM, Channel::SH}) {
                    const auto& layer = net.frequency(ch);
                    const double p = params.contact_probability(ch);
                    for (auto e : layer.in_edges(j)) {
                        const Id i = layer.edge(e).src;
                        if (!cts.observed(i, j, Ij))
                            rate_network += p * layer.edge(e).rate * pre_notified_at(ip, rec.I[i], rec.N[i], Ij);
                    }
                }
                for (Id i : net.company.neighbours(j))
                    rate_network += params.beta[0] * pre_notified_at(ip, rec.I[i], rec.N[i], Ij);
                const double rate = params.epsilon + s * (rate_network + params.beta[1] * rate_spatial);
                if (!(rate > 0.0))
                    return LogValue::impossible(Infeasibility::ZeroRate);
                sum += std::log(rate);
            }
        }
        auto geo = geometric_sum(cts, params, s, Ij, j, [&](std::size_t, const ContactEvent& ev) {
            return contact_infectivity(ip, rec.I[ev.source], rec.N[ev.source], ev.time);
        });
        if (!geo.feasible())
            return geo;
        return {sum + geo.value};
    };

    parallel_for(pop.size(), options.threads, [&](std::size_t b, std::size_t e) {
        for (std::size_t j = b; j < e; ++j)
            term[j] = individual(j);
    });

    double total = 0.0;
    for (const auto& t : term) {
        if (!t.feasible())
            return t;
        total += t.value;
    }
    return {total};
}

} // namespace

LogValue geometric_window_logterm(const ContactTraceSet& cts, const Population& pop,
                                  const TransmissionParams& params, const InfectivityParams& ip,
                                  const EpidemicRecord& rec, Id j)
{
    pop.check_id(j);
    const double s = params.susceptibility(pop.production_type(j));
    return geometric_sum(cts, params, s, rec.I[j], j, [&](std::size_t, const ContactEvent& ev) {
        return contact_infectivity(ip, rec.I[ev.source], rec.N[ev.source], ev.time);
    });
}

LogValue log_lik_ct(const Population& pop, const TransmissionParams& params, const InfectivityParams& ip,
                    const SojournParams& sp, const EpidemicRecord& rec, const ContactTraceSet& cts,
                    EvalOptions options)
{
    return evaluate(pop, params, ip, sp, rec, cts, options);
}

LogValue log_lik_vanilla(const Population& pop, const TransmissionParams& params, const InfectivityParams& ip,
                         const SojournParams& sp, const EpidemicRecord& rec, EvalOptions options)
{
    const ContactTraceSet none(pop.size());
    return evaluate(pop, params, ip, sp, rec, none, options);
}

// -------------------------------------------------------------------- Prior

double GammaPrior::log_pdf(double x) const
{
    if (!(x > 0.0) || !std::isfinite(x))
        return -kInf;
    return shape * std::log(rate) - std::lgamma(shape) + (shape - 1.0) * std::log(x) - rate * x;
}

double BetaPrior::log_pdf(double x) const
{
    if (!(x >= 0.0 && x <= 1.0))
        return -kInf;
    const double norm = std::lgamma(alpha + beta) - std::lgamma(alpha) - std::lgamma(beta);
    double v = norm;
    if (alpha != 1.0)
        v += (alpha - 1.0) * std::log(x);
    if (beta != 1.0)
        v += (beta - 1.0) * std::log1p(-x);
    return v;
}

double log_prior(const TransmissionParams& params, const PriorSpec& prior)
{
    if (!params.valid())
        return -kInf;
    double v = prior.epsilon.log_pdf(params.epsilon);
    v += prior.p[0].log_pdf(params.p[0]) + prior.p[1].log_pdf(params.p[1]);
    v += prior.beta[0].log_pdf(params.beta[0]) + prior.beta[1].log_pdf(params.beta[1]);
    v += prior.gamma.log_pdf(params.gamma);
    v += prior.psi.log_pdf(params.psi);
    for (std::size_t k = 1; k < kProductionTypes; ++k)
        v += prior.eta[k - 1].log_pdf(params.eta[k]);
    return v;
}

// ---------------------------------------------------- IncrementalLikelihood

struct IncrementalLikelihood::Row
{
    std::vector<double> distance, kernel, kernel_alt;
    std::vector<double> exposure, notified, rate, rate_notified; // A, B, QA, QB per target
    double psi = std::numeric_limits<double>::quiet_NaN();
    double psi_alt = std::numeric_limits<double>::quiet_NaN();
};

IncrementalLikelihood::IncrementalLikelihood(const Population& pop, const ContactTraceSet& cts,
                                             InfectivityParams ip, SojournParams sp, EpidemicRecord rec,
                                             TransmissionParams params, WorkerPool* pool)
    : pop_(pop), cts_(cts), ip_(ip), sp_(sp), rec_(std::move(rec)), params_(params), pool_(pool), n_(pop.size())
{
    check_inputs(pop_, params_, rec_, cts_);
    rows_.resize(n_);
    contact_.assign(n_, 0);
    for (auto* v : {&ex_fm_, &ex_sh_, &ex_cp_, &rt_fm_, &rt_sh_, &rt_cp_, &geo_, &geo_alt_})
        v->assign(n_, 0.0);
    for (auto* a : {&agg_, &agg_alt_})
        for (auto* v : {&a->exposure_spatial, &a->exposure_notified, &a->rate_spatial, &a->rate_notified})
            v->assign(n_, 0.0);
    event_q_.assign(cts_.events().size(), 0.0);
    rebuild();
}

IncrementalLikelihood::~IncrementalLikelihood() = default;

double IncrementalLikelihood::e(Id j) const
{
    return rec_.I[j] < kInf ? rec_.I[j] : rec_.t_obs;
}

void IncrementalLikelihood::put(double& slot, double v)
{
    if (open_)
        undo_.emplace_back(&slot, slot);
    slot = v;
}

IncrementalLikelihood::Row& IncrementalLikelihood::row(Id i)
{
    auto& r = rows_[i];
    if (!r) {
        r = std::make_unique<Row>();
        r->distance.resize(n_);
        const auto& a = pop_.individual(i).location;
        for (Id j = 0; j < n_; ++j) {
            const auto& b = pop_.individual(j).location;
            r->distance[j] = std::hypot(a.x - b.x, a.y - b.y);
        }
        for (auto* v : {&r->kernel, &r->kernel_alt, &r->exposure, &r->notified, &r->rate, &r->rate_notified})
            v->assign(n_, 0.0);
    }
    return *r;
}

void IncrementalLikelihood::refresh_kernel(Row& r)
{
    if (r.psi == params_.psi)
        return;
    for (Id j = 0; j < n_; ++j)
        r.kernel[j] = spatial_kernel(params_.psi, r.distance[j]);
    r.psi = params_.psi;
}

void IncrementalLikelihood::set_pair(Row& r, Id i, Id j)
{
    double A = 0.0, B = 0.0, QA = 0.0, QB = 0.0;
    if (i != j) {
        const double I = rec_.I[i], N = rec_.N[i], R = rec_.R[i];
        const double ej = e(j);
        A = exposure_ramp(ip_, I, N, ej);
        B = notified_time(N, R, ej);
        if (rec_.I[j] < kInf) {
            QA = pre_notified_at(ip_, I, N, rec_.I[j]);
            QB = notified_at(N, R, rec_.I[j]) ? 1.0 : 0.0;
        }
    }
    put(r.exposure[j], A);
    put(r.notified[j], B);
    put(r.rate[j], QA);
    put(r.rate_notified[j], QB);
}

// Moves the row of s from its previous contribution to its current one.
void IncrementalLikelihood::fill_row(Id s)
{
    // Called after rec_.I[s] changed; tx_old_time_ tells whether the old row counted.
    const bool was = tx_old_time_ < kInf;
    const bool now = rec_.I[s] < kInf;
    Row& r = row(s);
    if (now)
        refresh_kernel(r);
    for (Id j = 0; j < n_; ++j) {
        double A0 = 0, B0 = 0, Q0 = 0, P0 = 0;
        if (was) {
            A0 = r.exposure[j];
            B0 = r.notified[j];
            Q0 = r.rate[j];
            P0 = r.rate_notified[j];
        }
        double A1 = 0, B1 = 0, Q1 = 0, P1 = 0;
        if (now) {
            set_pair(r, s, j);
            A1 = r.exposure[j];
            B1 = r.notified[j];
            Q1 = r.rate[j];
            P1 = r.rate_notified[j];
        }
        const double k = r.kernel[j];
        if (A1 != A0)
            put(agg_.exposure_spatial[j], agg_.exposure_spatial[j] + k * (A1 - A0));
        if (B1 != B0)
            put(agg_.exposure_notified[j], agg_.exposure_notified[j] + k * (B1 - B0));
        if (Q1 != Q0)
            put(agg_.rate_spatial[j], agg_.rate_spatial[j] + k * (Q1 - Q0));
        if (P1 != P0)
            put(agg_.rate_notified[j], agg_.rate_notified[j] + k * (P1 - P0));
    }
}

void IncrementalLikelihood::refresh_column(Id s)
{
    double es = 0.0, en = 0.0, rs = 0.0, rn = 0.0;
    for (Id i : infected_) {
        Row& r = *rows_[i];
        set_pair(r, i, s);
        const double k = r.kernel[s];
        es += k * r.exposure[s];
        en += k * r.notified[s];
        rs += k * r.rate[s];
        rn += k * r.rate_notified[s];
    }
    put(agg_.exposure_spatial[s], es);
    put(agg_.exposure_notified[s], en);
    put(agg_.rate_spatial[s], rs);
    put(agg_.rate_notified[s], rn);
}

void IncrementalLikelihood::refresh_network(Id j)
{
    const auto& net = pop_.networks();
    const bool inf = rec_.I[j] < kInf;
    const double ej = e(j);
    double ex[2] = {0.0, 0.0}, rt[2] = {0.0, 0.0};
    for (int c = 0; c < 2; ++c) {
        const auto& layer = net.frequency(c == 0 ? Channel::FM : Channel::SH);
        for (auto edge : layer.in_edges(j)) {
            const Id i = layer.edge(edge).src;
            if (!(rec_.I[i] < kInf))
                continue;
            const Row& r = *rows_[i];
            const double rate = layer.edge(edge).rate;
            ex[c] += rate * (r.exposure[j] - observed_ramp(ip_, cts_, i, j, rec_.I[i], rec_.N[i], ej));
            if (inf && !cts_.observed(i, j, rec_.I[j]))
                rt[c] += rate * r.rate[j];
        }
    }
    double ex_cp = 0.0, rt_cp = 0.0;
    for (Id i : net.company.neighbours(j)) {
        if (!(rec_.I[i] < kInf))
            continue;
        ex_cp += rows_[i]->exposure[j];
        rt_cp += rows_[i]->rate[j];
    }
    put(ex_fm_[j], ex[0]);
    put(ex_sh_[j], ex[1]);
    put(rt_fm_[j], rt[0]);
    put(rt_sh_[j], rt[1]);
    put(ex_cp_[j], ex_cp);
    put(rt_cp_[j], rt_cp);
}

void IncrementalLikelihood::refresh_event_infectivity(Id src)
{
    for (auto k : cts_.outbound(src)) {
        const double t = cts_.events()[k].time;
        put(event_q_[k], contact_infectivity(ip_, rec_.I[src], rec_.N[src], t));
    }
}

double IncrementalLikelihood::geometric(Id j, const TransmissionParams& p, bool* inconsistent) const
{
    const double s = p.susceptibility(pop_.production_type(j));
    auto v = geometric_sum(cts_, p, s, rec_.I[j], j,
                           [&](std::size_t k, const ContactEvent&) { return event_q_[k]; });
    if (inconsistent)
        *inconsistent = !v.feasible();
    return v.value;
}

void IncrementalLikelihood::resum_spatial(const TransmissionParams& p, Aggregates& out, bool into_alt)
{
    for (Id i : infected_) {
        Row& r = row(i);
        (into_alt ? r.psi_alt : r.psi) = p.psi;
    }
    auto body = [&](std::size_t b, std::size_t end) {
        for (std::size_t j = b; j < end; ++j) {
            out.exposure_spatial[j] = 0.0;
            out.exposure_notified[j] = 0.0;
            out.rate_spatial[j] = 0.0;
            out.rate_notified[j] = 0.0;
        }
        for (Id i : infected_) {
            Row& r = *rows_[i];
            auto& kern = into_alt ? r.kernel_alt : r.kernel;
            for (std::size_t j = b; j < end; ++j) {
                const double k = std::exp(-p.psi * (r.distance[j] - kSpatialCentreKm));
                kern[j] = k;
                out.exposure_spatial[j] += k * r.exposure[j];
                out.exposure_notified[j] += k * r.notified[j];
                out.rate_spatial[j] += k * r.rate[j];
                out.rate_notified[j] += k * r.rate_notified[j];
            }
        }
    };
    if (pool_)
        pool_->run(n_, body);
    else
        body(0, n_);
}

LogValue IncrementalLikelihood::total(const TransmissionParams& p, const Aggregates& agg,
                                      const std::vector<double>& geo) const
{
    if (!kappa_)
        return {0.0};
    const Id kappa = *kappa_;
    const double Ik = rec_.I[kappa];
    double sum = 0.0;
    for (Id j = 0; j < n_; ++j) {
        const double s = p.susceptibility(pop_.production_type(j));
        if (rec_.I[j] < kInf) {
            auto soj = sojourn_term(sp_, rec_, j);
            if (!soj.feasible())
                return soj;
            sum += soj.value;
            if (j != kappa && !contact_[j]) {
                const double rate =
                    p.epsilon + s * (p.p[0] * rt_fm_[j] + p.p[1] * rt_sh_[j] + p.beta[0] * rt_cp_[j] +
                                     p.beta[1] * (agg.rate_spatial[j] + p.gamma * agg.rate_notified[j]));
                if (!(rate > 0.0))
                    return LogValue::impossible(Infeasibility::ZeroRate);
                sum += std::log(rate);
            }
        }
        if (j != kappa) {
            sum -= p.epsilon * (e(j) - Ik) +
                   s * (p.p[0] * ex_fm_[j] + p.p[1] * ex_sh_[j] + p.beta[0] * ex_cp_[j] +
                        p.beta[1] * (agg.exposure_spatial[j] + p.gamma * agg.exposure_notified[j]));
        }
        if (geo[j] == -kInf)
            return LogValue::impossible(Infeasibility::InconsistentState);
        sum += geo[j];
    }
    return {sum};
}

void IncrementalLikelihood::recompute_index_case()
{
    kappa_.reset();
    for (Id i : infected_)
        if (!kappa_ || rec_.I[i] < rec_.I[*kappa_])
            kappa_ = i;
}

void IncrementalLikelihood::update_contact_state(Id s)
{
    contact_[s] = (rec_.I[s] < kInf && has_contact_at(cts_, s, rec_.I[s])) ? 1 : 0;
}

void IncrementalLikelihood::rebuild()
{
    if (open_)
        throw Error("rebuild inside an open transaction");
    infected_.clear();
    for (Id j = 0; j < n_; ++j)
        if (rec_.I[j] < kInf)
            infected_.push_back(j);
    recompute_index_case();
    for (Id i : infected_) {
        Row& r = row(i);
        for (Id j = 0; j < n_; ++j)
            set_pair(r, i, j);
    }
    resum_spatial(params_, agg_, false);
    for (Id j = 0; j < n_; ++j)
        refresh_network(j);
    for (Id i = 0; i < n_; ++i)
        refresh_event_infectivity(i);
    for (Id j = 0; j < n_; ++j) {
        update_contact_state(j);
        geo_[j] = geometric(j, params_, nullptr);
    }
    value_ = total(params_, agg_, geo_);
    candidate_ready_ = false;
}

LogValue IncrementalLikelihood::evaluate_params(const TransmissionParams& candidate)
{
    if (open_)
        throw Error("parameter update inside an open transaction");
    candidate_ = candidate;
    candidate_ready_ = true;
    if (!candidate.valid()) {
        candidate_value_ = LogValue::impossible(Infeasibility::OutOfSupport);
        return candidate_value_;
    }
    resum_spatial(candidate, agg_alt_, true);
    for (Id j = 0; j < n_; ++j)
        geo_alt_[j] = cts_.inbound(j).empty() ? 0.0 : geometric(j, candidate, nullptr);
    candidate_value_ = total(candidate, agg_alt_, geo_alt_);
    return candidate_value_;
}

void IncrementalLikelihood::accept_params()
{
    if (!candidate_ready_ || !candidate_value_.feasible())
        throw Error("accept_params without a feasible evaluated candidate");
    params_ = candidate_;
    std::swap(agg_, agg_alt_);
    std::swap(geo_, geo_alt_);
    for (Id i : infected_) {
        Row& r = *rows_[i];
        std::swap(r.kernel, r.kernel_alt);
        r.psi = r.psi_alt;
    }
    value_ = candidate_value_;
    candidate_ready_ = false;
}

LogValue IncrementalLikelihood::propose_infection(Id s, double t)
{
    if (open_)
        throw Error("nested infection proposal");
    if (s >= n_)
        throw UnknownId("individual index out of range");
    if (!(t <= rec_.t_obs) && t != kInf)
        throw DomainError("infection time after observation time");
    if (t == kInf && rec_.N[s] < kInf)
        throw DomainError("cannot remove the infection of a notified individual");
    candidate_ready_ = false;
    open_ = true;
    undo_.clear();
    tx_id_ = s;
    tx_old_time_ = rec_.I[s];
    tx_old_contact_ = contact_[s];
    tx_old_kappa_ = kappa_;
    tx_old_value_ = value_;

    const bool was = tx_old_time_ < kInf, now = t < kInf;
    rec_.I[s] = t;
    if (was != now) {
        auto it = std::lower_bound(infected_.begin(), infected_.end(), s);
        if (now)
            infected_.insert(it, s);
        else
            infected_.erase(it);
    }
    fill_row(s);
    refresh_column(s);

    const auto& net = pop_.networks();
    refresh_network(s);
    for (auto ch : {Channel::FM, Channel::SH}) {
        const auto& layer = net.frequency(ch);
        for (auto edge : layer.out_edges(s))
            refresh_network(layer.edge(edge).dst);
    }
    for (Id j : net.company.neighbours(s))
        refresh_network(j);

    refresh_event_infectivity(s);
    for (auto k : cts_.outbound(s)) {
        const Id j = cts_.events()[k].dest;
        put(geo_[j], geometric(j, params_, nullptr));
    }
    update_contact_state(s);
    put(geo_[s], geometric(s, params_, nullptr));
    recompute_index_case();
    value_ = total(params_, agg_, geo_);
    return value_;
}

void IncrementalLikelihood::commit()
{
    if (!open_)
        throw Error("commit without an open transaction");
    open_ = false;
    undo_.clear();
}

void IncrementalLikelihood::rollback()
{
    if (!open_)
        throw Error("rollback without an open transaction");
    for (auto it = undo_.rbegin(); it != undo_.rend(); ++it)
        *it->first = it->second;
    undo_.clear();
    const Id s = tx_id_;
    const bool now = rec_.I[s] < kInf, was = tx_old_time_ < kInf;
    rec_.I[s] = tx_old_time_;
    if (was != now) {
        auto it = std::lower_bound(infected_.begin(), infected_.end(), s);
        if (was)
            infected_.insert(it, s);
        else
            infected_.erase(it);
    }
    contact_[s] = tx_old_contact_;
    kappa_ = tx_old_kappa_;
    value_ = tx_old_value_;
    open_ = false;
}

std::vector<double> IncrementalLikelihood::candidate_contacts(Id s) const
{
    std::vector<double> out;
    for (auto k : cts_.inbound(s)) {
        const auto& ev = cts_.events()[k];
        const double t = ev.time;
        if (!(t < rec_.N[s]) || !(t <= rec_.t_obs) || !(t > rec_.negative_test[s]))
            continue;
        if (contact_infectivity(ip_, rec_.I[ev.source], rec_.N[ev.source], t) > 0.0)
            out.push_back(t);
    }
    out.erase(std::unique(out.begin(), out.end()), out.end()); // inbound() is time-ordered
    return out;
}

LogValue IncrementalLikelihood::recompute() const
{
    return log_lik_ct(pop_, params_, ip_, sp_, rec_, cts_);
}

} // namespace epitrace
