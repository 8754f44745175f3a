#include "epitrace/mcmc.hpp"

#include "epitrace/errors.hpp"
#include "epitrace/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace epitrace {

const std::array<std::string_view, kParamDim> kParamNames = {
    "epsilon", "p1",   "p2",   "beta1", "beta2", "gamma", "psi",  "eta2",
    "eta3",    "eta4", "eta5", "eta6",  "eta7",  "eta8",  "eta9", "eta10"};

namespace {

constexpr bool is_probability(std::size_t k)
{
    return k == 1 || k == 2;
}

double logit(double p)
{
    return std::log(p) - std::log1p(-p);
}

double inv_logit(double u)
{
    return u >= 0 ? 1.0 / (1.0 + std::exp(-u)) : std::exp(u) / (1.0 + std::exp(u));
}

} // namespace

std::array<double, kParamDim> pack(const TransmissionParams& p)
{
    std::array<double, kParamDim> v{p.epsilon, p.p[0], p.p[1], p.beta[0], p.beta[1], p.gamma, p.psi};
    for (std::size_t k = 1; k < kProductionTypes; ++k)
        v[6 + k] = p.eta[k];
    return v;
}

TransmissionParams unpack(const std::array<double, kParamDim>& v)
{
    TransmissionParams p;
    p.epsilon = v[0];
    p.p = {v[1], v[2]};
    p.beta = {v[3], v[4]};
    p.gamma = v[5];
    p.psi = v[6];
    p.eta[0] = 1.0;
    for (std::size_t k = 1; k < kProductionTypes; ++k)
        p.eta[k] = v[6 + k];
    return p;
}

Eigen::VectorXd to_unconstrained(const TransmissionParams& p)
{
    const auto v = pack(p);
    Eigen::VectorXd u(kParamDim);
    for (std::size_t k = 0; k < kParamDim; ++k)
        u[static_cast<Eigen::Index>(k)] = is_probability(k) ? logit(v[k]) : std::log(v[k]);
    return u;
}

TransmissionParams from_unconstrained(const Eigen::VectorXd& u)
{
    std::array<double, kParamDim> v{};
    for (std::size_t k = 0; k < kParamDim; ++k) {
        const double x = u[static_cast<Eigen::Index>(k)];
        v[k] = is_probability(k) ? inv_logit(x) : std::exp(x);
    }
    return unpack(v);
}

double log_jacobian(const TransmissionParams& p)
{
    const auto v = pack(p);
    double s = 0.0;
    for (std::size_t k = 0; k < kParamDim; ++k)
        s += is_probability(k) ? std::log(v[k]) + std::log1p(-v[k]) : std::log(v[k]);
    return s;
}

// ------------------------------------------------------- occult proposal

namespace {

struct TruncatedNormal
{
    double mean, sd, log_norm;
};

TruncatedNormal occult_normal(const SojournParams& sp)
{
    const double mean = -1.0 / sp.b;
    const double sd = 1.0 / (sp.b * std::sqrt(sp.a));
    // P(X > 0) = Phi(mean / sd)
    const double mass = 0.5 * std::erfc(-(mean / sd) / std::numbers::sqrt2);
    return {mean, sd, std::log(mass)};
}

} // namespace

double occult_proposal_log_density(const SojournParams& sp, double t)
{
    if (!(t > 0.0))
        return -kInf;
    const auto g = occult_normal(sp);
    const double z = (t - g.mean) / g.sd;
    return -0.5 * z * z - std::log(g.sd) - 0.5 * std::log(2.0 * std::numbers::pi) - g.log_norm;
}

double occult_proposal_density(const SojournParams& sp, double t)
{
    return t > 0.0 ? std::exp(occult_proposal_log_density(sp, t)) : 0.0;
}

double sample_occult_offset(const SojournParams& sp, Rng& rng)
{
    const auto g = occult_normal(sp);
    for (;;) {
        const double x = g.mean + g.sd * rng.normal();
        if (x > 0.0)
            return x;
    }
}

// ----------------------------------------------------- AdaptiveProposal

AdaptiveProposal::AdaptiveProposal(std::size_t dim, AdaptiveConfig config)
    : dim_(dim), config_(config), mean_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim))),
      scatter_(Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim)))
{}

Eigen::MatrixXd AdaptiveProposal::covariance() const
{
    if (count_ < 2)
        return Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(dim_), static_cast<Eigen::Index>(dim_));
    return scatter_ / static_cast<double>(count_ - 1);
}

Eigen::VectorXd AdaptiveProposal::propose(const Eigen::VectorXd& x, Rng& rng)
{
    const auto d = static_cast<Eigen::Index>(dim_);
    Eigen::VectorXd z(d);
    for (Eigen::Index k = 0; k < d; ++k)
        z[k] = rng.normal();
    const bool adapted = count_ >= std::max<std::size_t>(config_.start, dim_ + 1);
    const double pick = rng.uniform();
    if (!adapted || pick < config_.fixed_fraction)
        return x + config_.initial_sd * z;
    if (chol_at_ != count_) {
        const double scale = 2.38 * 2.38 / static_cast<double>(dim_);
        Eigen::MatrixXd c = scale * (covariance() + config_.jitter * Eigen::MatrixXd::Identity(d, d));
        Eigen::LLT<Eigen::MatrixXd> llt(c);
        if (llt.info() != Eigen::Success) {
            // Lost positive-definiteness: restart adaptation from the diagonal.
            ++resets_;
            count_ = 0;
            mean_.setZero();
            scatter_.setZero();
            chol_at_ = 0;
            return x + config_.initial_sd * z;
        }
        chol_ = llt.matrixL();
        chol_at_ = count_;
    }
    return x + chol_ * z;
}

void AdaptiveProposal::update(const Eigen::VectorXd& x)
{
    ++count_;
    const Eigen::VectorXd delta = x - mean_;
    mean_ += delta / static_cast<double>(count_);
    scatter_ += delta * (x - mean_).transpose();
}

// --------------------------------------------------------------- Config

void SamplerConfig::validate() const
{
    if (thin == 0)
        throw ConfigError("thin must be at least 1");
    if (burn_in > iterations)
        throw ConfigError("burn-in exceeds iteration count");
    if (event_updates && *event_updates == 0)
        throw ConfigError("event updates per iteration must be positive");
    for (double w : move_weights)
        if (!(w >= 0.0))
            throw ConfigError("move weights must be non-negative");
    if (!(move_weights[0] + move_weights[1] + move_weights[2] > 0.0))
        throw ConfigError("move weights sum to zero");
    if (initial)
        initial->validate();
    infectivity.validate();
    sojourn.validate();
}

namespace {

TransmissionParams prior_mean(const PriorSpec& prior)
{
    TransmissionParams p;
    p.epsilon = prior.epsilon.mean();
    p.p = {prior.p[0].mean(), prior.p[1].mean()};
    p.beta = {prior.beta[0].mean(), prior.beta[1].mean()};
    p.gamma = prior.gamma.mean();
    p.psi = prior.psi.mean();
    for (std::size_t k = 1; k < kProductionTypes; ++k)
        p.eta[k] = std::min(1.0, prior.eta[k - 1].mean());
    return p;
}

double initial_infection_time(const EpidemicRecord& obs, const SojournParams& sp, Id j)
{
    const double N = obs.N[j];
    double I = N - sp.median();
    if (!(I > obs.negative_test[j]))
        I = obs.negative_test[j] + 0.5 * (N - obs.negative_test[j]);
    return I;
}

} // namespace

EpidemicRecord initial_augmentation(const EpidemicRecord& observed, const SojournParams& sp)
{
    EpidemicRecord rec = observed;
    for (Id j = 0; j < rec.size(); ++j) {
        if (!std::isnan(rec.I[j]))
            continue;
        if (!(rec.N[j] <= rec.t_obs))
            throw ValidationError("individual " + std::to_string(j) + ": latent infection without notification");
        rec.I[j] = initial_infection_time(observed, sp, j);
    }
    return rec;
}

// --------------------------------------------------------------- Sampler

Sampler::Sampler(const Population& pop, ContactTraceSet cts, const EpidemicRecord& observed, SamplerConfig config,
                 Rng rng)
    : pop_(pop), cts_(std::make_unique<ContactTraceSet>(std::move(cts))), config_(std::move(config)),
      rng_(rng), proposal_(kParamDim, config_.adaptation)
{
    config_.validate();
    if (config_.threads > 1)
        pool_ = std::make_unique<WorkerPool>(config_.threads);
    const TransmissionParams start = config_.initial ? *config_.initial : prior_mean(config_.prior);
    log_prior_ = log_prior(start, config_.prior);
    if (!std::isfinite(log_prior_))
        throw ConfigError("initial parameters have zero prior density");
    like_ = std::make_unique<IncrementalLikelihood>(pop_, *cts_, config_.infectivity, config_.sojourn,
                                                    initial_augmentation(observed, config_.sojourn), start,
                                                    pool_.get());
    if (!like_->value().feasible())
        throw Error(std::string("initial augmented state has zero likelihood: ") +
                    infeasibility_name(like_->value().reason));
    events_enabled_ = false;
    for (Id j = 0; j < observed.size(); ++j)
        events_enabled_ = events_enabled_ || observed.N[j] <= observed.t_obs;
}

Sampler::~Sampler() = default;

const EpidemicRecord& Sampler::state() const
{
    return like_->record();
}

const TransmissionParams& Sampler::params() const
{
    return like_->params();
}

double Sampler::log_likelihood() const
{
    return like_->value().value;
}

double Sampler::log_posterior() const
{
    return like_->value().value + log_prior_;
}

bool Sampler::accept(double log_ratio)
{
    if (std::isnan(log_ratio))
        return false;
    return log_ratio >= 0.0 || std::log(rng_.uniform()) < log_ratio;
}

void Sampler::update_params()
{
    const TransmissionParams& current = like_->params();
    const Eigen::VectorXd x = to_unconstrained(current);
    const Eigen::VectorXd y = proposal_.propose(x, rng_);
    const TransmissionParams cand = from_unconstrained(y);
    ++diagnostics_.params.proposed;
    const double lp = log_prior(cand, config_.prior);
    bool accepted = false;
    if (std::isfinite(lp)) {
        const LogValue ll = like_->evaluate_params(cand);
        if (ll.feasible()) {
            const double log_ratio = (ll.value + lp + log_jacobian(cand)) -
                                     (like_->value().value + log_prior_ + log_jacobian(current));
            if (accept(log_ratio)) {
                like_->accept_params();
                log_prior_ = lp;
                accepted = true;
            }
        }
    }
    diagnostics_.params.accepted += accepted ? 1 : 0;
    proposal_.update(accepted ? y : x);
    diagnostics_.covariance_resets = proposal_.resets();
}

double Sampler::anchor(Id s) const
{
    const auto& rec = like_->record();
    return rec.N[s] <= rec.t_obs ? rec.N[s] : rec.t_obs;
}

// Known cases propose their infectious period from f_D; occults and
// surveillance-detected cases, whose period is censored, from the
// truncated normal.
double Sampler::proposal_log_density(Id s, double offset) const
{
    const auto& rec = like_->record();
    const bool completed = rec.N[s] <= rec.t_obs && !rec.visit_detected[s];
    if (completed)
        return offset >= 0.0 ? config_.sojourn.log_pdf(offset) : -kInf;
    return occult_proposal_log_density(config_.sojourn, offset);
}

double Sampler::draw_offset(Id s)
{
    const auto& rec = like_->record();
    const bool completed = rec.N[s] <= rec.t_obs && !rec.visit_detected[s];
    if (completed)
        return config_.sojourn.quantile(rng_.uniform());
    return sample_occult_offset(config_.sojourn, rng_);
}

void Sampler::move_infection()
{
    const auto infected = like_->infected();
    if (infected.empty())
        return;
    const Id s = infected[rng_.index(infected.size())];
    const double current = like_->record().I[s];
    const double before = like_->value().value;
    const auto candidates = like_->candidate_contacts(s);
    const bool contact = like_->contact_state(s);
    const bool trans = !candidates.empty() && rng_.uniform() < 0.5;
    const double a = anchor(s);
    const double log_c = std::log(static_cast<double>(std::max<std::size_t>(candidates.size(), 1)));

    double proposal;
    double log_q = 0.0; // log of reverse/forward proposal ratio
    MoveStats* stats;
    if (contact && !trans) {
        if (candidates.empty())
            return;
        stats = &diagnostics_.contact_to_contact;
        proposal = candidates[rng_.index(candidates.size())];
    } else if (!contact && !trans) {
        stats = &diagnostics_.free_to_free;
        const double offset = draw_offset(s);
        proposal = a - offset;
        log_q = proposal_log_density(s, a - current) - proposal_log_density(s, offset);
    } else if (!contact && trans) {
        stats = &diagnostics_.free_to_contact;
        proposal = candidates[rng_.index(candidates.size())];
        log_q = proposal_log_density(s, a - current) + log_c;
    } else {
        stats = &diagnostics_.contact_to_free;
        const double offset = draw_offset(s);
        proposal = a - offset;
        log_q = -log_c - proposal_log_density(s, offset);
    }
    ++stats->proposed;
    const LogValue after = like_->propose_infection(s, proposal);
    if (after.feasible() && accept(after.value - before + log_q)) {
        like_->commit();
        ++stats->accepted;
    } else {
        like_->rollback();
    }
}

void Sampler::add_occult()
{
    ++diagnostics_.add.proposed;
    const auto& rec = like_->record();
    std::vector<Id> susceptible;
    for (Id j = 0; j < rec.size(); ++j)
        if (!rec.infected(j))
            susceptible.push_back(j);
    if (susceptible.empty())
        return;
    const std::size_t m = rec.occult_count();
    const Id s = susceptible[rng_.index(susceptible.size())];
    const double offset = sample_occult_offset(config_.sojourn, rng_);
    const double before = like_->value().value;
    const LogValue after = like_->propose_infection(s, rec.t_obs - offset);
    const double log_ratio = after.value - before + std::log(static_cast<double>(susceptible.size())) -
                             std::log(static_cast<double>(m + 1)) -
                             occult_proposal_log_density(config_.sojourn, offset);
    if (after.feasible() && accept(log_ratio)) {
        like_->commit();
        ++diagnostics_.add.accepted;
    } else {
        like_->rollback();
    }
}

void Sampler::delete_occult()
{
    ++diagnostics_.remove.proposed;
    const auto& rec = like_->record();
    std::vector<Id> occults;
    for (Id j : like_->infected())
        if (rec.occult(j))
            occults.push_back(j);
    if (occults.empty())
        return;
    const std::size_t susceptible = rec.size() - like_->infected().size();
    const Id s = occults[rng_.index(occults.size())];
    // An added occult is always proposed off contact times, so a contact
    // state cannot be reached by the reverse move.
    if (like_->contact_state(s))
        return;
    const double offset = rec.t_obs - rec.I[s];
    const double before = like_->value().value;
    const LogValue after = like_->propose_infection(s, kInf);
    const double log_ratio = after.value - before + std::log(static_cast<double>(occults.size())) +
                             occult_proposal_log_density(config_.sojourn, offset) -
                             std::log(static_cast<double>(susceptible + 1));
    if (after.feasible() && accept(log_ratio)) {
        like_->commit();
        ++diagnostics_.remove.accepted;
    } else {
        like_->rollback();
    }
}

void Sampler::check_cache()
{
    const LogValue fresh = like_->recompute();
    const LogValue cached = like_->value();
    ++diagnostics_.cache_checks;
    if (fresh.feasible() != cached.feasible())
        throw NumericalError("cached likelihood feasibility disagrees with a fresh evaluation");
    if (!fresh.feasible())
        return;
    const double err = std::abs(fresh.value - cached.value) / std::max(1.0, std::abs(fresh.value));
    diagnostics_.max_cache_error = std::max(diagnostics_.max_cache_error, err);
    if (err > 1e-6)
        throw NumericalError("cached likelihood drifted from a fresh evaluation");
    like_->rebuild();
}

void Sampler::step()
{
    ++iteration_;
    if (config_.update_params)
        update_params();
    if (config_.update_events && events_enabled_) {
        const auto& w = config_.move_weights;
        const double total = w[0] + w[1] + w[2];
        const std::size_t z =
            config_.event_updates ? *config_.event_updates : std::max<std::size_t>(10, like_->infected().size() / 5);
        for (std::size_t k = 0; k < z; ++k) {
            const double u = rng_.uniform() * total;
            if (u < w[0])
                move_infection();
            else if (u < w[0] + w[1])
                add_occult();
            else
                delete_occult();
        }
    }
    diagnostics_.occult_trace.push_back(like_->record().occult_count());
    if (config_.check_interval && iteration_ % config_.check_interval == 0)
        check_cache();
}

PosteriorSet Sampler::run()
{
    config_.validate();
    PosteriorSet out;
    out.iterations = config_.iterations;
    out.burn_in = config_.burn_in;
    out.thin = config_.thin;
    out.samples.reserve((config_.iterations - config_.burn_in) / config_.thin);
    for (std::size_t it = 1; it <= config_.iterations; ++it) {
        step();
        if (it > config_.burn_in && (it - config_.burn_in) % config_.thin == 0) {
            PosteriorSample s;
            s.iteration = it;
            s.params = like_->params();
            s.log_posterior = log_posterior();
            const auto& rec = like_->record();
            for (Id j : like_->infected())
                if (rec.occult(j))
                    s.occults.emplace_back(j, rec.I[j]);
            s.occult_count = s.occults.size();
            out.samples.push_back(std::move(s));
        }
    }
    out.diagnostics = diagnostics_;
    return out;
}

void Sampler::reset_likelihood(EpidemicRecord rec)
{
    const TransmissionParams params = like_->params();
    like_.reset();
    like_ = std::make_unique<IncrementalLikelihood>(pop_, *cts_, config_.infectivity, config_.sojourn,
                                                    std::move(rec), params, pool_.get());
}

void Sampler::update_data(const EpidemicRecord& observed, ContactTraceSet cts)
{
    const EpidemicRecord old = like_->record();
    if (old.size() != observed.size())
        throw ValidationError("record size changed between analyses");
    EpidemicRecord rec = observed;
    for (Id j = 0; j < rec.size(); ++j) {
        const bool notified = observed.N[j] <= observed.t_obs;
        if (notified) {
            if (!std::isnan(rec.I[j]))
                continue;
            const double prev = old.I[j];
            const bool keep = prev < kInf && prev < observed.N[j] && prev > observed.negative_test[j];
            rec.I[j] = keep ? prev : initial_infection_time(observed, config_.sojourn, j);
        } else if (old.occult(j) && old.I[j] > observed.negative_test[j] && old.I[j] <= observed.t_obs) {
            rec.I[j] = old.I[j];
        }
    }
    cts_ = std::make_unique<ContactTraceSet>(std::move(cts));
    reset_likelihood(std::move(rec));
    if (!like_->value().feasible())
        reset_likelihood(initial_augmentation(observed, config_.sojourn));
    if (!like_->value().feasible())
        throw Error(std::string("updated data has zero likelihood: ") + infeasibility_name(like_->value().reason));
    events_enabled_ = false;
    for (Id j = 0; j < observed.size(); ++j)
        events_enabled_ = events_enabled_ || observed.N[j] <= observed.t_obs;
}

PosteriorSet run_chain(const Population& pop, const ContactTraceSet& cts, const EpidemicRecord& observed,
                       const SamplerConfig& config, Rng& rng)
{
    Sampler sampler(pop, cts, observed, config, Rng(rng.next()));
    return sampler.run();
}

std::vector<OccultRisk> occult_risk_ranking(const PosteriorSet& samples, const Population& pop)
{
    if (samples.samples.empty())
        throw EmptyPosterior("no retained samples to rank");
    std::vector<std::size_t> count(pop.size(), 0);
    for (const auto& s : samples.samples)
        for (const auto& [id, t] : s.occults)
            ++count.at(id);
    const double n = static_cast<double>(samples.samples.size());
    std::vector<OccultRisk> out(pop.size());
    for (Id j = 0; j < pop.size(); ++j)
        out[j] = {j, static_cast<double>(count[j]) / n};
    std::stable_sort(out.begin(), out.end(),
                     [](const OccultRisk& a, const OccultRisk& b) { return a.probability > b.probability; });
    return out;
}

} // namespace epitrace
