#ifndef EPITRACE_MCMC_HPP
#define EPITRACE_MCMC_HPP

#include "epitrace/likelihood.hpp"
#include "epitrace/model.hpp"
#include "epitrace/population.hpp"
#include "epitrace/rng.hpp"

#include <Eigen/Dense>

#include <array>
#include <cstddef>
#include <memory>
#include <optional>
#include <string_view>
#include <utility>
#include <vector>

namespace epitrace {

class WorkerPool;

/// Parameters updated by the adaptive block: epsilon, p1, p2, beta1, beta2,
/// gamma, psi, eta2..eta10.
inline constexpr std::size_t kParamDim = 16;
extern const std::array<std::string_view, kParamDim> kParamNames;

std::array<double, kParamDim> pack(const TransmissionParams& p);
TransmissionParams unpack(const std::array<double, kParamDim>& v);

/// Unconstrained coordinates: log for rates, logit for probabilities.
Eigen::VectorXd to_unconstrained(const TransmissionParams& p);
TransmissionParams from_unconstrained(const Eigen::VectorXd& u);
/// log |d theta / d u| at theta.
double log_jacobian(const TransmissionParams& p);

/// Density of T_obs - I for occult proposals: Normal(-1/b, 1/(a b^2))
/// truncated to (0, inf).
double occult_proposal_density(const SojournParams& sp, double t);
double occult_proposal_log_density(const SojournParams& sp, double t);
double sample_occult_offset(const SojournParams& sp, Rng& rng);

struct AdaptiveConfig
{
    std::size_t start = 1000; ///< iterations before the empirical covariance is used
    double jitter = 1e-8;
    double initial_sd = 0.1;       ///< per-coordinate sd on the unconstrained scale
    double fixed_fraction = 0.05;  ///< share of proposals from the initial diagonal
};

/// Haario-style adaptive random-walk proposal on the unconstrained scale.
class AdaptiveProposal
{
public:
    AdaptiveProposal(std::size_t dim, AdaptiveConfig config);

    Eigen::VectorXd propose(const Eigen::VectorXd& x, Rng& rng);
    /// Adds x to the running mean/covariance.
    void update(const Eigen::VectorXd& x);

    std::size_t count() const { return count_; }
    const Eigen::VectorXd& mean() const { return mean_; }
    /// Empirical covariance (valid once count() >= 2).
    Eigen::MatrixXd covariance() const;
    std::size_t resets() const { return resets_; }

private:
    std::size_t dim_;
    AdaptiveConfig config_;
    std::size_t count_ = 0;
    Eigen::VectorXd mean_;
    Eigen::MatrixXd scatter_; // sum of outer products of deviations
    Eigen::MatrixXd chol_;
    std::size_t chol_at_ = 0;
    std::size_t resets_ = 0;
};

struct SamplerConfig
{
    std::size_t iterations = 20000;
    std::size_t burn_in = 5000;
    std::size_t thin = 10;
    std::optional<std::size_t> event_updates; ///< z; default max(10, infected/5)
    std::array<double, 3> move_weights{0.8, 0.1, 0.1}; ///< move, add, delete
    AdaptiveConfig adaptation;
    PriorSpec prior;
    std::optional<TransmissionParams> initial;
    InfectivityParams infectivity;
    SojournParams sojourn;
    std::size_t check_interval = 1000; ///< cache-vs-fresh comparison period; 0 disables
    unsigned threads = 1;
    bool update_params = true;
    bool update_events = true;

    void validate() const;
};

struct PosteriorSample
{
    std::size_t iteration = 0;
    TransmissionParams params;
    std::size_t occult_count = 0;
    double log_posterior = 0.0;
    std::vector<std::pair<Id, double>> occults; ///< (id, infection time)
};

struct MoveStats
{
    std::size_t proposed = 0;
    std::size_t accepted = 0;
    double rate() const { return proposed ? static_cast<double>(accepted) / static_cast<double>(proposed) : 0.0; }
};

struct Diagnostics
{
    MoveStats params, contact_to_contact, free_to_free, free_to_contact, contact_to_free, add, remove;
    std::vector<std::size_t> occult_trace; ///< per iteration
    std::size_t cache_checks = 0;
    double max_cache_error = 0.0;
    std::size_t covariance_resets = 0;
};

struct PosteriorSet
{
    std::vector<PosteriorSample> samples;
    std::size_t iterations = 0;
    std::size_t burn_in = 0;
    std::size_t thin = 1;
    Diagnostics diagnostics;
};

/// Starting augmented record: I = N - median(f_D) for every notified case
/// whose infection time is unknown, no occults.
EpidemicRecord initial_augmentation(const EpidemicRecord& observed, const SojournParams& sp);

/// The reversible-jump sampler. Holds the chain state between calls so the
/// surveillance loop can warm-start daily analyses.
class Sampler
{
public:
    Sampler(const Population& pop, ContactTraceSet cts, const EpidemicRecord& observed, SamplerConfig config,
            Rng rng);
    ~Sampler();

    /// One outer iteration: parameter block update then z event updates.
    void step();
    /// Runs config.iterations further iterations and collects samples.
    PosteriorSet run();

    /// Replaces the data (new observation time, notifications, tracing),
    /// keeping parameters, adaptation and any augmented infection times
    /// that remain consistent.
    void update_data(const EpidemicRecord& observed, ContactTraceSet cts);

    const EpidemicRecord& state() const;
    const TransmissionParams& params() const;
    double log_likelihood() const;
    double log_posterior() const;
    std::size_t iteration() const { return iteration_; }
    const Diagnostics& diagnostics() const { return diagnostics_; }
    const IncrementalLikelihood& likelihood() const { return *like_; }
    const SamplerConfig& config() const { return config_; }
    /// Mutable config so callers can change iteration counts between runs.
    SamplerConfig& config() { return config_; }

    // Individual kernels, exposed for testing.
    void update_params();
    void move_infection();
    void add_occult();
    void delete_occult();

private:
    void reset_likelihood(EpidemicRecord rec);
    bool accept(double log_ratio);
    void check_cache();
    double proposal_log_density(Id s, double offset) const;
    double draw_offset(Id s);
    double anchor(Id s) const;

    const Population& pop_;
    std::unique_ptr<ContactTraceSet> cts_;
    SamplerConfig config_;
    Rng rng_;
    std::unique_ptr<WorkerPool> pool_;
    std::unique_ptr<IncrementalLikelihood> like_;
    AdaptiveProposal proposal_;
    double log_prior_ = 0.0;
    bool events_enabled_ = true;
    std::size_t iteration_ = 0;
    Diagnostics diagnostics_;
};

PosteriorSet run_chain(const Population& pop, const ContactTraceSet& cts, const EpidemicRecord& observed,
                       const SamplerConfig& config, Rng& rng);

struct OccultRisk
{
    Id id;
    double probability;
};

/// Fraction of retained samples in which each individual is occult,
/// descending, ties by id.
std::vector<OccultRisk> occult_risk_ranking(const PosteriorSet& samples, const Population& pop);

} // namespace epitrace

#endif // EPITRACE_MCMC_HPP
