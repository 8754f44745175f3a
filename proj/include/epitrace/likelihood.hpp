#ifndef EPITRACE_LIKELIHOOD_HPP
#define EPITRACE_LIKELIHOOD_HPP

#include "epitrace/model.hpp"
#include "epitrace/population.hpp"

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace epitrace {

class WorkerPool;

/// Why a configuration has zero probability.
enum class Infeasibility : std::uint8_t {
    None,
    ZeroRate,          ///< infection with zero force of infection
    InconsistentState, ///< contact-caused infection from a non-infectious source
    NegativeTest,      ///< infected before a negative surveillance test
    OutOfSupport,      ///< sojourn or parameter outside its support
};

const char* infeasibility_name(Infeasibility r);

/// Log-density with a structured reason when it is -inf.
struct LogValue
{
    double value = 0.0;
    Infeasibility reason = Infeasibility::None;

    static LogValue impossible(Infeasibility r) { return {-kInf, r}; }
    bool feasible() const { return reason == Infeasibility::None; }
};

struct ContactEvent
{
    Id source;
    Id dest;
    Channel channel; ///< FM or SH
    double time;

    auto operator<=>(const ContactEvent&) const = default;
};

struct Interval
{
    double begin;
    double end;
    bool contains(double t) const { return begin <= t && t < end; }
};

/// Traced windows [N_j - w, N_j) and the network contacts reported in them.
/// A contact i -> j at time t is observed iff t lies in i's or j's window;
/// both inbound and outbound contacts of a traced case are recorded.
class ContactTraceSet
{
public:
    ContactTraceSet() = default;
    /// No tracing for a population of size n.
    explicit ContactTraceSet(std::size_t n, double window_length = 21.0);
    /// `traced` gives (id, notification time) for each traced case. Events are
    /// sorted and de-duplicated; each must lie in a window of its source or
    /// destination (ValidationError otherwise).
    ContactTraceSet(std::size_t n, double window_length, const std::vector<std::pair<Id, double>>& traced,
                    std::vector<ContactEvent> events);

    std::size_t population_size() const { return start_.size(); }
    double window_length() const { return window_; }
    bool traced(Id j) const;
    std::optional<Interval> window(Id j) const;
    std::size_t traced_count() const;

    /// True if a contact from src to dst at time t would be reported.
    bool observed(Id src, Id dst, double t) const
    {
        return in_window(src, t) || in_window(dst, t);
    }
    bool in_window(Id j, double t) const { return start_[j] <= t && t < end_[j]; }

    std::span<const ContactEvent> events() const { return events_; }
    /// Event indices with this destination / source, in time order.
    std::span<const std::size_t> inbound(Id j) const;
    std::span<const std::size_t> outbound(Id i) const;

    /// Windows must belong to individuals notified by t_obs, ending at N_j.
    void validate(const EpidemicRecord& rec) const;

private:
    double window_ = 21.0;
    std::vector<double> start_, end_; // +inf/+inf when untraced
    std::vector<ContactEvent> events_;
    std::vector<std::size_t> in_offsets_, in_index_, out_offsets_, out_index_;
};

std::optional<Interval> window_of(const ContactTraceSet& cts, Id j);

/// Contact-tracing window term for j: escapes before I_j contribute
/// log(1 - p), the contact(s) at I_j log(1 - prod(1 - p)), later contacts 0.
LogValue geometric_window_logterm(const ContactTraceSet& cts, const Population& pop,
                                  const TransmissionParams& params, const InfectivityParams& ip,
                                  const EpidemicRecord& rec, Id j);

struct EvalOptions
{
    unsigned threads = 1;
};

/// Log-likelihood with contact-tracing data embedded where observed.
LogValue log_lik_ct(const Population& pop, const TransmissionParams& params, const InfectivityParams& ip,
                    const SojournParams& sp, const EpidemicRecord& rec, const ContactTraceSet& cts,
                    EvalOptions options = {});

/// Poisson-process log-likelihood without contact-tracing data.
LogValue log_lik_vanilla(const Population& pop, const TransmissionParams& params, const InfectivityParams& ip,
                         const SojournParams& sp, const EpidemicRecord& rec, EvalOptions options = {});

struct GammaPrior
{
    double shape;
    double rate;
    double log_pdf(double x) const;
    double mean() const { return shape / rate; }
    double variance() const { return shape / (rate * rate); }
};

struct BetaPrior
{
    double alpha;
    double beta;
    double log_pdf(double x) const;
    double mean() const { return alpha / (alpha + beta); }
    double variance() const
    {
        const double s = alpha + beta;
        return alpha * beta / (s * s * (s + 1.0));
    }
};

struct PriorSpec
{
    GammaPrior epsilon{0.15, 5000.0};
    std::array<BetaPrior, 2> p{BetaPrior{1.0, 1.0}, BetaPrior{1.0, 1.0}};
    std::array<GammaPrior, 2> beta{GammaPrior{2.048, 256.0}, GammaPrior{2.0, 111.0}};
    GammaPrior gamma{1.5, 3.0};
    GammaPrior psi{10.0, 50.0};
    /// eta_2 .. eta_10; eta_1 is fixed at 1.
    std::array<GammaPrior, kProductionTypes - 1> eta{
        GammaPrior{1, 10}, GammaPrior{1, 10}, GammaPrior{1, 10}, GammaPrior{1, 10}, GammaPrior{1, 10},
        GammaPrior{1, 10}, GammaPrior{1, 10}, GammaPrior{1, 10}, GammaPrior{1, 10}};
};

/// Sum of independent prior log-densities; -inf outside the parameter support.
double log_prior(const TransmissionParams& params, const PriorSpec& prior);

/// Cached likelihood for the sampler. Stores per-source exposure rows and
/// per-target aggregates so that moving one infection time costs O(P), and a
/// parameter update costs one pass over (infected x population).
///
/// Infection changes are transactional: propose_infection() applies the
/// change, then commit() or rollback().
class IncrementalLikelihood
{
public:
    IncrementalLikelihood(const Population& pop, const ContactTraceSet& cts, InfectivityParams ip, SojournParams sp,
                          EpidemicRecord rec, TransmissionParams params, WorkerPool* pool = nullptr);
    ~IncrementalLikelihood();
    IncrementalLikelihood(const IncrementalLikelihood&) = delete;
    IncrementalLikelihood& operator=(const IncrementalLikelihood&) = delete;

    const EpidemicRecord& record() const { return rec_; }
    const TransmissionParams& params() const { return params_; }
    LogValue value() const { return value_; }

    /// Log-likelihood at candidate parameters with the current infection times.
    LogValue evaluate_params(const TransmissionParams& candidate);
    /// Adopts the candidate passed to the last evaluate_params().
    void accept_params();

    /// Sets I_s = t (t = +inf removes the infection) and returns the new value.
    LogValue propose_infection(Id s, double t);
    void commit();
    void rollback();

    std::span<const Id> infected() const { return infected_; }
    std::optional<Id> index_case() const { return kappa_; }
    bool contact_state(Id s) const { return contact_[s] != 0; }
    /// Distinct reported inbound contact times of s from sources infectious
    /// (and not yet notified) at that time, feasible for s's own record.
    std::vector<double> candidate_contacts(Id s) const;

    /// Fresh evaluation through log_lik_ct for cache checks.
    LogValue recompute() const;
    /// Rebuilds every cache from the record.
    void rebuild();

private:
    struct Row;
    struct Aggregates
    {
        std::vector<double> exposure_spatial, exposure_notified, rate_spatial, rate_notified;
    };

    double e(Id j) const; // end of exposure for target j
    void put(double& slot, double v);
    Row& row(Id i);
    void refresh_kernel(Row& r);
    void set_pair(Row& r, Id i, Id j);
    void fill_row(Id s);
    void refresh_column(Id s);
    void refresh_network(Id j);
    void refresh_event_infectivity(Id src);
    double geometric(Id j, const TransmissionParams& p, bool* inconsistent) const;
    void resum_spatial(const TransmissionParams& p, Aggregates& out, bool into_alt);
    LogValue total(const TransmissionParams& p, const Aggregates& agg, const std::vector<double>& geo) const;
    void recompute_index_case();
    void update_contact_state(Id s);

    const Population& pop_;
    const ContactTraceSet& cts_;
    InfectivityParams ip_;
    SojournParams sp_;
    EpidemicRecord rec_;
    TransmissionParams params_;
    WorkerPool* pool_;

    std::size_t n_;
    std::vector<Id> infected_;
    std::optional<Id> kappa_;
    std::vector<char> contact_;
    std::vector<std::unique_ptr<Row>> rows_;

    Aggregates agg_, agg_alt_;
    // Network aggregates depend only on event times.
    std::vector<double> ex_fm_, ex_sh_, ex_cp_, rt_fm_, rt_sh_, rt_cp_;
    std::vector<double> event_q_; // source infectivity at each reported contact
    std::vector<double> geo_, geo_alt_;

    TransmissionParams candidate_;
    LogValue value_, candidate_value_;
    bool candidate_ready_ = false;

    // Transaction state.
    bool open_ = false;
    std::vector<std::pair<double*, double>> undo_;
    Id tx_id_ = 0;
    double tx_old_time_ = kInf;
    char tx_old_contact_ = 0;
    std::optional<Id> tx_old_kappa_;
    LogValue tx_old_value_;
};

} // namespace epitrace

#endif // EPITRACE_LIKELIHOOD_HPP
