#ifndef EPITRACE_SIMULATOR_HPP
#define EPITRACE_SIMULATOR_HPP

#include "epitrace/likelihood.hpp"
#include "epitrace/model.hpp"
#include "epitrace/population.hpp"
#include "epitrace/rng.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <queue>
#include <tuple>
#include <utility>
#include <vector>

namespace epitrace {

struct RemovalDelay
{
    enum class Kind : std::uint8_t { Fixed, Exponential };
    Kind kind = Kind::Fixed;
    double days = 1.0; ///< fixed delay or exponential mean

    double draw(Rng& rng) const;
};

struct SimConfig
{
    TransmissionParams true_params = TransmissionParams::reference();
    InfectivityParams infectivity;
    SojournParams sojourn;
    double ct_window = 21.0;
    RemovalDelay removal;
    double t_max = 365.0;
    std::optional<Id> index_case; ///< random when unset
    /// Contact streams end at the source's notification; otherwise at removal.
    bool contacts_stop_at_notification = true;

    void validate() const;
};

struct ContactRecord
{
    Id source;
    Id dest;
    Channel channel;
    double time;
    bool infected;
};

struct Attribution
{
    Id id;
    std::optional<Channel> channel; ///< nullopt for the index case
    std::optional<Id> source;       ///< nullopt for index and background
    double time;
};

struct SimResult
{
    EpidemicRecord events;
    std::vector<ContactRecord> contact_log;
    std::vector<Attribution> attribution; ///< in infection order
};

/// Event-driven outbreak that can be advanced in steps and intervened on, so
/// a surveillance loop shares the simulation clock. Copying snapshots the
/// full state including random streams.
///
/// FM/SH contacts on each directed edge form a Poisson stream that starts
/// ct_window days before time zero. Each edge stream is a counter-based
/// sequence keyed by the edge, so contact times do not depend on the
/// epidemic; only sources that are infectious are ever stepped. CP, spatial
/// and background infections come from thinning a dominating process.
class OutbreakSimulation
{
public:
    OutbreakSimulation(const Population& pop, SimConfig config, Rng rng);

    /// Processes every event up to and including t.
    void advance_to(double t);
    double now() const { return now_; }
    /// No infected individual remains unremoved.
    bool extinct() const { return extinct_; }
    /// Time of the last removal once extinct, otherwise now().
    double end_time() const;

    /// Surveillance visit at time t (>= now()). An infected, unnotified
    /// holding is culled: N = R = t. Otherwise a negative test is recorded.
    /// Returns true if culled.
    bool visit(Id j, double t);

    const EpidemicRecord& truth() const { return rec_; }
    const std::vector<Attribution>& attribution() const { return attribution_; }
    const Population& population() const { return *pop_; }
    const SimConfig& config() const { return config_; }

    /// Every FM/SH contact generated up to now().
    std::vector<ContactRecord> contact_log() const;
    /// Contacts on edges incident to j with time in [begin, end).
    std::vector<ContactRecord> contacts_of(Id j, double begin, double end) const;

    SimResult result() const;

private:
    struct Event
    {
        double time;
        std::uint8_t kind; // 0 contact, 1 removal
        std::uint64_t key; // edge key or individual
        bool operator>(const Event& o) const
        {
            return std::tie(time, kind, key) > std::tie(o.time, o.kind, o.key);
        }
    };
    struct Cursor
    {
        std::uint64_t state;
        double time;
        double u;
    };
    struct Source
    {
        Id id;
        double total;
        std::vector<double> cumulative; // dominating rate per target
    };

    Cursor first_contact(Channel c, std::size_t e) const;
    void step(Cursor& cur, Channel c, std::size_t e) const;
    double stream_end(Id i) const;
    template <class F>
    void for_each_contact(Channel c, std::size_t e, double begin, double end, F&& f) const;

    void infect(Id j, double t, std::optional<Channel> channel, std::optional<Id> source);
    void add_source(Id i);
    void drop_source(Id i);
    void redraw();
    void fire_candidate(double t);
    void fire_contact(std::uint64_t key, double t);

    const Population* pop_;
    SimConfig config_;
    Rng rng_;
    std::uint64_t stream_seed_;
    EpidemicRecord rec_;
    std::vector<Attribution> attribution_;
    std::vector<Cursor> cursors_; // by edge key
    std::vector<Source> sources_;
    std::priority_queue<Event, std::vector<Event>, std::greater<>> queue_;
    double lambda_ = 0.0;
    double pending_ = kInf;
    double now_ = 0.0;
    double last_removal_ = 0.0;
    std::size_t active_ = 0;
    bool extinct_ = false;
};

SimResult simulate_epidemic(const Population& pop, const SimConfig& config, Rng& rng);

/// Record available to inference at t_obs: notified cases have latent
/// infection times (NaN), unnotified infections are invisible, and later
/// events are censored to +inf.
EpidemicRecord observe(const EpidemicRecord& truth, double t_obs);
/// Truth censored at t_obs but keeping every infection time up to t_obs,
/// for scoring.
EpidemicRecord censor(const EpidemicRecord& truth, double t_obs);

/// Contact-tracing data at t_obs: each notified case is traced with
/// probability phi, recording its in- and outbound contacts in
/// [N_j - window, N_j).
ContactTraceSet extract_ctd(const OutbreakSimulation& sim, double t_obs, double window, double phi, Rng& rng);
ContactTraceSet extract_ctd(const SimResult& sim, std::size_t n, double t_obs, double window, double phi, Rng& rng);

struct EstimatorVariance
{
    double exponential;
    double geometric;
};

/// Asymptotic variance of the contact-probability estimator with contacts
/// observed at rate r in bins of width delta.
EstimatorVariance estimator_variance(double r, double delta);

} // namespace epitrace

#endif // EPITRACE_SIMULATOR_HPP
