#ifndef EPITRACE_MODEL_HPP
#define EPITRACE_MODEL_HPP

#include "epitrace/population.hpp"

#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <vector>

namespace epitrace {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Distance at which the spatial kernel equals one.
inline constexpr double kSpatialCentreKm = 5.0;

struct TransmissionParams
{
    double epsilon = 0.0;           ///< background rate, day^-1
    std::array<double, 2> p{};      ///< per-contact infection probability: feedmill, slaughterhouse
    std::array<double, 2> beta{};   ///< company rate, spatial rate at 5 km
    double gamma = 0.0;             ///< multiplier on pressure from notified sources
    double psi = 0.0;               ///< spatial decay, km^-1
    std::array<double, kProductionTypes> eta{1, 1, 1, 1, 1, 1, 1, 1, 1, 1};

    /// Values used to simulate the reference test epidemic.
    static TransmissionParams reference();

    /// Throws DomainError if any invariant fails.
    void validate() const;
    bool valid() const noexcept;

    double susceptibility(int production_type) const { return eta[static_cast<std::size_t>(production_type - 1)]; }
    double contact_probability(Channel c) const;
};

struct InfectivityParams
{
    double nu = 1.3;
    double mu = 60.0;

    void validate() const;

    /// Logistic ramp e^{nu tau} / (mu + e^{nu tau}) at time-since-infection tau.
    double ramp(double tau) const;
    /// Antiderivative of ramp: log(mu + e^{nu tau}) / nu, overflow-safe.
    double ramp_primitive(double tau) const;
    /// Integral of ramp over [tau0, tau1]; zero when tau1 <= tau0.
    double ramp_integral(double tau0, double tau1) const;
};

struct SojournParams
{
    double a = 0.015;
    double b = 0.8;

    void validate() const;

    double pdf(double t) const;
    double log_pdf(double t) const;
    double cdf(double t) const;
    /// log(1 - F_D(t)).
    double log_survival(double t) const;
    double median() const;
    double mean() const;
    /// Inverse-CDF draw from uniform u in (0,1).
    double quantile(double u) const;
};

/// Per-individual event times. I is +inf for never-infected individuals and
/// NaN where an infection is known to exist but its time is latent.
struct EpidemicRecord
{
    std::vector<double> I, N, R;
    /// Infection found by an active-surveillance visit; N = R = visit time
    /// and the infectious period is censored there rather than completed.
    std::vector<char> visit_detected;
    /// Latest negative test; the individual cannot have been infected by then.
    std::vector<double> negative_test;
    double t_obs = kInf;

    EpidemicRecord() = default;
    explicit EpidemicRecord(std::size_t n, double t_obs = kInf);

    std::size_t size() const { return I.size(); }
    bool infected(Id j) const { return I[j] < kInf || std::isnan(I[j]); }
    bool notified(Id j) const { return N[j] <= t_obs; }
    bool occult(Id j) const { return infected(j) && !(N[j] <= t_obs); }
    /// Earliest finite infection time; nullopt when nobody is infected.
    std::optional<Id> index_case() const;
    std::size_t occult_count() const;
    std::size_t infected_count() const;

    /// Serial-progression and censoring checks plus negative-test
    /// consistency; throws ValidationError.
    void validate() const;
    /// As validate() but without the negative-test check, which the
    /// likelihood reports as an infeasibility instead.
    void validate_structure() const;
};

double infectivity(const InfectivityParams& ip, const EpidemicRecord& rec, Id i, double t);

double sojourn_pdf(const SojournParams& sp, double t);
double sojourn_cdf(const SojournParams& sp, double t);

/// e^{-psi (rho - 5)}.
inline double spatial_kernel(double psi, double rho_km)
{
    return std::exp(-psi * (rho_km - kSpatialCentreKm));
}

/// Rate of infection of j by i through one channel at time t, without the
/// notified-period gamma factor.
double pairwise_rate(const Population& pop, const TransmissionParams& params, const InfectivityParams& ip,
                     const EpidemicRecord& rec, Id i, Id j, Channel channel, double t);

/// Total force of infection on j at time t.
double total_pressure(const Population& pop, const TransmissionParams& params, const InfectivityParams& ip,
                      const EpidemicRecord& rec, Id j, double t);

/// Exact integral of total_pressure over [t0, t1).
double integrated_pressure(const Population& pop, const TransmissionParams& params, const InfectivityParams& ip,
                           const EpidemicRecord& rec, Id j, double t0, double t1);

} // namespace epitrace

#endif // EPITRACE_MODEL_HPP
