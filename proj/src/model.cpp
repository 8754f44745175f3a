#include "epitrace/model.hpp"

#include "epitrace/errors.hpp"

#include <algorithm>

namespace epitrace {

// ------------------------------------------------------- TransmissionParams

TransmissionParams TransmissionParams::reference()
{
    TransmissionParams p;
    p.epsilon = 1e-6;
    p.p = {0.3, 0.9};
    p.beta = {0.008, 0.009};
    p.gamma = 0.5;
    p.psi = 0.2;
    p.eta = {1.0, 0.6, 0.3, 0.3, 0.3, 0.3, 0.3, 0.3, 0.3, 0.3};
    return p;
}

bool TransmissionParams::valid() const noexcept
{
    auto nonneg = [](double v) { return v >= 0.0 && std::isfinite(v); };
    if (!nonneg(epsilon) || !nonneg(beta[0]) || !nonneg(beta[1]) || !nonneg(gamma) || !nonneg(psi))
        return false;
    for (double v : p)
        if (!(v >= 0.0 && v <= 1.0))
            return false;
    if (eta[0] != 1.0)
        return false;
    for (double v : eta)
        if (!(v >= 0.0 && v <= 1.0))
            return false;
    return true;
}

void TransmissionParams::validate() const
{
    if (!valid())
        throw DomainError("transmission parameters out of bounds");
}

double TransmissionParams::contact_probability(Channel c) const
{
    switch (c) {
    case Channel::FM: return p[0];
    case Channel::SH: return p[1];
    default: throw DomainError("no contact probability for channel " + std::string(channel_name(c)));
    }
}

// -------------------------------------------------------- InfectivityParams

void InfectivityParams::validate() const
{
    if (!(nu > 0.0) || !(mu > 0.0))
        throw DomainError("infectivity parameters must be positive");
}

double InfectivityParams::ramp(double tau) const
{
    const double x = nu * tau;
    if (x > 30.0)
        return 1.0 / (1.0 + mu * std::exp(-x));
    const double e = std::exp(x);
    return e / (mu + e);
}

double InfectivityParams::ramp_primitive(double tau) const
{
    const double x = nu * tau;
    if (x > 30.0)
        return tau + std::log1p(mu * std::exp(-x)) / nu;
    return std::log(mu + std::exp(x)) / nu;
}

double InfectivityParams::ramp_integral(double tau0, double tau1) const
{
    if (!(tau1 > tau0))
        return 0.0;
    return ramp_primitive(tau1) - ramp_primitive(tau0);
}

// ------------------------------------------------------------ SojournParams

void SojournParams::validate() const
{
    if (!(a > 0.0) || !(b > 0.0))
        throw DomainError("sojourn parameters must be positive");
}

double SojournParams::log_pdf(double t) const
{
    if (t < 0.0)
        throw DomainError("sojourn time must be non-negative");
    return std::log(a * b) + b * t - a * std::expm1(b * t);
}

double SojournParams::pdf(double t) const
{
    return std::exp(log_pdf(t));
}

double SojournParams::cdf(double t) const
{
    if (t < 0.0)
        throw DomainError("sojourn time must be non-negative");
    return -std::expm1(-a * std::expm1(b * t));
}

double SojournParams::log_survival(double t) const
{
    if (t <= 0.0)
        return 0.0;
    return -a * std::expm1(b * t);
}

double SojournParams::median() const
{
    return quantile(0.5);
}

double SojournParams::mean() const
{
    // E[D] = (1/b) int_0^inf exp(-a(e^x - 1)) dx, truncated where the
    // integrand drops below e^-60; composite Simpson.
    const double upper = std::log(1.0 + 60.0 / a);
    const int n = 20000;
    const double h = upper / n;
    double s = 0.0;
    for (int k = 0; k <= n; ++k) {
        const double x = k * h;
        const double f = std::exp(-a * std::expm1(x));
        s += f * (k == 0 || k == n ? 1.0 : (k % 2 ? 4.0 : 2.0));
    }
    return s * h / 3.0 / b;
}

double SojournParams::quantile(double u) const
{
    // F(t) = 1 - exp(-a(e^{bt}-1))  =>  t = log(1 - log(1-u)/a) / b
    return std::log1p(-std::log1p(-u) / a) / b;
}

// ----------------------------------------------------------- EpidemicRecord

EpidemicRecord::EpidemicRecord(std::size_t n, double t_obs_)
    : I(n, kInf), N(n, kInf), R(n, kInf), visit_detected(n, 0), negative_test(n, -kInf), t_obs(t_obs_)
{}

std::optional<Id> EpidemicRecord::index_case() const
{
    std::optional<Id> best;
    for (Id j = 0; j < I.size(); ++j)
        if (I[j] < kInf && (!best || I[j] < I[*best]))
            best = j;
    return best;
}

std::size_t EpidemicRecord::occult_count() const
{
    std::size_t m = 0;
    for (Id j = 0; j < I.size(); ++j)
        m += occult(j) ? 1 : 0;
    return m;
}

std::size_t EpidemicRecord::infected_count() const
{
    std::size_t m = 0;
    for (Id j = 0; j < I.size(); ++j)
        m += infected(j) ? 1 : 0;
    return m;
}

void EpidemicRecord::validate() const
{
    validate_structure();
    for (Id j = 0; j < I.size(); ++j)
        if (I[j] < kInf && !(I[j] > negative_test[j]))
            throw ValidationError("individual " + std::to_string(j) + ": infection before a negative test");
}

void EpidemicRecord::validate_structure() const
{
    const auto n = I.size();
    if (N.size() != n || R.size() != n || visit_detected.size() != n || negative_test.size() != n)
        throw ValidationError("epidemic record columns differ in length");
    for (Id j = 0; j < n; ++j) {
        auto where = [j](const char* what) { return ValidationError("individual " + std::to_string(j) + ": " + what); };
        if (!infected(j)) {
            if (N[j] < kInf || R[j] < kInf)
                throw where("notified or removed without infection");
            continue;
        }
        if (!std::isnan(I[j])) {
            if (N[j] < kInf && !(I[j] < N[j]))
                throw where("infection not before notification");
            if (!(I[j] <= t_obs))
                throw where("infection after observation time");
        }
        if (R[j] < kInf && !(N[j] <= R[j]))
            throw where("removal before notification");
        if (visit_detected[j] && N[j] != R[j])
            throw where("surveillance detection must coincide with removal");
    }
}

// ------------------------------------------------------------------ Kernels

double infectivity(const InfectivityParams& ip, const EpidemicRecord& rec, Id i, double t)
{
    const double I = rec.I[i], N = rec.N[i], R = rec.R[i];
    if (!(t > I) || !(t < R))
        return 0.0;
    if (t < N)
        return ip.ramp(t - I);
    return 1.0;
}

double sojourn_pdf(const SojournParams& sp, double t)
{
    return sp.pdf(t);
}

double sojourn_cdf(const SojournParams& sp, double t)
{
    return sp.cdf(t);
}

double pairwise_rate(const Population& pop, const TransmissionParams& params, const InfectivityParams& ip,
                     const EpidemicRecord& rec, Id i, Id j, Channel channel, double t)
{
    pop.check_id(i);
    pop.check_id(j);
    const double q = infectivity(ip, rec, i, t);
    if (q == 0.0)
        return 0.0;
    const double s = params.susceptibility(pop.production_type(j));
    const bool pre_notification = t < rec.N[i];
    const auto& net = pop.networks();
    switch (channel) {
    case Channel::FM:
        return pre_notification ? q * s * params.p[0] * net.feedmill.rate(i, j) : 0.0;
    case Channel::SH:
        return pre_notification ? q * s * params.p[1] * net.slaughterhouse.rate(i, j) : 0.0;
    case Channel::CP:
        return pre_notification && net.company.connected(i, j) ? q * s * params.beta[0] : 0.0;
    case Channel::Spatial:
        return q * s * params.beta[1] * spatial_kernel(params.psi, euclidean_distance(pop, i, j));
    case Channel::Background:
        break;
    }
    throw DomainError("background pressure is not a pairwise channel");
}

double total_pressure(const Population& pop, const TransmissionParams& params, const InfectivityParams& ip,
                      const EpidemicRecord& rec, Id j, double t)
{
    pop.check_id(j);
    double sum = params.epsilon;
    for (Id i = 0; i < pop.size(); ++i) {
        if (i == j || !(t > rec.I[i]) || !(t < rec.R[i]))
            continue;
        double src = 0.0;
        for (auto c : {Channel::FM, Channel::SH, Channel::CP, Channel::Spatial})
            src += pairwise_rate(pop, params, ip, rec, i, j, c, t);
        sum += t < rec.N[i] ? src : params.gamma * src;
    }
    return sum;
}

double integrated_pressure(const Population& pop, const TransmissionParams& params, const InfectivityParams& ip,
                           const EpidemicRecord& rec, Id j, double t0, double t1)
{
    pop.check_id(j);
    if (!(t0 <= t1))
        throw InvalidInterval("interval end precedes start");
    double sum = params.epsilon * (t1 - t0);
    const double s = params.susceptibility(pop.production_type(j));
    const auto& net = pop.networks();
    for (Id i = 0; i < pop.size(); ++i) {
        if (i == j || !(rec.I[i] < t1))
            continue;
        const double I = rec.I[i], N = rec.N[i], R = rec.R[i];
        const double kernel = params.beta[1] * spatial_kernel(params.psi, euclidean_distance(pop, i, j));
        const double network = params.p[0] * net.feedmill.rate(i, j) + params.p[1] * net.slaughterhouse.rate(i, j) +
                               (net.company.connected(i, j) ? params.beta[0] : 0.0);
        const double a = std::max(t0, I), b = std::min(t1, N);
        const double ramp = ip.ramp_integral(a - I, b - I);
        const double notified = std::max(0.0, std::min(t1, R) - std::max(t0, N));
        sum += s * ((network + kernel) * ramp + params.gamma * kernel * notified);
    }
    return sum;
}

} // namespace epitrace
