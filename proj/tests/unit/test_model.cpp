#include "oracle.hpp"

#include "epitrace/errors.hpp"
#include "epitrace/model.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <doctest.h>

#include <algorithm>
#include <cmath>

using namespace epitrace;

namespace {

using boost::math::quadrature::gauss_kronrod;

// Two farms 5 km apart with a feedmill edge 0 -> 1 at 2/day and a company link.
Population two_farms(int type_of_second = 2)
{
    std::vector<Individual> people(2);
    people[0].label = 1;
    people[1].label = 2;
    people[1].location = {3.0, 4.0};
    people[1].production_type = type_of_second;
    NetworkSet net;
    net.feedmill = RateLayer(2, {{0, 1, 2.0}});
    net.company = AssociationLayer(2, {{0, 1}});
    return Population(std::move(people), std::move(net));
}

EpidemicRecord infective_zero(double I, double N, double R)
{
    EpidemicRecord rec(2, 100.0);
    rec.I[0] = I;
    rec.N[0] = N;
    rec.R[0] = R;
    return rec;
}

// Piecewise quadrature of total_pressure between the record's event times.
double quadrature(const Population& pop, const TransmissionParams& p, const InfectivityParams& ip,
                  const EpidemicRecord& rec, Id j, double t0, double t1)
{
    std::vector<double> cuts{t0, t1};
    for (Id i = 0; i < rec.size(); ++i)
        for (double t : {rec.I[i], rec.N[i], rec.R[i]})
            if (t > t0 && t < t1)
                cuts.push_back(t);
    std::sort(cuts.begin(), cuts.end());
    double sum = 0.0;
    for (std::size_t k = 0; k + 1 < cuts.size(); ++k)
        sum += gauss_kronrod<double, 61>::integrate(
            [&](double t) { return total_pressure(pop, p, ip, rec, j, t); }, cuts[k], cuts[k + 1], 15, 1e-14);
    return sum;
}

} // namespace

TEST_CASE("reference parameters")
{
    const TransmissionParams p = TransmissionParams::reference();
    CHECK(p.epsilon == 1e-6);
    CHECK(p.p[0] == 0.3);
    CHECK(p.p[1] == 0.9);
    CHECK(p.beta[0] == 0.008);
    CHECK(p.beta[1] == 0.009);
    CHECK(p.gamma == 0.5);
    CHECK(p.psi == 0.2);
    CHECK(p.eta[0] == 1.0);
    CHECK(p.eta[1] == 0.6);
    CHECK(p.eta[9] == 0.3);
    CHECK(p.valid());
}

TEST_CASE("parameter invariants")
{
    TransmissionParams p = TransmissionParams::reference();
    p.eta[0] = 0.9;
    CHECK_THROWS_AS(p.validate(), DomainError);
    p = TransmissionParams::reference();
    p.p[1] = 1.1;
    CHECK_FALSE(p.valid());
    p = TransmissionParams::reference();
    p.gamma = -0.1;
    CHECK_FALSE(p.valid());
    p = TransmissionParams::reference();
    p.eta[4] = 1.2;
    CHECK_FALSE(p.valid());
}

TEST_CASE("infectivity")
{
    const InfectivityParams ip;
    const EpidemicRecord rec = infective_zero(2.0, 8.0, 9.0);
    CHECK(infectivity(ip, rec, 0, 2.0) == 0.0);
    CHECK(ip.ramp(0.0) == doctest::Approx(1.0 / 61.0).epsilon(1e-15));
    CHECK(infectivity(ip, rec, 0, std::nextafter(2.0, 3.0)) == doctest::Approx(1.0 / 61.0));
    CHECK(infectivity(ip, rec, 0, 8.0) == 1.0);
    CHECK(infectivity(ip, rec, 0, 8.5) == 1.0);
    CHECK(infectivity(ip, rec, 0, 9.0) == 0.0);
    CHECK(infectivity(ip, rec, 0, 20.0) == 0.0);
    CHECK(infectivity(ip, rec, 1, 5.0) == 0.0);
    double prev = 0.0;
    for (double t = 2.0; t < 9.0; t += 0.01) {
        const double q = infectivity(ip, rec, 0, t);
        CHECK(q >= prev);
        CHECK(q <= 1.0);
        prev = q;
    }
}

TEST_CASE("ramp integral is the antiderivative")
{
    const InfectivityParams ip;
    for (double T : {0.5, 3.0, 10.0, 40.0}) {
        const double quad = gauss_kronrod<double, 61>::integrate([&](double t) { return ip.ramp(t); }, 0.0, T, 15,
                                                                 1e-14);
        CHECK(ip.ramp_integral(0.0, T) == doctest::Approx(quad).epsilon(1e-12));
    }
    CHECK(ip.ramp_integral(3.0, 1.0) == 0.0);
    // Large arguments stay finite.
    CHECK(std::isfinite(ip.ramp_primitive(1e4)));
}

TEST_CASE("sojourn distribution")
{
    const SojournParams sp;
    CHECK(sojourn_pdf(sp, 0.0) == doctest::Approx(0.012).epsilon(1e-14));
    CHECK(sojourn_cdf(sp, 0.0) == 0.0);
    CHECK_THROWS_AS(sojourn_cdf(sp, -1.0), DomainError);
    double prev = 0.0;
    for (double t = 0.0; t <= 30.0; t += 0.25) {
        const double F = sojourn_cdf(sp, t);
        CHECK(F >= prev);
        prev = F;
        const double h = 1e-5;
        const double derivative = (sojourn_cdf(sp, t + h) - sojourn_cdf(sp, std::max(0.0, t - h))) /
                                  (t + h - std::max(0.0, t - h));
        CHECK(std::abs(sojourn_pdf(sp, t) - derivative) < 1e-6);
        if (F < 0.999)
            CHECK(sp.log_survival(t) == doctest::Approx(std::log1p(-F)).epsilon(1e-10));
    }
    CHECK(sojourn_cdf(sp, 30.0) == doctest::Approx(1.0));
    CHECK(sp.quantile(sp.cdf(4.0)) == doctest::Approx(4.0).epsilon(1e-10));
    CHECK(sp.cdf(sp.median()) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("sojourn mean by quadrature")
{
    // a = 0.015, b = 0.8 give a mean of 4.6155 days.
    const SojournParams sp;
    const double quad =
        gauss_kronrod<double, 61>::integrate([&](double t) { return t * sp.pdf(t); }, 0.0, 40.0, 15, 1e-14);
    CHECK(quad == doctest::Approx(sp.mean()).epsilon(1e-10));
    CHECK(sp.mean() == doctest::Approx(4.6155).epsilon(1e-4));
}

TEST_CASE("pairwise rates")
{
    const Population pop = two_farms();
    const InfectivityParams ip;
    TransmissionParams p = TransmissionParams::reference();
    const EpidemicRecord rec = infective_zero(0.0, 8.0, 9.0);

    SUBCASE("spatial kernel is centred at 5 km")
    {
        CHECK(pairwise_rate(pop, p, ip, rec, 0, 1, Channel::Spatial, 8.5) ==
              doctest::Approx(p.beta[1] * p.eta[1]).epsilon(1e-15));
        CHECK(spatial_kernel(p.psi, 5.0) == 1.0);
        CHECK(std::isfinite(spatial_kernel(p.psi, 0.0)));
    }
    SUBCASE("network channels stop at notification")
    {
        CHECK(pairwise_rate(pop, p, ip, rec, 0, 1, Channel::FM, 8.5) == 0.0);
        CHECK(pairwise_rate(pop, p, ip, rec, 0, 1, Channel::CP, 8.5) == 0.0);
        CHECK(pairwise_rate(pop, p, ip, rec, 0, 1, Channel::SH, 3.0) == 0.0); // no edge
    }
    SUBCASE("feedmill product formula")
    {
        // q = 0.5 at tau = log(mu)/nu; s = 0.6; r = 2/day; p1 = 0.3.
        const double tau = std::log(ip.mu) / ip.nu;
        CHECK(ip.ramp(tau) == doctest::Approx(0.5).epsilon(1e-14));
        CHECK(pairwise_rate(pop, p, ip, rec, 0, 1, Channel::FM, tau) == doctest::Approx(0.18).epsilon(1e-14));
    }
    SUBCASE("company")
    {
        CHECK(pairwise_rate(pop, p, ip, rec, 0, 1, Channel::CP, 3.0) ==
              doctest::Approx(ip.ramp(3.0) * 0.6 * p.beta[0]).epsilon(1e-14));
    }
    SUBCASE("background is not a pair channel")
    {
        CHECK_THROWS(pairwise_rate(pop, p, ip, rec, 0, 1, Channel::Background, 3.0));
    }
    CHECK_THROWS_AS(pairwise_rate(pop, p, ip, rec, 0, 7, Channel::FM, 3.0), UnknownId);
}

TEST_CASE("total pressure")
{
    const Population pop = two_farms(1);
    const InfectivityParams ip;
    TransmissionParams p = TransmissionParams::reference();
    p.p = {0.0, 0.0};
    p.beta[0] = 0.0;
    const EpidemicRecord none(2, 100.0);
    CHECK(total_pressure(pop, p, ip, none, 1, 3.0) == p.epsilon);

    const EpidemicRecord rec = infective_zero(0.0, 8.0, 9.0);
    CHECK(total_pressure(pop, p, ip, rec, 1, 3.0) == doctest::Approx(p.epsilon + ip.ramp(3.0) * p.beta[1]));
    CHECK(total_pressure(pop, p, ip, rec, 1, 8.5) == doctest::Approx(p.epsilon + p.gamma * p.beta[1]));
    CHECK(total_pressure(pop, p, ip, rec, 1, 9.5) == p.epsilon);
}

TEST_CASE("total pressure is additive over infectives")
{
    Rng rng(8);
    for (int k = 0; k < 10; ++k) {
        const auto inst = testing::random_instance(rng);
        const auto& rec = inst.rec;
        const Id j = rec.size() - 1;
        for (double t : {3.0, 7.5, 12.0}) {
            double parts = inst.params.epsilon;
            for (Id i = 0; i < rec.size(); ++i) {
                if (i == j)
                    continue;
                EpidemicRecord only(rec.size(), rec.t_obs);
                only.I[i] = rec.I[i];
                only.N[i] = rec.N[i];
                only.R[i] = rec.R[i];
                parts += total_pressure(inst.pop, inst.params, inst.ip, only, j, t) - inst.params.epsilon;
            }
            EpidemicRecord without_j = rec;
            without_j.I[j] = without_j.N[j] = without_j.R[j] = kInf;
            CHECK(total_pressure(inst.pop, inst.params, inst.ip, without_j, j, t) == doctest::Approx(parts));
        }
    }
}

TEST_CASE("integrated pressure")
{
    const Population pop = two_farms(1);
    const InfectivityParams ip;
    TransmissionParams p = TransmissionParams::reference();
    p.p = {0.0, 0.0};
    p.beta[0] = 0.0;
    const EpidemicRecord none(2, 100.0);
    CHECK(integrated_pressure(pop, p, ip, none, 1, 2.0, 7.0) == doctest::Approx(5.0 * p.epsilon));
    CHECK_THROWS_AS(integrated_pressure(pop, p, ip, none, 1, 7.0, 2.0), InvalidInterval);

    const EpidemicRecord rec = infective_zero(1.0, 50.0, 60.0);
    const double T = 6.0;
    const double expected =
        p.epsilon * T + p.beta[1] * (std::log(ip.mu + std::exp(ip.nu * T)) - std::log(ip.mu + 1.0)) / ip.nu;
    CHECK(integrated_pressure(pop, p, ip, rec, 1, 1.0, 1.0 + T) == doctest::Approx(expected).epsilon(1e-12));
    CHECK(integrated_pressure(pop, p, ip, rec, 1, 1.0, 1.0 + T) ==
          doctest::Approx(quadrature(pop, p, ip, rec, 1, 1.0, 1.0 + T)).epsilon(1e-10));

    const double whole = integrated_pressure(pop, p, ip, rec, 1, 0.0, 70.0);
    const double split = integrated_pressure(pop, p, ip, rec, 1, 0.0, 50.0) +
                         integrated_pressure(pop, p, ip, rec, 1, 50.0, 70.0);
    CHECK(whole == doctest::Approx(split).epsilon(1e-13));
}

TEST_CASE("integrated pressure matches quadrature on random instances")
{
    Rng rng(21);
    for (int k = 0; k < 15; ++k) {
        const auto inst = testing::random_instance(rng);
        for (Id j = 0; j < inst.rec.size(); ++j) {
            EpidemicRecord rec = inst.rec;
            rec.I[j] = rec.N[j] = rec.R[j] = kInf;
            const double exact = integrated_pressure(inst.pop, inst.params, inst.ip, rec, j, 0.0, rec.t_obs);
            const double quad = quadrature(inst.pop, inst.params, inst.ip, rec, j, 0.0, rec.t_obs);
            CHECK(std::abs(exact - quad) <= 1e-8 * std::abs(quad));
        }
    }
}

TEST_CASE("epidemic record checks")
{
    EpidemicRecord rec(3, 20.0);
    rec.I[0] = 1.0;
    rec.N[0] = 5.0;
    rec.R[0] = 6.0;
    rec.I[1] = 10.0;
    CHECK_NOTHROW(rec.validate());
    CHECK(rec.index_case() == Id{0});
    CHECK(rec.occult(1));
    CHECK_FALSE(rec.occult(0));
    CHECK(rec.occult_count() == 1);
    CHECK(rec.infected_count() == 2);

    EpidemicRecord bad = rec;
    bad.N[0] = 0.5;
    CHECK_THROWS_AS(bad.validate(), ValidationError);
    bad = rec;
    bad.N[2] = 4.0;
    CHECK_THROWS_AS(bad.validate(), ValidationError);
    bad = rec;
    bad.negative_test[1] = 11.0;
    CHECK_THROWS_AS(bad.validate(), ValidationError);
    CHECK_NOTHROW(bad.validate_structure());
    bad = rec;
    bad.visit_detected[0] = 1;
    CHECK_THROWS_AS(bad.validate(), ValidationError);
}
