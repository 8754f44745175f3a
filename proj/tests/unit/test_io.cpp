#include "tempdir.hpp"

#include "epitrace/csv.hpp"
#include "epitrace/errors.hpp"
#include "epitrace/io.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>

using namespace epitrace;

namespace {

Population village()
{
    SyntheticPopulationConfig pc;
    pc.size = 120;
    pc.extent_km = 30.0;
    pc.clusters = 4;
    pc.seed = 13;
    return synthesize_population(pc);
}

bool same(double a, double b)
{
    return a == b || (std::isnan(a) && std::isnan(b));
}

} // namespace

TEST_CASE("number formatting round-trips")
{
    for (double v : {0.1, 1.0 / 3.0, 1e-300, 123456.789, -2.5})
        CHECK(std::stod(csv::format(v)) == v);
    CHECK(csv::format(kInf) == "inf");
}

TEST_CASE("events round-trip")
{
    const Population pop = village();
    EpidemicRecord rec(pop.size(), 30.0);
    rec.I[0] = 0.0;
    rec.N[0] = 6.25;
    rec.R[0] = 7.25;
    rec.I[3] = std::numeric_limits<double>::quiet_NaN();
    rec.N[3] = 20.0;
    rec.R[3] = 20.0;
    rec.visit_detected[3] = 1;
    rec.I[7] = 1.0 / 3.0;
    rec.negative_test[7] = 0.125;
    rec.negative_test[9] = 12.0;
    TempDir tmp;
    write_events(rec, pop, tmp / "events.csv");
    const EpidemicRecord back = read_events(tmp / "events.csv", pop, 30.0);
    REQUIRE(back.size() == rec.size());
    for (Id j = 0; j < rec.size(); ++j) {
        CHECK(same(back.I[j], rec.I[j]));
        CHECK(back.N[j] == rec.N[j]);
        CHECK(back.R[j] == rec.R[j]);
        CHECK(back.visit_detected[j] == rec.visit_detected[j]);
        CHECK(same(back.negative_test[j], rec.negative_test[j]));
    }
}

TEST_CASE("malformed events are reported with their row")
{
    const Population pop = village();
    TempDir tmp;
    const auto label = std::to_string(pop.individual(0).label);
    tmp.write("bad_order.csv", "id,I_time,N_time,R_time\n" + label + ",5,4,6\n");
    CHECK_THROWS_AS(read_events(tmp / "bad_order.csv", pop, 30.0), ValidationError);
    tmp.write("unknown.csv", "id,I_time,N_time,R_time\n999999,1,4,6\n");
    CHECK_THROWS_AS(read_events(tmp / "unknown.csv", pop, 30.0), ValidationError);
    tmp.write("junk.csv", "id,I_time,N_time,R_time\n" + label + ",abc,4,6\n");
    try {
        read_events(tmp / "junk.csv", pop, 30.0);
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find("2") != std::string::npos);
    }
    CHECK_THROWS_AS(read_events(tmp / "absent.csv", pop, 30.0), InputError);
}

TEST_CASE("simulation outputs round-trip")
{
    const Population pop = village();
    SimConfig cfg;
    cfg.true_params.beta[1] = 0.05;
    OutbreakSimulation sim(pop, cfg, Rng(5));
    sim.advance_to(35.0);
    Rng trace(6);
    const ContactTraceSet cts = extract_ctd(sim, 35.0, 21.0, 1.0, trace);
    const EpidemicRecord observed = observe(sim.truth(), 35.0);
    TempDir tmp;

    const auto log = sim.contact_log();
    write_contact_log(log, pop, tmp / "contacts.csv");
    const auto log_back = read_contact_log(tmp / "contacts.csv", pop);
    REQUIRE(log_back.size() == log.size());
    for (std::size_t k = 0; k < log.size(); ++k) {
        CHECK(log_back[k].source == log[k].source);
        CHECK(log_back[k].dest == log[k].dest);
        CHECK(log_back[k].channel == log[k].channel);
        CHECK(log_back[k].time == log[k].time);
        CHECK(log_back[k].infected == log[k].infected);
    }

    write_attribution(sim.attribution(), pop, tmp / "attribution.csv");
    const auto at = read_attribution(tmp / "attribution.csv", pop, &sim.truth());
    REQUIRE(at.size() == sim.attribution().size());
    for (std::size_t k = 0; k < at.size(); ++k) {
        CHECK(at[k].id == sim.attribution()[k].id);
        CHECK(at[k].channel == sim.attribution()[k].channel);
        CHECK(at[k].source == sim.attribution()[k].source);
        CHECK(at[k].time == sim.attribution()[k].time);
    }

    write_ctd(cts, pop, tmp / "ctd.csv");
    const ContactTraceSet back = read_ctd(tmp / "ctd.csv", pop, observed, 21.0);
    CHECK(back.traced_count() == cts.traced_count());
    REQUIRE(back.events().size() == cts.events().size());
    for (std::size_t k = 0; k < cts.events().size(); ++k)
        CHECK(back.events()[k] == cts.events()[k]);
}

TEST_CASE("posterior round-trip")
{
    PosteriorSet set;
    set.iterations = 30;
    set.burn_in = 10;
    set.thin = 10;
    for (std::size_t k = 0; k < 2; ++k) {
        PosteriorSample s;
        s.iteration = 20 + 10 * k;
        s.params = TransmissionParams::reference();
        s.params.gamma = 0.1 + 1.0 / 7.0 * static_cast<double>(k);
        s.occults = {{1, 3.5}};
        s.occult_count = 1;
        s.log_posterior = -123.456 - static_cast<double>(k);
        set.samples.push_back(s);
    }
    TempDir tmp;
    write_posterior(set, tmp / "posterior.csv");
    const auto rows = read_posterior(tmp / "posterior.csv");
    REQUIRE(rows.size() == 2);
    for (std::size_t k = 0; k < 2; ++k) {
        CHECK(rows[k].iteration == set.samples[k].iteration);
        CHECK(rows[k].values == pack(set.samples[k].params));
        CHECK(rows[k].occult_count == 1);
        CHECK(rows[k].log_posterior == set.samples[k].log_posterior);
    }
}
