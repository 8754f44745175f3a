#include "tempdir.hpp"

#include "epitrace/errors.hpp"
#include "epitrace/population.hpp"
#include "epitrace/rng.hpp"

#include <doctest.h>

#include <algorithm>
#include <set>

using namespace epitrace;

namespace {

void write_three(const TempDir& dir)
{
    dir.write("population.csv", "id,x_km,y_km,production_type\n1,0,0,1\n2,3,4,2\n7,1,1,10\n");
}

} // namespace

TEST_CASE("three individuals without network files")
{
    TempDir dir;
    write_three(dir);
    const Population pop = load_population(dir.path());
    CHECK(pop.size() == 3);
    CHECK(pop.networks().feedmill.size() == 0);
    CHECK(pop.networks().slaughterhouse.size() == 0);
    CHECK(pop.networks().company.edge_count() == 0);
    CHECK(pop.index_of(7) == 2);
    CHECK(pop.production_type(2) == 10);
    CHECK_THROWS_AS(pop.index_of(3), UnknownId);
}

TEST_CASE("duplicate frequency edges sum and rates are converted to days")
{
    TempDir dir;
    write_three(dir);
    dir.write("feedmill.csv", "src,dst,contacts_per_week\n1,2,0.5\n1,2,0.25\n");
    const Population pop = load_population(dir.path());
    CHECK(pop.networks().feedmill.size() == 1);
    CHECK(pop.networks().feedmill.rate(0, 1) == doctest::Approx(0.75 / 7.0));
    // Directed: no reverse edge.
    CHECK(pop.networks().feedmill.rate(1, 0) == 0.0);
}

TEST_CASE("malformed network files are rejected")
{
    TempDir dir;
    write_three(dir);
    SUBCASE("self edge")
    {
        dir.write("feedmill.csv", "src,dst,contacts_per_week\n7,7,1.0\n");
        CHECK_THROWS_AS(load_population(dir.path()), ValidationError);
    }
    SUBCASE("dangling id")
    {
        dir.write("slaughterhouse.csv", "src,dst,contacts_per_week\n1,99,1.0\n");
        CHECK_THROWS_AS(load_population(dir.path()), ValidationError);
    }
    SUBCASE("non-positive rate")
    {
        dir.write("feedmill.csv", "src,dst,contacts_per_week\n1,2,0\n");
        CHECK_THROWS_AS(load_population(dir.path()), ValidationError);
    }
    SUBCASE("duplicate association")
    {
        dir.write("company.csv", "src,dst\n1,2\n2,1\n");
        CHECK_THROWS_AS(load_population(dir.path()), ValidationError);
    }
    SUBCASE("malformed number")
    {
        dir.write("feedmill.csv", "src,dst,contacts_per_week\n1,2,abc\n");
        CHECK_THROWS_AS(load_population(dir.path()), ParseError);
    }
    SUBCASE("production type out of range")
    {
        dir.write("population.csv", "id,x_km,y_km,production_type\n1,0,0,11\n");
        CHECK_THROWS_AS(load_population(dir.path()), Error);
    }
}

TEST_CASE("parse errors name the row")
{
    TempDir dir;
    write_three(dir);
    dir.write("feedmill.csv", "src,dst,contacts_per_week\n1,2,1\n1,3,x\n");
    try {
        load_population(dir.path());
        FAIL("expected a parse error");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find('3') != std::string::npos);
    }
}

TEST_CASE("euclidean distance")
{
    TempDir dir;
    dir.write("population.csv", "id,x_km,y_km,production_type\n1,0,0,1\n2,3,4,1\n3,1,1,1\n4,1,1,1\n");
    const Population pop = load_population(dir.path());
    CHECK(euclidean_distance(pop, 0, 1) == 5.0);
    CHECK(euclidean_distance(pop, 1, 0) == 5.0);
    CHECK(euclidean_distance(pop, 1, 1) == 0.0);
    CHECK(euclidean_distance(pop, 2, 3) == 0.0);
    CHECK_THROWS_AS(euclidean_distance(pop, 0, 9), UnknownId);
}

TEST_CASE("distance is symmetric and obeys the triangle inequality")
{
    SyntheticPopulationConfig cfg;
    cfg.size = 60;
    const Population pop = synthesize_population(cfg);
    Rng rng(3);
    for (int k = 0; k < 500; ++k) {
        const Id a = rng.index(pop.size()), b = rng.index(pop.size()), c = rng.index(pop.size());
        CHECK(euclidean_distance(pop, a, b) == euclidean_distance(pop, b, a));
        CHECK(euclidean_distance(pop, a, c) <= euclidean_distance(pop, a, b) + euclidean_distance(pop, b, c) + 1e-12);
    }
}

TEST_CASE("potential infectors")
{
    TempDir dir;
    write_three(dir);
    dir.write("feedmill.csv", "src,dst,contacts_per_week\n1,2,1\n");
    dir.write("company.csv", "src,dst\n1,2\n");
    const Population pop = load_population(dir.path());
    const auto two = potential_infectors(pop, 1);
    REQUIRE(two.size() == 2);
    CHECK(two[0] == PotentialInfector{0, Channel::FM});
    CHECK(two[1] == PotentialInfector{0, Channel::CP});
    CHECK(potential_infectors(pop, 2).empty());
    CHECK_THROWS_AS(potential_infectors(pop, 5), UnknownId);
}

TEST_CASE("potential infectors agree with a brute-force scan")
{
    SyntheticPopulationConfig cfg;
    cfg.size = 300;
    cfg.seed = 11;
    const Population pop = synthesize_population(cfg);
    const auto& net = pop.networks();
    for (Id j = 0; j < pop.size(); ++j) {
        std::set<std::pair<Id, int>> expected;
        for (const auto& e : net.feedmill.edges())
            if (e.dst == j)
                expected.insert({e.src, static_cast<int>(Channel::FM)});
        for (const auto& e : net.slaughterhouse.edges())
            if (e.dst == j)
                expected.insert({e.src, static_cast<int>(Channel::SH)});
        for (Id i = 0; i < pop.size(); ++i)
            if (i != j && net.company.connected(i, j))
                expected.insert({i, static_cast<int>(Channel::CP)});
        std::set<std::pair<Id, int>> got;
        for (const auto& p : potential_infectors(pop, j))
            got.insert({p.source, static_cast<int>(p.channel)});
        CHECK(got == expected);
    }
}

TEST_CASE("population round trip")
{
    SyntheticPopulationConfig cfg;
    cfg.size = 40;
    const Population pop = synthesize_population(cfg);
    TempDir dir;
    write_population(pop, dir.path());
    const Population back = load_population(dir.path());
    REQUIRE(back.size() == pop.size());
    for (Id i = 0; i < pop.size(); ++i) {
        CHECK(back.individual(i).label == pop.individual(i).label);
        CHECK(back.individual(i).location.x == pop.individual(i).location.x);
        CHECK(back.production_type(i) == pop.production_type(i));
    }
    CHECK(back.networks().feedmill.size() == pop.networks().feedmill.size());
    for (const auto& e : pop.networks().feedmill.edges())
        CHECK(back.networks().feedmill.rate(e.src, e.dst) == doctest::Approx(e.rate).epsilon(1e-12));
    CHECK(back.networks().company.edge_count() == pop.networks().company.edge_count());
}

TEST_CASE("synthetic populations are reproducible")
{
    SyntheticPopulationConfig cfg;
    cfg.size = 100;
    const Population a = synthesize_population(cfg);
    const Population b = synthesize_population(cfg);
    for (Id i = 0; i < a.size(); ++i)
        CHECK(a.individual(i).location.x == b.individual(i).location.x);
    CHECK(a.networks().feedmill.size() == b.networks().feedmill.size());
    CHECK(a.networks().feedmill.size() > 0);
    CHECK(a.networks().slaughterhouse.size() > 0);
}

TEST_CASE("channel names")
{
    for (Channel c : {Channel::FM, Channel::SH, Channel::CP, Channel::Spatial, Channel::Background})
        CHECK(parse_channel(channel_name(c)) == c);
    CHECK_THROWS(parse_channel("teleport"));
}
