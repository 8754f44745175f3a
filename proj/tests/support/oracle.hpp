#ifndef EPITRACE_TESTS_ORACLE_HPP
#define EPITRACE_TESTS_ORACLE_HPP

#include "epitrace/likelihood.hpp"
#include "epitrace/model.hpp"
#include "epitrace/population.hpp"
#include "epitrace/rng.hpp"

#include <utility>
#include <vector>

namespace epitrace::testing {

/// A small fully specified likelihood problem.
struct Instance
{
    Population pop;
    TransmissionParams params;
    InfectivityParams ip;
    SojournParams sp;
    EpidemicRecord rec;
    double window = 10.0;
    std::vector<std::pair<Id, double>> traced; ///< (id, N)
    std::vector<ContactEvent> events;

    ContactTraceSet tracing() const { return ContactTraceSet(pop.size(), window, traced, events); }
    ContactTraceSet no_tracing() const { return ContactTraceSet(pop.size(), window); }
};

struct InstanceOptions
{
    std::size_t min_size = 3;
    std::size_t max_size = 5;
    double trace_probability = 0.6;
    double contact_infection_probability = 0.6;
    bool negative_tests = true;
    bool visit_detection = true;
};

/// Random instance; every infected individual has a known infection time.
Instance random_instance(Rng& rng, const InstanceOptions& options = {});

/// Log-likelihood by direct evaluation of the discretised product: the
/// unobserved part of each individual's exposure is sum log(1 - w lambda)
/// over bins of width delta anchored at the index infection; the traced part
/// is the per-contact geometric product. Returns -inf when impossible.
/// With `traced` false every contact is unobserved.
double discretised_log_lik(const Instance& inst, bool traced, double delta);

/// 2 L(delta/2) - L(delta).
double richardson_log_lik(const Instance& inst, bool traced, double delta);

} // namespace epitrace::testing

#endif // EPITRACE_TESTS_ORACLE_HPP
