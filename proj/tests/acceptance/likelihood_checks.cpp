#include "acceptance.hpp"
#include "oracle.hpp"

#include "epitrace/likelihood.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>

namespace epitrace::acceptance {

using testing::Instance;

Outcome likelihood_oracle(const Options& opt)
{
    constexpr std::size_t kInstances = 20;
    constexpr double kDelta = 1e-4;
    constexpr double kTolerance = 1e-3;
    Rng rng = Rng::stream(opt.seed, 1);
    std::size_t compared = 0, attempts = 0, traced = 0, contact = 0, mismatched = 0;
    double worst = 0.0;
    while (compared < kInstances && attempts < 10 * kInstances) {
        ++attempts;
        const Instance inst = testing::random_instance(rng);
        const ContactTraceSet cts = inst.tracing();
        const LogValue ct = log_lik_ct(inst.pop, inst.params, inst.ip, inst.sp, inst.rec, cts);
        const LogValue vanilla = log_lik_vanilla(inst.pop, inst.params, inst.ip, inst.sp, inst.rec);
        const double oracle_ct = testing::richardson_log_lik(inst, true, kDelta);
        const double oracle_vanilla = testing::richardson_log_lik(inst, false, kDelta);
        // Impossible configurations must be impossible on both routes.
        if (ct.feasible() != std::isfinite(oracle_ct) || vanilla.feasible() != std::isfinite(oracle_vanilla)) {
            ++mismatched;
            continue;
        }
        if (!ct.feasible() || !vanilla.feasible())
            continue;
        auto rel = [](double a, double b) { return std::abs(a - b) / std::abs(b); };
        worst = std::max({worst, rel(ct.value, oracle_ct), rel(vanilla.value, oracle_vanilla)});
        ++compared;
        traced += cts.traced_count() > 0 ? 1 : 0;
        IncrementalLikelihood like(inst.pop, cts, inst.ip, inst.sp, inst.rec, inst.params);
        for (Id j = 0; j < inst.pop.size(); ++j)
            if (like.contact_state(j)) {
                ++contact;
                break;
            }
    }
    std::ostringstream out;
    out << compared << " instances (" << traced << " traced, " << contact << " with contact infections), "
        << "max relative error " << worst << ", feasibility mismatches " << mismatched;
    return {compared >= kInstances && mismatched == 0 && worst < kTolerance && traced > 0 && traced < compared &&
                contact > 0,
            out.str()};
}

Outcome window_reduction(const Options& opt)
{
    Rng rng = Rng::stream(opt.seed, 2);
    std::size_t equal = 0;
    constexpr std::size_t kInstances = 100;
    for (std::size_t k = 0; k < kInstances; ++k) {
        const Instance inst = testing::random_instance(rng);
        const LogValue a = log_lik_ct(inst.pop, inst.params, inst.ip, inst.sp, inst.rec, inst.no_tracing());
        const LogValue b = log_lik_vanilla(inst.pop, inst.params, inst.ip, inst.sp, inst.rec);
        if (a.reason == b.reason && std::memcmp(&a.value, &b.value, sizeof(double)) == 0)
            ++equal;
    }
    std::ostringstream out;
    out << equal << "/" << kInstances << " bitwise equal";
    return {equal == kInstances, out.str()};
}

} // namespace epitrace::acceptance
