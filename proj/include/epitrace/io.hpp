#ifndef EPITRACE_IO_HPP
#define EPITRACE_IO_HPP

#include "epitrace/likelihood.hpp"
#include "epitrace/mcmc.hpp"
#include "epitrace/model.hpp"
#include "epitrace/population.hpp"
#include "epitrace/simulator.hpp"
#include "epitrace/surveillance.hpp"

#include <filesystem>
#include <vector>

namespace epitrace {

/// Events CSV `id,I_time,N_time,R_time[,visit_detected,negative_test]`.
/// `inf` or an empty field means censored; `nan` marks a latent infection
/// time. Individuals without a row are uninfected.
void write_events(const EpidemicRecord& rec, const Population& pop, const std::filesystem::path& file);
EpidemicRecord read_events(const std::filesystem::path& file, const Population& pop, double t_obs);

/// Contact-trace CSV `traced_id,source,dest,channel,time_days`. A row with
/// only traced_id declares a traced case; each event row names a traced
/// case whose window contains it.
void write_ctd(const ContactTraceSet& cts, const Population& pop, const std::filesystem::path& file);
ContactTraceSet read_ctd(const std::filesystem::path& file, const Population& pop, const EpidemicRecord& rec,
                         double window);

void write_contact_log(const std::vector<ContactRecord>& log, const Population& pop,
                       const std::filesystem::path& file);
std::vector<ContactRecord> read_contact_log(const std::filesystem::path& file, const Population& pop);

/// `id,channel,source` with channel INDEX for the index case.
void write_attribution(const std::vector<Attribution>& attribution, const Population& pop,
                       const std::filesystem::path& file);
/// Times are not stored; they are taken from `rec` when given.
std::vector<Attribution> read_attribution(const std::filesystem::path& file, const Population& pop,
                                          const EpidemicRecord* rec = nullptr);

struct PosteriorRow
{
    std::size_t iteration;
    std::array<double, kParamDim> values;
    std::size_t occult_count;
    double log_posterior;
};

/// `iteration,<parameter names>,m,log_posterior`.
void write_posterior(const PosteriorSet& set, const std::filesystem::path& file);
std::vector<PosteriorRow> read_posterior(const std::filesystem::path& file);
/// `iteration,id,I_time`.
void write_occults(const PosteriorSet& set, const Population& pop, const std::filesystem::path& file);
void write_diagnostics(const PosteriorSet& set, const std::filesystem::path& file);

void write_study(const StudyResult& study, const std::filesystem::path& file);
void write_study_summary(const std::vector<StrategySummary>& summary, const std::filesystem::path& file);
void write_cull_log(const StudyResult& study, const Population& pop, const std::filesystem::path& file);

} // namespace epitrace

#endif // EPITRACE_IO_HPP
