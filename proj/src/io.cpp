#include "epitrace/io.hpp"

#include "epitrace/csv.hpp"
#include "epitrace/errors.hpp"

#include <cmath>
#include <set>

namespace epitrace {

namespace {

std::string time_field(double t)
{
    return std::isnan(t) ? "nan" : csv::format(t);
}

std::string label(const Population& pop, Id j)
{
    return std::to_string(pop.individual(j).label);
}

Id lookup(const csv::Reader& in, const Population& pop, std::size_t k)
{
    const auto id = in.as_int(k);
    if (!pop.has_label(id))
        throw ValidationError(in.source(), in.row(), "unknown id " + std::to_string(id));
    return pop.index_of(id);
}

double read_time_or_latent(const csv::Reader& in, std::size_t k)
{
    if (in.field(k) == "nan")
        return std::nan("");
    return in.as_time(k);
}

bool header_is(const csv::Reader& in, std::initializer_list<std::string_view> names)
{
    if (in.columns() != names.size())
        return false;
    std::size_t k = 0;
    for (auto n : names)
        if (in.field(k++) != n)
            return false;
    return true;
}

} // namespace

// ------------------------------------------------------------------ events

void write_events(const EpidemicRecord& rec, const Population& pop, const std::filesystem::path& file)
{
    if (rec.size() != pop.size())
        throw DomainError("record does not match the population size");
    bool extended = false;
    for (Id j = 0; j < rec.size(); ++j)
        extended = extended || rec.visit_detected[j] || rec.negative_test[j] > -kInf;
    auto out = csv::open_output(file);
    out << "id,I_time,N_time,R_time" << (extended ? ",visit_detected,negative_test" : "") << '\n';
    for (Id j = 0; j < rec.size(); ++j) {
        const bool listed = rec.infected(j) || rec.N[j] < kInf || rec.negative_test[j] > -kInf;
        if (!listed)
            continue;
        out << label(pop, j) << ',' << time_field(rec.I[j]) << ',' << csv::format(rec.N[j]) << ','
            << csv::format(rec.R[j]);
        if (extended)
            out << ',' << (rec.visit_detected[j] ? 1 : 0) << ',' << csv::format(rec.negative_test[j]);
        out << '\n';
    }
}

EpidemicRecord read_events(const std::filesystem::path& file, const Population& pop, double t_obs)
{
    csv::Reader in(file);
    if (!in.next())
        throw ParseError(in.source(), 1, "missing header");
    const bool extended = header_is(in, {"id", "I_time", "N_time", "R_time", "visit_detected", "negative_test"});
    if (!extended && !header_is(in, {"id", "I_time", "N_time", "R_time"}))
        in.fail("expected header 'id,I_time,N_time,R_time[,visit_detected,negative_test]'");
    EpidemicRecord rec(pop.size(), t_obs);
    std::vector<char> seen(pop.size(), 0);
    while (in.next()) {
        in.require_columns(extended ? 6 : 4);
        const Id j = lookup(in, pop, 0);
        if (seen[j])
            throw ValidationError(in.source(), in.row(), "duplicate id");
        seen[j] = 1;
        rec.I[j] = read_time_or_latent(in, 1);
        rec.N[j] = in.as_time(2);
        rec.R[j] = in.as_time(3);
        if (extended) {
            const auto flag = in.as_int(4);
            if (flag != 0 && flag != 1)
                throw ValidationError(in.source(), in.row(), "visit_detected must be 0 or 1");
            rec.visit_detected[j] = static_cast<char>(flag);
            rec.negative_test[j] = in.empty(5) ? -kInf : in.as_double(5);
        }
    }
    try {
        rec.validate();
    } catch (const ValidationError& e) {
        throw ValidationError(in.source() + ": " + e.what());
    }
    return rec;
}

// --------------------------------------------------------------------- CTD

void write_ctd(const ContactTraceSet& cts, const Population& pop, const std::filesystem::path& file)
{
    auto out = csv::open_output(file);
    out << "traced_id,source,dest,channel,time_days\n";
    for (Id j = 0; j < cts.population_size(); ++j)
        if (cts.traced(j))
            out << label(pop, j) << ",,,,\n";
    for (const auto& e : cts.events()) {
        const Id owner = cts.in_window(e.dest, e.time) ? e.dest : e.source;
        out << label(pop, owner) << ',' << label(pop, e.source) << ',' << label(pop, e.dest) << ','
            << channel_name(e.channel) << ',' << csv::format(e.time) << '\n';
    }
}

ContactTraceSet read_ctd(const std::filesystem::path& file, const Population& pop, const EpidemicRecord& rec,
                         double window)
{
    csv::Reader in(file);
    in.expect_header({"traced_id", "source", "dest", "channel", "time_days"});
    std::set<Id> traced;
    std::vector<std::pair<Id, std::size_t>> owners; // (traced id, row) for event rows
    std::vector<ContactEvent> events;
    while (in.next()) {
        in.require_columns(5);
        const Id owner = lookup(in, pop, 0);
        if (in.empty(1) && in.empty(2) && in.empty(3) && in.empty(4)) {
            if (!(rec.N[owner] <= rec.t_obs))
                throw ValidationError(in.source(), in.row(), "traced case is not notified by the observation time");
            traced.insert(owner);
            continue;
        }
        const Id src = lookup(in, pop, 1);
        const Id dst = lookup(in, pop, 2);
        Channel c;
        try {
            c = parse_channel(in.field(3));
        } catch (const Error& e) {
            throw ValidationError(in.source(), in.row(), e.what());
        }
        if (owner != src && owner != dst)
            throw ValidationError(in.source(), in.row(), "traced id is neither source nor destination");
        owners.emplace_back(owner, in.row());
        events.push_back({src, dst, c, in.as_double(4)});
    }
    for (const auto& [owner, row] : owners)
        if (!traced.count(owner))
            throw ValidationError(in.source(), row, "contact reported for an undeclared traced case");
    std::vector<std::pair<Id, double>> windows;
    for (Id j : traced)
        windows.emplace_back(j, rec.N[j]);
    try {
        ContactTraceSet cts(pop.size(), window, windows, std::move(events));
        cts.validate(rec);
        return cts;
    } catch (const ValidationError& e) {
        throw ValidationError(in.source() + ": " + e.what());
    }
}

// ------------------------------------------------------ simulation outputs

void write_contact_log(const std::vector<ContactRecord>& log, const Population& pop,
                       const std::filesystem::path& file)
{
    auto out = csv::open_output(file);
    out << "source,dest,channel,time,infected\n";
    for (const auto& c : log)
        out << label(pop, c.source) << ',' << label(pop, c.dest) << ',' << channel_name(c.channel) << ','
            << csv::format(c.time) << ',' << (c.infected ? 1 : 0) << '\n';
}

std::vector<ContactRecord> read_contact_log(const std::filesystem::path& file, const Population& pop)
{
    csv::Reader in(file);
    in.expect_header({"source", "dest", "channel", "time", "infected"});
    std::vector<ContactRecord> out;
    while (in.next()) {
        in.require_columns(5);
        const Id src = lookup(in, pop, 0), dst = lookup(in, pop, 1);
        const Channel c = parse_channel(in.field(2));
        const auto flag = in.as_int(4);
        if (flag != 0 && flag != 1)
            in.fail("infected must be 0 or 1");
        out.push_back({src, dst, c, in.as_double(3), flag == 1});
    }
    return out;
}

void write_attribution(const std::vector<Attribution>& attribution, const Population& pop,
                       const std::filesystem::path& file)
{
    auto out = csv::open_output(file);
    out << "id,channel,source\n";
    for (const auto& a : attribution) {
        out << label(pop, a.id) << ',' << (a.channel ? channel_name(*a.channel) : "INDEX") << ',';
        if (a.source)
            out << label(pop, *a.source);
        out << '\n';
    }
}

std::vector<Attribution> read_attribution(const std::filesystem::path& file, const Population& pop,
                                          const EpidemicRecord* rec)
{
    csv::Reader in(file);
    in.expect_header({"id", "channel", "source"});
    std::vector<Attribution> out;
    while (in.next()) {
        in.require_columns(3);
        Attribution a{lookup(in, pop, 0), std::nullopt, std::nullopt, std::nan("")};
        if (in.field(1) != "INDEX")
            a.channel = parse_channel(in.field(1));
        if (!in.empty(2))
            a.source = lookup(in, pop, 2);
        if (rec)
            a.time = rec->I.at(a.id);
        out.push_back(a);
    }
    return out;
}

// --------------------------------------------------------------- posterior

void write_posterior(const PosteriorSet& set, const std::filesystem::path& file)
{
    auto out = csv::open_output(file);
    out << "iteration";
    for (auto name : kParamNames)
        out << ',' << name;
    out << ",m,log_posterior\n";
    for (const auto& s : set.samples) {
        out << s.iteration;
        for (double v : pack(s.params))
            out << ',' << csv::format(v);
        out << ',' << s.occult_count << ',' << csv::format(s.log_posterior) << '\n';
    }
}

std::vector<PosteriorRow> read_posterior(const std::filesystem::path& file)
{
    csv::Reader in(file);
    if (!in.next())
        throw ParseError(in.source(), 1, "missing header");
    in.require_columns(kParamDim + 3);
    if (in.field(0) != "iteration")
        in.fail("expected posterior header");
    for (std::size_t k = 0; k < kParamDim; ++k)
        if (in.field(k + 1) != kParamNames[k])
            in.fail("unexpected column '" + std::string(in.field(k + 1)) + "'");
    std::vector<PosteriorRow> out;
    while (in.next()) {
        in.require_columns(kParamDim + 3);
        PosteriorRow r{};
        r.iteration = static_cast<std::size_t>(in.as_int(0));
        for (std::size_t k = 0; k < kParamDim; ++k)
            r.values[k] = in.as_double(k + 1);
        r.occult_count = static_cast<std::size_t>(in.as_int(kParamDim + 1));
        r.log_posterior = in.as_double(kParamDim + 2);
        out.push_back(r);
    }
    return out;
}

void write_occults(const PosteriorSet& set, const Population& pop, const std::filesystem::path& file)
{
    auto out = csv::open_output(file);
    out << "iteration,id,I_time\n";
    for (const auto& s : set.samples)
        for (const auto& [id, t] : s.occults)
            out << s.iteration << ',' << label(pop, id) << ',' << csv::format(t) << '\n';
}

void write_diagnostics(const PosteriorSet& set, const std::filesystem::path& file)
{
    const auto& d = set.diagnostics;
    auto out = csv::open_output(file);
    out << "iterations " << set.iterations << "\nburn_in " << set.burn_in << "\nthin " << set.thin
        << "\nretained " << set.samples.size() << "\n\nmove proposed accepted rate\n";
    auto line = [&](const char* name, const MoveStats& m) {
        out << name << ' ' << m.proposed << ' ' << m.accepted << ' ' << csv::format(m.rate()) << '\n';
    };
    line("parameters", d.params);
    line("contact_to_contact", d.contact_to_contact);
    line("free_to_free", d.free_to_free);
    line("free_to_contact", d.free_to_contact);
    line("contact_to_free", d.contact_to_free);
    line("add_occult", d.add);
    line("delete_occult", d.remove);
    out << "\ncache_checks " << d.cache_checks << "\nmax_cache_error " << csv::format(d.max_cache_error)
        << "\ncovariance_resets " << d.covariance_resets << '\n';
}

// ------------------------------------------------------------------- study

void write_study(const StudyResult& study, const std::filesystem::path& file)
{
    auto out = csv::open_output(file);
    out << "strategy,replicate,culled,duration_days\n";
    for (const auto& r : study.replicates)
        out << strategy_name(r.strategy) << ',' << r.replicate << ',' << r.culled << ','
            << csv::format(r.duration) << '\n';
}

void write_study_summary(const std::vector<StrategySummary>& summary, const std::filesystem::path& file)
{
    auto out = csv::open_output(file);
    out << "strategy,mean_culled,culled_lo,culled_hi,mean_duration,duration_lo,duration_hi\n";
    for (const auto& s : summary)
        out << strategy_name(s.strategy) << ',' << csv::format(s.mean_culled) << ',' << csv::format(s.culled_lo)
            << ',' << csv::format(s.culled_hi) << ',' << csv::format(s.mean_duration) << ','
            << csv::format(s.duration_lo) << ',' << csv::format(s.duration_hi) << '\n';
}

void write_cull_log(const StudyResult& study, const Population& pop, const std::filesystem::path& file)
{
    auto out = csv::open_output(file);
    out << "strategy,replicate,day,id,surveillance\n";
    for (const auto& r : study.replicates)
        for (const auto& c : r.culls)
            out << strategy_name(r.strategy) << ',' << r.replicate << ',' << csv::format(c.day) << ','
                << label(pop, c.id) << ',' << (c.surveillance ? 1 : 0) << '\n';
}

} // namespace epitrace
