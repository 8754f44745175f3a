#include "cli.hpp"

#include "epitrace/csv.hpp"
#include "epitrace/errors.hpp"
#include "epitrace/io.hpp"
#include "epitrace/mcmc.hpp"
#include "epitrace/population.hpp"
#include "epitrace/simulator.hpp"
#include "epitrace/surveillance.hpp"

#define TOML_EXCEPTIONS 1
#include <tomlplusplus/toml.hpp>

#include <CLI11.hpp>
#include <json.hpp>
#include <openssl/evp.h>

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>

#ifndef EPITRACE_VERSION
#define EPITRACE_VERSION "0.0.0"
#endif

namespace epitrace::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

// ---------------------------------------------------------------- digests

namespace {

std::string hex_digest(const unsigned char* md, unsigned len)
{
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned k = 0; k < len; ++k) {
        out += hex[md[k] >> 4];
        out += hex[md[k] & 15];
    }
    return out;
}

std::string sha256_bytes(const char* data, std::size_t size)
{
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned len = 0;
    if (EVP_Digest(data, size, md, &len, EVP_sha256(), nullptr) != 1)
        throw Error("SHA-256 computation failed");
    return hex_digest(md, len);
}

} // namespace

std::string sha256_text(const std::string& text)
{
    return sha256_bytes(text.data(), text.size());
}

std::string sha256_file(const fs::path& file)
{
    std::ifstream in(file, std::ios::binary);
    if (!in)
        throw InputError("cannot open " + file.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return sha256_text(buf.str());
}

// ----------------------------------------------------------------- config

namespace {

class Section
{
public:
    Section(const toml::table* table, std::string name) : table_(table), name_(std::move(name)) {}

    template <class T>
    std::optional<T> get(std::string_view key) const
    {
        if (!table_)
            return std::nullopt;
        const auto node = (*table_)[key];
        if (!node)
            return std::nullopt;
        if constexpr (std::is_same_v<T, double>) {
            if (auto v = node.template value<double>())
                return *v;
        } else if constexpr (std::is_same_v<T, std::string>) {
            if (auto v = node.template value<std::string>())
                return *v;
        } else if constexpr (std::is_same_v<T, bool>) {
            if (auto v = node.template value_exact<bool>())
                return *v;
        } else {
            static_assert(std::is_integral_v<T>);
            if (auto v = node.template value_exact<std::int64_t>()) {
                if (std::is_unsigned_v<T> && *v < 0)
                    throw ConfigError("config key '" + name_ + "." + std::string(key) + "' must be non-negative");
                return static_cast<T>(*v);
            }
        }
        throw ConfigError("config key '" + name_ + "." + std::string(key) + "' has the wrong type");
    }

    Section sub(std::string_view key) const
    {
        const toml::table* t = table_ ? (*table_)[key].as_table() : nullptr;
        return {t, name_ + "." + std::string(key)};
    }

    const toml::table* table() const { return table_; }

private:
    const toml::table* table_;
    std::string name_;
};

template <class T>
T resolve(const std::optional<T>& flag, const Section& s, std::string_view key, T fallback)
{
    if (flag)
        return *flag;
    if (auto v = s.template get<T>(key))
        return *v;
    return fallback;
}

template <class T>
std::optional<T> resolve_opt(const std::optional<T>& flag, const Section& s, std::string_view key)
{
    if (flag)
        return flag;
    return s.template get<T>(key);
}

template <class T>
T require(const std::optional<T>& v, const std::string& what)
{
    if (!v)
        throw ConfigError("missing " + what);
    return *v;
}

/// Transmission parameters from a table with keys epsilon, p1, p2, beta1,
/// beta2, gamma, psi and eta (ten values, first fixed at 1).
TransmissionParams read_params(const Section& s, TransmissionParams p)
{
    p.epsilon = s.get<double>("epsilon").value_or(p.epsilon);
    p.p[0] = s.get<double>("p1").value_or(p.p[0]);
    p.p[1] = s.get<double>("p2").value_or(p.p[1]);
    p.beta[0] = s.get<double>("beta1").value_or(p.beta[0]);
    p.beta[1] = s.get<double>("beta2").value_or(p.beta[1]);
    p.gamma = s.get<double>("gamma").value_or(p.gamma);
    p.psi = s.get<double>("psi").value_or(p.psi);
    if (s.table()) {
        if (const auto* arr = (*s.table())["eta"].as_array()) {
            if (arr->size() != p.eta.size())
                throw ConfigError("eta must list " + std::to_string(p.eta.size()) + " values");
            for (std::size_t k = 0; k < p.eta.size(); ++k) {
                const auto v = (*arr)[k].value<double>();
                if (!v)
                    throw ConfigError("eta values must be numbers");
                p.eta[k] = *v;
            }
        }
    }
    try {
        p.validate();
    } catch (const DomainError& e) {
        throw ConfigError(std::string("invalid parameters: ") + e.what());
    }
    return p;
}

json params_json(const TransmissionParams& p)
{
    json j;
    const auto v = pack(p);
    for (std::size_t k = 0; k < kParamDim; ++k)
        j[std::string(kParamNames[k])] = v[k];
    return j;
}

// --------------------------------------------------------------- manifest

class Manifest
{
public:
    Manifest(std::string command, fs::path out) : command_(std::move(command)), out_(std::move(out))
    {
        start_ = std::chrono::steady_clock::now();
    }

    json settings;
    std::optional<std::uint64_t> seed;

    void input(const fs::path& file) { inputs_[file.string()] = sha256_file(file); }
    void population(const fs::path& dir)
    {
        for (const char* name : {"population.csv", "feedmill.csv", "slaughterhouse.csv", "company.csv"})
            if (fs::exists(dir / name))
                input(dir / name);
    }
    void output(const std::string& name) { outputs_[name] = sha256_file(out_ / name); }

    void write(const std::optional<fs::path>& config) const
    {
        json m;
        m["command"] = command_;
        m["tool_version"] = EPITRACE_VERSION;
        m["seed"] = seed ? json(*seed) : json(nullptr);
        m["settings"] = settings;
        m["config_digest"] = sha256_text(settings.dump());
        m["config_file"] = config ? json(config->string()) : json(nullptr);
        m["inputs"] = inputs_;
        m["outputs"] = outputs_;
        m["wall_clock_seconds"] =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
        auto out = csv::open_output(out_ / "manifest.json");
        out << m.dump(2) << '\n';
    }

private:
    std::string command_;
    fs::path out_;
    std::map<std::string, std::string> inputs_, outputs_;
    std::chrono::steady_clock::time_point start_;
};

fs::path prepare_out(const std::optional<std::string>& flag, const Section& s)
{
    const auto dir = resolve_opt(flag, s, "out");
    if (!dir)
        throw ConfigError("missing output directory (--out)");
    fs::create_directories(*dir);
    return *dir;
}

fs::path population_dir(const std::optional<std::string>& flag, const Section& cmd, const Section& root)
{
    if (flag)
        return *flag;
    if (auto v = cmd.get<std::string>("population"))
        return *v;
    if (auto v = root.sub("population").get<std::string>("dir"))
        return *v;
    throw ConfigError("missing population directory (--population)");
}

// ---------------------------------------------------------------- options

struct Common
{
    std::optional<std::string> config;
    std::optional<std::string> out;
    std::optional<std::uint64_t> seed;
};

struct SynthOptions
{
    std::optional<std::size_t> size;
    std::optional<double> extent;
};

struct SimulateOptions
{
    std::optional<std::string> population;
    std::optional<double> t_max, t_obs, ct_window, removal_delay, tracing_fraction;
    std::optional<std::int64_t> index_case;
};

struct InferOptions
{
    std::optional<std::string> population, events, ctd;
    std::optional<double> t_obs, ct_window;
    bool no_ct = false;
    std::optional<std::size_t> iterations, burn_in, thin, event_updates, check_interval;
    std::optional<unsigned> threads;
};

struct SummarizeOptions
{
    std::optional<std::string> posterior, compare;
};

struct SurveilOptions
{
    std::optional<std::string> population, strategies;
    std::optional<std::size_t> reps, z, mcmc_budget;
    std::optional<double> start_day, zone_radius, t_max;
    std::optional<unsigned> jobs, threads;
};

struct CurveOptions
{
    std::optional<double> r_min, r_max, step, delta;
};

// --------------------------------------------------------------- commands

int cmd_synth(const Common& c, const SynthOptions& o, const Section& root, std::ostream& out)
{
    const Section s = root.sub("synth");
    const fs::path dir = prepare_out(c.out, s);
    SyntheticPopulationConfig cfg;
    cfg.size = resolve(o.size, s, "size", cfg.size);
    cfg.extent_km = resolve(o.extent, s, "extent_km", cfg.extent_km);
    cfg.clusters = s.get<std::size_t>("clusters").value_or(cfg.clusters);
    cfg.cluster_sd_km = s.get<double>("cluster_sd_km").value_or(cfg.cluster_sd_km);
    cfg.clustered_fraction = s.get<double>("clustered_fraction").value_or(cfg.clustered_fraction);
    cfg.feedmills = s.get<std::size_t>("feedmills").value_or(cfg.feedmills);
    cfg.feedmill_rate_per_week = s.get<double>("feedmill_rate_per_week").value_or(cfg.feedmill_rate_per_week);
    cfg.feedmill_out_degree = s.get<std::size_t>("feedmill_out_degree").value_or(cfg.feedmill_out_degree);
    cfg.slaughterhouses = s.get<std::size_t>("slaughterhouses").value_or(cfg.slaughterhouses);
    cfg.slaughterhouse_rate_per_week =
        s.get<double>("slaughterhouse_rate_per_week").value_or(cfg.slaughterhouse_rate_per_week);
    cfg.slaughterhouse_out_degree =
        s.get<std::size_t>("slaughterhouse_out_degree").value_or(cfg.slaughterhouse_out_degree);
    cfg.company_size_max = s.get<std::size_t>("company_size_max").value_or(cfg.company_size_max);
    cfg.company_fraction = s.get<double>("company_fraction").value_or(cfg.company_fraction);
    cfg.seed = resolve(c.seed, s, "seed", cfg.seed);

    const Population pop = synthesize_population(cfg);
    write_population(pop, dir);

    Manifest m("synth-population", dir);
    m.seed = cfg.seed;
    m.settings = {{"size", cfg.size},
                  {"extent_km", cfg.extent_km},
                  {"clusters", cfg.clusters},
                  {"cluster_sd_km", cfg.cluster_sd_km},
                  {"clustered_fraction", cfg.clustered_fraction},
                  {"feedmills", cfg.feedmills},
                  {"feedmill_rate_per_week", cfg.feedmill_rate_per_week},
                  {"feedmill_out_degree", cfg.feedmill_out_degree},
                  {"slaughterhouses", cfg.slaughterhouses},
                  {"slaughterhouse_rate_per_week", cfg.slaughterhouse_rate_per_week},
                  {"slaughterhouse_out_degree", cfg.slaughterhouse_out_degree},
                  {"company_size_max", cfg.company_size_max},
                  {"company_fraction", cfg.company_fraction}};
    for (const char* name : {"population.csv", "feedmill.csv", "slaughterhouse.csv", "company.csv"})
        m.output(name);
    m.write(c.config);
    out << "wrote " << pop.size() << " holdings to " << dir.string() << '\n';
    return kOk;
}

SimConfig sim_config(const Section& s, const Population& pop, std::optional<double> t_max_flag,
                     std::optional<double> window_flag, std::optional<double> delay_flag,
                     std::optional<std::int64_t> index_flag)
{
    SimConfig cfg;
    cfg.true_params = read_params(s.sub("params"), TransmissionParams::reference());
    cfg.t_max = resolve(t_max_flag, s, "t_max", cfg.t_max);
    cfg.ct_window = resolve(window_flag, s, "ct_window", cfg.ct_window);
    cfg.removal.days = resolve(delay_flag, s, "removal_delay", cfg.removal.days);
    const auto kind = s.get<std::string>("removal_kind").value_or("fixed");
    if (kind == "fixed")
        cfg.removal.kind = RemovalDelay::Kind::Fixed;
    else if (kind == "exponential")
        cfg.removal.kind = RemovalDelay::Kind::Exponential;
    else
        throw ConfigError("removal_kind must be 'fixed' or 'exponential'");
    cfg.contacts_stop_at_notification =
        s.get<bool>("contacts_stop_at_notification").value_or(cfg.contacts_stop_at_notification);
    if (auto label = resolve_opt(index_flag, s, "index_case")) {
        if (!pop.has_label(*label))
            throw ConfigError("index case " + std::to_string(*label) + " is not in the population");
        cfg.index_case = pop.index_of(*label);
    }
    cfg.validate();
    return cfg;
}

json sim_json(const SimConfig& cfg, const Population& pop)
{
    return {{"params", params_json(cfg.true_params)},
            {"t_max", cfg.t_max},
            {"ct_window", cfg.ct_window},
            {"removal_delay", cfg.removal.days},
            {"removal_kind", cfg.removal.kind == RemovalDelay::Kind::Fixed ? "fixed" : "exponential"},
            {"contacts_stop_at_notification", cfg.contacts_stop_at_notification},
            {"index_case", cfg.index_case ? json(pop.individual(*cfg.index_case).label) : json(nullptr)}};
}

int cmd_simulate(const Common& c, const SimulateOptions& o, const Section& root, std::ostream& out)
{
    const Section s = root.sub("simulate");
    const fs::path pop_dir = population_dir(o.population, s, root);
    const fs::path dir = prepare_out(c.out, s);
    const Population pop = load_population(pop_dir);
    const SimConfig cfg = sim_config(s, pop, o.t_max, o.ct_window, o.removal_delay, o.index_case);
    const double t_obs = resolve(o.t_obs, s, "t_obs", cfg.t_max);
    const double phi = resolve(o.tracing_fraction, s, "tracing_fraction", 1.0);
    const std::uint64_t seed = resolve(c.seed, s, "seed", std::uint64_t{1});
    if (!(t_obs >= 0.0 && t_obs <= cfg.t_max))
        throw ConfigError("t_obs must lie in [0, t_max]");

    OutbreakSimulation sim(pop, cfg, Rng::stream(seed, 0));
    sim.advance_to(cfg.t_max);
    Rng trace_rng = Rng::stream(seed, 1);
    const ContactTraceSet cts = extract_ctd(sim, t_obs, cfg.ct_window, phi, trace_rng);
    const EpidemicRecord observed = observe(sim.truth(), t_obs);

    write_events(sim.truth(), pop, dir / "events_true.csv");
    write_events(observed, pop, dir / "events_observed.csv");
    write_contact_log(sim.contact_log(), pop, dir / "contacts.csv");
    write_attribution(sim.attribution(), pop, dir / "attribution.csv");
    write_ctd(cts, pop, dir / "ctd.csv");

    Manifest m("simulate", dir);
    m.seed = seed;
    m.settings = sim_json(cfg, pop);
    m.settings["t_obs"] = t_obs;
    m.settings["tracing_fraction"] = phi;
    m.population(pop_dir);
    for (const char* name : {"events_true.csv", "events_observed.csv", "contacts.csv", "attribution.csv", "ctd.csv"})
        m.output(name);
    m.write(c.config);

    std::size_t notified = 0;
    for (Id j = 0; j < observed.size(); ++j)
        notified += observed.notified(j) ? 1 : 0;
    out << "infected " << sim.truth().infected_count() << ", notified by t_obs " << notified << ", traced contacts "
        << cts.events().size() << '\n';
    return kOk;
}

int cmd_infer(const Common& c, const InferOptions& o, const Section& root, std::ostream& out)
{
    const Section s = root.sub("infer");
    const fs::path pop_dir = population_dir(o.population, s, root);
    const fs::path events = require(resolve_opt(o.events, s, "events"), "events file (--events)");
    const double t_obs = require(resolve_opt(o.t_obs, s, "t_obs"), "observation time (--t-obs)");
    const double window = resolve(o.ct_window, s, "ct_window", 21.0);
    const bool no_ct = o.no_ct || s.get<bool>("no_ct").value_or(false);
    const auto ctd = resolve_opt(o.ctd, s, "ctd");
    const std::uint64_t seed = resolve(c.seed, s, "seed", std::uint64_t{1});
    const fs::path dir = prepare_out(c.out, s);

    SamplerConfig cfg;
    cfg.iterations = resolve(o.iterations, s, "iterations", cfg.iterations);
    cfg.burn_in = resolve(o.burn_in, s, "burn_in", cfg.burn_in);
    cfg.thin = resolve(o.thin, s, "thin", cfg.thin);
    cfg.threads = resolve(o.threads, s, "threads", cfg.threads);
    cfg.check_interval = resolve(o.check_interval, s, "check_interval", cfg.check_interval);
    cfg.event_updates = resolve_opt(o.event_updates, s, "event_updates");
    if (s.sub("initial").table())
        cfg.initial = read_params(s.sub("initial"), TransmissionParams::reference());
    cfg.validate();

    const Population pop = load_population(pop_dir);
    const EpidemicRecord observed = read_events(events, pop, t_obs);
    Manifest m("infer", dir);
    m.population(pop_dir);
    m.input(events);
    ContactTraceSet cts(pop.size(), window);
    if (ctd && !no_ct) {
        cts = read_ctd(*ctd, pop, observed, window);
        m.input(*ctd);
    }

    Sampler sampler(pop, std::move(cts), observed, cfg, Rng::stream(seed, 0));
    const PosteriorSet post = sampler.run();
    write_posterior(post, dir / "posterior.csv");
    write_occults(post, pop, dir / "occults.csv");
    write_diagnostics(post, dir / "diagnostics.txt");

    m.seed = seed;
    m.settings = {{"t_obs", t_obs},
                  {"ct_window", window},
                  {"no_ct", no_ct},
                  {"iterations", cfg.iterations},
                  {"burn_in", cfg.burn_in},
                  {"thin", cfg.thin},
                  {"check_interval", cfg.check_interval},
                  {"event_updates", cfg.event_updates ? json(*cfg.event_updates) : json(nullptr)},
                  {"initial", cfg.initial ? params_json(*cfg.initial) : json(nullptr)}};
    for (const char* name : {"posterior.csv", "occults.csv", "diagnostics.txt"})
        m.output(name);
    m.write(c.config);
    out << "retained " << post.samples.size() << " samples\n";
    return kOk;
}

struct Moments
{
    double mean, variance, q025, q50, q975;
};

Moments moments(const std::vector<double>& v)
{
    if (v.empty())
        throw EmptyPosterior("posterior has no samples");
    double mean = 0.0;
    for (double x : v)
        mean += x;
    mean /= static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v)
        ss += (x - mean) * (x - mean);
    const double var = v.size() > 1 ? ss / static_cast<double>(v.size() - 1) : 0.0;
    return {mean, var, empirical_quantile(v, 0.025), empirical_quantile(v, 0.5), empirical_quantile(v, 0.975)};
}

std::vector<double> column(const std::vector<PosteriorRow>& rows, std::size_t k)
{
    std::vector<double> out;
    out.reserve(rows.size());
    for (const auto& r : rows)
        out.push_back(r.values[k]);
    return out;
}

int cmd_summarize(const Common& c, const SummarizeOptions& o, const Section& root, std::ostream& out)
{
    const Section s = root.sub("summarize");
    const fs::path posterior = require(resolve_opt(o.posterior, s, "posterior"), "posterior file (--posterior)");
    const auto compare = resolve_opt(o.compare, s, "compare");
    const fs::path dir = prepare_out(c.out, s);

    const auto rows = read_posterior(posterior);
    if (rows.empty())
        throw EmptyPosterior(posterior.string() + " has no samples");
    Manifest m("summarize", dir);
    m.input(posterior);

    {
        auto f = csv::open_output(dir / "marginals.csv");
        for (std::size_t k = 0; k < kParamDim; ++k)
            f << (k ? "," : "") << kParamNames[k];
        f << '\n';
        for (const auto& r : rows) {
            for (std::size_t k = 0; k < kParamDim; ++k)
                f << (k ? "," : "") << csv::format(r.values[k]);
            f << '\n';
        }
    }
    {
        auto f = csv::open_output(dir / "marginal_summary.csv");
        f << "parameter,mean,variance,q025,q50,q975\n";
        for (std::size_t k = 0; k < kParamDim; ++k) {
            const Moments mo = moments(column(rows, k));
            f << kParamNames[k] << ',' << csv::format(mo.mean) << ',' << csv::format(mo.variance) << ','
              << csv::format(mo.q025) << ',' << csv::format(mo.q50) << ',' << csv::format(mo.q975) << '\n';
        }
    }
    {
        std::map<std::size_t, std::size_t> hist;
        for (const auto& r : rows)
            ++hist[r.occult_count];
        auto f = csv::open_output(dir / "occult_histogram.csv");
        f << "m,count\n";
        for (const auto& [k, n] : hist)
            f << k << ',' << n << '\n';
    }
    std::vector<std::string> written{"marginals.csv", "marginal_summary.csv", "occult_histogram.csv"};
    if (compare) {
        const auto other = read_posterior(*compare);
        if (other.empty())
            throw EmptyPosterior(*compare + " has no samples");
        m.input(*compare);
        auto f = csv::open_output(dir / "comparison.csv");
        f << "parameter,var_primary,var_compare,ratio\n";
        for (std::size_t k = 0; k < kParamDim; ++k) {
            const double a = moments(column(rows, k)).variance;
            const double b = moments(column(other, k)).variance;
            f << kParamNames[k] << ',' << csv::format(a) << ',' << csv::format(b) << ','
              << csv::format(b > 0.0 ? a / b : kInf) << '\n';
        }
        written.emplace_back("comparison.csv");
    }
    m.settings = {{"compare", compare.has_value()}};
    for (const auto& name : written)
        m.output(name);
    m.write(c.config);
    out << "summarized " << rows.size() << " samples\n";
    return kOk;
}

std::vector<StrategyKind> parse_strategy_list(const std::string& text)
{
    std::vector<StrategyKind> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty())
            out.push_back(parse_strategy(item));
    if (out.empty())
        throw ConfigError("no strategies given");
    return out;
}

int cmd_surveil(const Common& c, const SurveilOptions& o, const Section& root, std::ostream& out)
{
    const Section s = root.sub("surveil");
    const fs::path pop_dir = population_dir(o.population, s, root);
    const fs::path dir = prepare_out(c.out, s);
    const Population pop = load_population(pop_dir);
    const std::uint64_t seed = resolve(c.seed, s, "seed", std::uint64_t{1});

    StudyConfig study;
    study.sim = sim_config(s, pop, o.t_max, std::nullopt, std::nullopt, std::nullopt);
    study.n_reps = resolve(o.reps, s, "reps", study.n_reps);
    study.jobs = resolve(o.jobs, s, "jobs", 1u);
    study.conditioning.day = s.get<double>("conditioning_day").value_or(study.conditioning.day);
    study.conditioning.min_infections =
        s.get<std::size_t>("min_infections").value_or(study.conditioning.min_infections);
    study.context.ct_window = study.sim.ct_window;
    study.context.sampler.threads = resolve(o.threads, s, "threads", 1u);
    StrategySpec base;
    base.z = resolve(o.z, s, "z", base.z);
    base.start_day = resolve(o.start_day, s, "start_day", base.start_day);
    base.zone_radius = resolve(o.zone_radius, s, "zone_radius", base.zone_radius);
    base.mcmc_budget = resolve(o.mcmc_budget, s, "mcmc_budget", base.mcmc_budget);
    const std::string names = resolve(o.strategies, s, "strategies", std::string("reactive,random,bayes,bayes-ct"));
    json kinds = json::array();
    for (StrategyKind k : parse_strategy_list(names)) {
        StrategySpec spec = base;
        spec.kind = k;
        spec.validate();
        study.strategies.push_back(spec);
        kinds.push_back(std::string(strategy_name(k)));
    }

    const StudyResult result = run_study(pop, study, seed);
    write_study(result, dir / "study.csv");
    write_study_summary(result.summary, dir / "summary.csv");
    write_cull_log(result, pop, dir / "culls.csv");

    Manifest m("surveil", dir);
    m.seed = seed;
    m.settings = {{"sim", sim_json(study.sim, pop)},
                  {"strategies", kinds},
                  {"reps", study.n_reps},
                  {"z", base.z},
                  {"start_day", base.start_day},
                  {"zone_radius", base.zone_radius},
                  {"mcmc_budget", base.mcmc_budget},
                  {"conditioning_day", study.conditioning.day},
                  {"min_infections", study.conditioning.min_infections}};
    m.population(pop_dir);
    for (const char* name : {"study.csv", "summary.csv", "culls.csv"})
        m.output(name);
    m.write(c.config);
    for (const auto& sm : result.summary)
        out << strategy_name(sm.strategy) << ": mean culled " << sm.mean_culled << ", mean duration "
            << sm.mean_duration << '\n';
    return kOk;
}

int cmd_variance_curve(const Common& c, const CurveOptions& o, const Section& root, std::ostream& out)
{
    const Section s = root.sub("variance_curve");
    const fs::path dir = prepare_out(c.out, s);
    const double r_min = resolve(o.r_min, s, "r_min", 1.0);
    const double r_max = resolve(o.r_max, s, "r_max", 100.0);
    const double step = resolve(o.step, s, "step", 1.0);
    const double delta = resolve(o.delta, s, "delta", 1.0);
    if (!(r_min > 0.0) || !(r_max >= r_min) || !(step > 0.0))
        throw ConfigError("need 0 < r_min <= r_max and step > 0");
    {
        auto f = csv::open_output(dir / "variance_curve.csv");
        f << "r,var_exp,var_geo\n";
        const auto n = static_cast<std::size_t>(std::floor((r_max - r_min) / step + 1e-9));
        for (std::size_t k = 0; k <= n; ++k) {
            const double r = r_min + static_cast<double>(k) * step;
            const auto v = estimator_variance(r, delta);
            f << csv::format(r) << ',' << csv::format(v.exponential) << ',' << csv::format(v.geometric) << '\n';
        }
    }
    Manifest m("variance-curve", dir);
    m.settings = {{"r_min", r_min}, {"r_max", r_max}, {"step", step}, {"delta", delta}};
    m.output("variance_curve.csv");
    m.write(c.config);
    out << "wrote " << (dir / "variance_curve.csv").string() << '\n';
    return kOk;
}

} // namespace

// -------------------------------------------------------------------- run

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Contact-tracing epidemic inference toolkit", "epitrace"};
    app.require_subcommand(1);
    app.set_version_flag("--version", EPITRACE_VERSION);

    Common common;
    auto add_common = [&](CLI::App* sub, bool seeded) {
        sub->add_option("--config", common.config, "TOML config file (default: $EPITRACE_CONFIG)");
        sub->add_option("--out", common.out, "Output directory");
        if (seeded)
            sub->add_option("--seed", common.seed, "Random seed");
    };

    SynthOptions synth;
    auto* synth_cmd = app.add_subcommand("synth-population", "Write a synthetic population");
    add_common(synth_cmd, true);
    synth_cmd->add_option("--size", synth.size, "Number of holdings");
    synth_cmd->add_option("--extent", synth.extent, "Side of the square region, km");

    SimulateOptions sim;
    auto* sim_cmd = app.add_subcommand("simulate", "Simulate an outbreak");
    add_common(sim_cmd, true);
    sim_cmd->add_option("--population", sim.population, "Population directory");
    sim_cmd->add_option("--t-max", sim.t_max, "Simulation horizon, days");
    sim_cmd->add_option("--t-obs", sim.t_obs, "Observation time for the observed record and CTD");
    sim_cmd->add_option("--ct-window", sim.ct_window, "Tracing window, days");
    sim_cmd->add_option("--removal-delay", sim.removal_delay, "Notification to removal delay, days");
    sim_cmd->add_option("--tracing-fraction", sim.tracing_fraction, "Share of notified cases traced");
    sim_cmd->add_option("--index-case", sim.index_case, "Index case id");

    InferOptions inf;
    auto* inf_cmd = app.add_subcommand("infer", "Run the MCMC sampler");
    add_common(inf_cmd, true);
    inf_cmd->add_option("--population", inf.population, "Population directory");
    inf_cmd->add_option("--events", inf.events, "Observed events CSV");
    inf_cmd->add_option("--ctd", inf.ctd, "Contact-trace CSV");
    inf_cmd->add_option("--t-obs", inf.t_obs, "Observation time");
    inf_cmd->add_option("--ct-window", inf.ct_window, "Tracing window, days");
    inf_cmd->add_flag("--no-ct", inf.no_ct, "Ignore contact-tracing data");
    inf_cmd->add_option("--iterations", inf.iterations, "Iterations");
    inf_cmd->add_option("--burn-in", inf.burn_in, "Burn-in iterations");
    inf_cmd->add_option("--thin", inf.thin, "Thinning interval");
    inf_cmd->add_option("--event-updates", inf.event_updates, "Event updates per iteration");
    inf_cmd->add_option("--check-interval", inf.check_interval, "Cache check period (0 disables)");
    inf_cmd->add_option("--threads", inf.threads, "Likelihood worker threads");

    SummarizeOptions sum;
    auto* sum_cmd = app.add_subcommand("summarize", "Summarize posterior samples");
    add_common(sum_cmd, false);
    sum_cmd->add_option("--posterior", sum.posterior, "Posterior CSV");
    sum_cmd->add_option("--compare", sum.compare, "Second posterior CSV for a variance comparison");

    SurveilOptions sur;
    auto* sur_cmd = app.add_subcommand("surveil", "Run the surveillance strategy study");
    add_common(sur_cmd, true);
    sur_cmd->add_option("--population", sur.population, "Population directory");
    sur_cmd->add_option("--strategies", sur.strategies, "Comma-separated: reactive,random,bayes,bayes-ct");
    sur_cmd->add_option("--reps", sur.reps, "Conditioned replicates");
    sur_cmd->add_option("--z", sur.z, "Visits per day");
    sur_cmd->add_option("--start-day", sur.start_day, "First surveillance day");
    sur_cmd->add_option("--zone-radius", sur.zone_radius, "Random-strategy zone radius, km");
    sur_cmd->add_option("--mcmc-budget", sur.mcmc_budget, "Iterations per daily analysis");
    sur_cmd->add_option("--t-max", sur.t_max, "Simulation horizon, days");
    sur_cmd->add_option("--jobs", sur.jobs, "Replicates run in parallel");
    sur_cmd->add_option("--threads", sur.threads, "Likelihood threads per analysis");

    CurveOptions curve;
    auto* curve_cmd = app.add_subcommand("variance-curve", "Estimator variance with and without tracing");
    add_common(curve_cmd, false);
    curve_cmd->add_option("--r-min", curve.r_min, "Smallest contact rate");
    curve_cmd->add_option("--r-max", curve.r_max, "Largest contact rate");
    curve_cmd->add_option("--step", curve.step, "Grid step");
    curve_cmd->add_option("--delta", curve.delta, "Bin width, days");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kUsageError;
    }

    try {
        if (!common.config)
            if (const char* env = std::getenv(kConfigEnv); env && *env)
                common.config = env;
        toml::table config;
        if (common.config) {
            if (!fs::exists(*common.config))
                throw InputError("cannot open " + *common.config);
            config = toml::parse_file(*common.config);
        }
        const Section root(&config, "");
        if (synth_cmd->parsed())
            return cmd_synth(common, synth, root, out);
        if (sim_cmd->parsed())
            return cmd_simulate(common, sim, root, out);
        if (inf_cmd->parsed())
            return cmd_infer(common, inf, root, out);
        if (sum_cmd->parsed())
            return cmd_summarize(common, sum, root, out);
        if (sur_cmd->parsed())
            return cmd_surveil(common, sur, root, out);
        if (curve_cmd->parsed())
            return cmd_variance_curve(common, curve, root, out);
        return kUsageError;
    } catch (const toml::parse_error& e) {
        err << "epitrace: config error: " << e.description() << " at " << e.source().begin << '\n';
        return kUsageError;
    } catch (const InputError& e) {
        err << "epitrace: " << e.what() << '\n';
        return kUsageError;
    } catch (const ParseError& e) {
        err << "epitrace: " << e.what() << '\n';
        return kUsageError;
    } catch (const ValidationError& e) {
        err << "epitrace: " << e.what() << '\n';
        return kUsageError;
    } catch (const ConfigError& e) {
        err << "epitrace: " << e.what() << '\n';
        return kUsageError;
    } catch (const UnknownId& e) {
        err << "epitrace: " << e.what() << '\n';
        return kUsageError;
    } catch (const std::exception& e) {
        err << "epitrace: " << e.what() << '\n';
        return kRuntimeError;
    }
}

} // namespace epitrace::cli
