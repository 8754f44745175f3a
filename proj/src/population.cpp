#include "epitrace/population.hpp"

#include "epitrace/csv.hpp"
#include "epitrace/errors.hpp"
#include "epitrace/rng.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

namespace epitrace {

std::string_view channel_name(Channel c)
{
    switch (c) {
    case Channel::FM: return "FM";
    case Channel::SH: return "SH";
    case Channel::CP: return "CP";
    case Channel::Spatial: return "SPATIAL";
    case Channel::Background: return "BACKGROUND";
    }
    return "?";
}

Channel parse_channel(std::string_view s)
{
    if (s == "FM") return Channel::FM;
    if (s == "SH") return Channel::SH;
    if (s == "CP") return Channel::CP;
    if (s == "SPATIAL") return Channel::Spatial;
    if (s == "BACKGROUND") return Channel::Background;
    throw DomainError("unknown channel '" + std::string(s) + "'");
}

// ---------------------------------------------------------------- RateLayer

RateLayer::RateLayer(std::size_t n, std::vector<RateEdge> edges) : edges_(std::move(edges))
{
    out_offsets_.assign(n + 1, 0);
    in_offsets_.assign(n + 1, 0);
    for (const auto& e : edges_) {
        ++out_offsets_[e.src + 1];
        ++in_offsets_[e.dst + 1];
    }
    std::partial_sum(out_offsets_.begin(), out_offsets_.end(), out_offsets_.begin());
    std::partial_sum(in_offsets_.begin(), in_offsets_.end(), in_offsets_.begin());
    out_index_.resize(edges_.size());
    in_index_.resize(edges_.size());
    auto out_fill = out_offsets_;
    auto in_fill = in_offsets_;
    for (std::size_t k = 0; k < edges_.size(); ++k) {
        out_index_[out_fill[edges_[k].src]++] = k;
        in_index_[in_fill[edges_[k].dst]++] = k;
    }
}

std::span<const std::size_t> RateLayer::out_edges(Id i) const
{
    if (out_offsets_.empty())
        return {};
    return {out_index_.data() + out_offsets_[i], out_offsets_[i + 1] - out_offsets_[i]};
}

std::span<const std::size_t> RateLayer::in_edges(Id j) const
{
    if (in_offsets_.empty())
        return {};
    return {in_index_.data() + in_offsets_[j], in_offsets_[j + 1] - in_offsets_[j]};
}

double RateLayer::rate(Id i, Id j) const
{
    for (auto e : out_edges(i))
        if (edges_[e].dst == j)
            return edges_[e].rate;
    return 0.0;
}

// --------------------------------------------------------- AssociationLayer

AssociationLayer::AssociationLayer(std::size_t n, const std::vector<std::pair<Id, Id>>& pairs)
    : pairs_(pairs.size())
{
    offsets_.assign(n + 1, 0);
    for (auto [a, b] : pairs) {
        ++offsets_[a + 1];
        ++offsets_[b + 1];
    }
    std::partial_sum(offsets_.begin(), offsets_.end(), offsets_.begin());
    index_.resize(2 * pairs.size());
    auto fill = offsets_;
    for (auto [a, b] : pairs) {
        index_[fill[a]++] = b;
        index_[fill[b]++] = a;
    }
    for (std::size_t i = 0; i < n; ++i)
        std::sort(index_.begin() + static_cast<std::ptrdiff_t>(offsets_[i]),
                  index_.begin() + static_cast<std::ptrdiff_t>(offsets_[i + 1]));
}

std::span<const Id> AssociationLayer::neighbours(Id i) const
{
    if (offsets_.empty())
        return {};
    return {index_.data() + offsets_[i], offsets_[i + 1] - offsets_[i]};
}

bool AssociationLayer::connected(Id i, Id j) const
{
    auto row = neighbours(i);
    return std::binary_search(row.begin(), row.end(), j);
}

const RateLayer& NetworkSet::frequency(Channel c) const
{
    if (c == Channel::FM)
        return feedmill;
    if (c == Channel::SH)
        return slaughterhouse;
    throw DomainError("channel " + std::string(channel_name(c)) + " is not a frequency network");
}

// --------------------------------------------------------------- Population

Population::Population(std::vector<Individual> individuals, NetworkSet networks)
    : individuals_(std::move(individuals)), networks_(std::move(networks))
{
    for (Id i = 0; i < individuals_.size(); ++i) {
        const auto& ind = individuals_[i];
        if (ind.production_type < 1 || ind.production_type > kProductionTypes)
            throw ValidationError("individual " + std::to_string(ind.label) +
                                  ": production_type out of range 1..10");
        if (!by_label_.emplace(ind.label, i).second)
            throw ValidationError("duplicate individual id " + std::to_string(ind.label));
    }
    const auto n = individuals_.size();
    auto check = [n](Id a, Id b) {
        if (a >= n || b >= n)
            throw ValidationError("network endpoint out of range");
        if (a == b)
            throw ValidationError("self-edge on " + std::to_string(a));
    };
    for (const auto& e : networks_.feedmill.edges())
        check(e.src, e.dst);
    for (const auto& e : networks_.slaughterhouse.edges())
        check(e.src, e.dst);
    for (Id i = 0; i < n; ++i)
        for (Id j : networks_.company.neighbours(i))
            check(i, j);
}

Id Population::index_of(std::int64_t label) const
{
    auto it = by_label_.find(label);
    if (it == by_label_.end())
        throw UnknownId("unknown individual id " + std::to_string(label));
    return it->second;
}

void Population::check_id(Id i) const
{
    if (i >= individuals_.size())
        throw UnknownId("individual index " + std::to_string(i) + " out of range");
}

double euclidean_distance(const Population& pop, Id i, Id j)
{
    pop.check_id(i);
    pop.check_id(j);
    const auto& a = pop.individual(i).location;
    const auto& b = pop.individual(j).location;
    return std::hypot(a.x - b.x, a.y - b.y);
}

std::vector<PotentialInfector> potential_infectors(const Population& pop, Id j)
{
    pop.check_id(j);
    const auto& net = pop.networks();
    std::vector<PotentialInfector> out;
    for (auto e : net.feedmill.in_edges(j))
        out.push_back({net.feedmill.edge(e).src, Channel::FM});
    for (auto e : net.slaughterhouse.in_edges(j))
        out.push_back({net.slaughterhouse.edge(e).src, Channel::SH});
    for (auto i : net.company.neighbours(j))
        out.push_back({i, Channel::CP});
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
        return a.source != b.source ? a.source < b.source : a.channel < b.channel;
    });
    return out;
}

// -------------------------------------------------------------------- I/O

std::vector<Individual> read_individuals(const std::filesystem::path& file)
{
    csv::Reader in(file);
    in.expect_header({"id", "x_km", "y_km", "production_type"});
    std::vector<Individual> out;
    std::set<std::int64_t> seen;
    while (in.next()) {
        in.require_columns(4);
        Individual ind;
        ind.label = in.as_int(0);
        ind.location = {in.as_double(1), in.as_double(2)};
        auto type = in.as_int(3);
        if (type < 1 || type > kProductionTypes)
            throw ValidationError(in.source(), in.row(), "production_type out of range 1..10");
        ind.production_type = static_cast<int>(type);
        if (!seen.insert(ind.label).second)
            throw ValidationError(in.source(), in.row(), "duplicate id " + std::to_string(ind.label));
        out.push_back(ind);
    }
    return out;
}

namespace {

Id lookup(const csv::Reader& in, const std::unordered_map<std::int64_t, Id>& ids, std::int64_t label)
{
    auto it = ids.find(label);
    if (it == ids.end())
        throw ValidationError(in.source(), in.row(), "dangling edge id " + std::to_string(label));
    return it->second;
}

} // namespace

std::vector<RateEdge> read_frequency_edges(const std::filesystem::path& file,
                                           const std::unordered_map<std::int64_t, Id>& ids)
{
    csv::Reader in(file);
    in.expect_header({"src", "dst", "contacts_per_week"});
    std::map<std::pair<Id, Id>, double> merged;
    while (in.next()) {
        in.require_columns(3);
        Id a = lookup(in, ids, in.as_int(0));
        Id b = lookup(in, ids, in.as_int(1));
        double per_week = in.as_double(2);
        if (a == b)
            throw ValidationError(in.source(), in.row(), "self-edge");
        if (!(per_week > 0.0) || !std::isfinite(per_week))
            throw ValidationError(in.source(), in.row(), "non-positive rate");
        merged[{a, b}] += per_week;
    }
    std::vector<RateEdge> out;
    out.reserve(merged.size());
    for (const auto& [key, per_week] : merged)
        out.push_back({key.first, key.second, per_week / 7.0});
    return out;
}

std::vector<std::pair<Id, Id>> read_association_edges(const std::filesystem::path& file,
                                                      const std::unordered_map<std::int64_t, Id>& ids)
{
    csv::Reader in(file);
    in.expect_header({"src", "dst"});
    std::set<std::pair<Id, Id>> seen;
    std::vector<std::pair<Id, Id>> out;
    while (in.next()) {
        in.require_columns(2);
        Id a = lookup(in, ids, in.as_int(0));
        Id b = lookup(in, ids, in.as_int(1));
        if (a == b)
            throw ValidationError(in.source(), in.row(), "self-edge");
        if (!seen.insert(std::minmax(a, b)).second)
            throw ValidationError(in.source(), in.row(), "duplicate association edge");
        out.emplace_back(a, b);
    }
    return out;
}

Population load_population(const std::filesystem::path& dir)
{
    auto individuals = read_individuals(dir / "population.csv");
    std::unordered_map<std::int64_t, Id> ids;
    for (Id i = 0; i < individuals.size(); ++i)
        ids.emplace(individuals[i].label, i);
    const auto n = individuals.size();

    NetworkSet net;
    auto fm = dir / "feedmill.csv";
    auto sh = dir / "slaughterhouse.csv";
    auto cp = dir / "company.csv";
    net.feedmill = RateLayer(n, std::filesystem::exists(fm) ? read_frequency_edges(fm, ids)
                                                            : std::vector<RateEdge>{});
    net.slaughterhouse = RateLayer(n, std::filesystem::exists(sh) ? read_frequency_edges(sh, ids)
                                                                  : std::vector<RateEdge>{});
    net.company = AssociationLayer(n, std::filesystem::exists(cp) ? read_association_edges(cp, ids)
                                                                  : std::vector<std::pair<Id, Id>>{});
    return Population(std::move(individuals), std::move(net));
}

void write_population(const Population& pop, const std::filesystem::path& dir)
{
    std::filesystem::create_directories(dir);
    {
        auto out = csv::open_output(dir / "population.csv");
        out << "id,x_km,y_km,production_type\n";
        for (const auto& ind : pop.individuals())
            out << ind.label << ',' << csv::format(ind.location.x) << ','
                << csv::format(ind.location.y) << ',' << ind.production_type << '\n';
    }
    auto write_rates = [&](const RateLayer& layer, const char* name) {
        auto out = csv::open_output(dir / name);
        out << "src,dst,contacts_per_week\n";
        for (const auto& e : layer.edges())
            out << pop.individual(e.src).label << ',' << pop.individual(e.dst).label << ','
                << csv::format(e.rate * 7.0) << '\n';
    };
    write_rates(pop.networks().feedmill, "feedmill.csv");
    write_rates(pop.networks().slaughterhouse, "slaughterhouse.csv");
    auto out = csv::open_output(dir / "company.csv");
    out << "src,dst\n";
    for (Id i = 0; i < pop.size(); ++i)
        for (Id j : pop.networks().company.neighbours(i))
            if (i < j)
                out << pop.individual(i).label << ',' << pop.individual(j).label << '\n';
}

// ---------------------------------------------------------------- Synthetic

namespace {

std::size_t weighted_pick(Rng& rng, const std::vector<double>& weights, double total)
{
    double u = rng.uniform() * total;
    for (std::size_t k = 0; k < weights.size(); ++k) {
        u -= weights[k];
        if (u <= 0.0)
            return k;
    }
    return weights.size() - 1;
}

// Farms sharing a hub exchange contacts; each farm gets `degree` outbound
// edges to other farms of its hub with log-normal rates around `median`.
std::vector<RateEdge> hub_network(Rng& rng, const std::vector<std::size_t>& hub_of, std::size_t hubs,
                                  std::size_t degree, double median_per_week)
{
    std::vector<std::vector<Id>> members(hubs);
    for (Id i = 0; i < hub_of.size(); ++i)
        members[hub_of[i]].push_back(i);
    std::map<std::pair<Id, Id>, double> edges;
    for (Id i = 0; i < hub_of.size(); ++i) {
        const auto& group = members[hub_of[i]];
        if (group.size() < 2)
            continue;
        const auto want = std::min(degree, group.size() - 1);
        std::set<Id> chosen;
        while (chosen.size() < want) {
            Id j = group[rng.index(group.size())];
            if (j != i)
                chosen.insert(j);
        }
        for (Id j : chosen)
            edges[{i, j}] = median_per_week * std::exp(0.5 * rng.normal()) / 7.0;
    }
    std::vector<RateEdge> out;
    for (const auto& [key, rate] : edges)
        out.push_back({key.first, key.second, rate});
    return out;
}

} // namespace

Population synthesize_population(const SyntheticPopulationConfig& c)
{
    if (c.size == 0 || c.type_weights.size() != kProductionTypes || c.extent_km <= 0.0)
        throw ConfigError("invalid synthetic population configuration");
    Rng rng(c.seed);
    const double type_total = std::accumulate(c.type_weights.begin(), c.type_weights.end(), 0.0);

    std::vector<Point> centres(std::max<std::size_t>(c.clusters, 1));
    for (auto& p : centres)
        p = {rng.uniform(0.0, c.extent_km), rng.uniform(0.0, c.extent_km)};

    std::vector<Individual> farms(c.size);
    for (Id i = 0; i < c.size; ++i) {
        auto& f = farms[i];
        f.label = static_cast<std::int64_t>(i);
        if (c.clusters > 0 && rng.uniform() < c.clustered_fraction) {
            const auto& centre = centres[rng.index(centres.size())];
            f.location = {centre.x + c.cluster_sd_km * rng.normal(),
                          centre.y + c.cluster_sd_km * rng.normal()};
        } else {
            f.location = {rng.uniform(0.0, c.extent_km), rng.uniform(0.0, c.extent_km)};
        }
        f.production_type = static_cast<int>(weighted_pick(rng, c.type_weights, type_total)) + 1;
    }

    // Feedmills serve their nearest farms; slaughterhouses are assigned at random.
    NetworkSet net;
    {
        std::vector<Point> mills(std::max<std::size_t>(c.feedmills, 1));
        for (auto& p : mills)
            p = {rng.uniform(0.0, c.extent_km), rng.uniform(0.0, c.extent_km)};
        std::vector<std::size_t> hub(c.size);
        for (Id i = 0; i < c.size; ++i) {
            double best = INFINITY;
            for (std::size_t m = 0; m < mills.size(); ++m) {
                double d = std::hypot(farms[i].location.x - mills[m].x, farms[i].location.y - mills[m].y);
                if (d < best) {
                    best = d;
                    hub[i] = m;
                }
            }
        }
        net.feedmill = RateLayer(c.size, hub_network(rng, hub, mills.size(), c.feedmill_out_degree,
                                                     c.feedmill_rate_per_week));
    }
    {
        const auto n_hubs = std::max<std::size_t>(c.slaughterhouses, 1);
        std::vector<std::size_t> hub(c.size);
        for (auto& h : hub)
            h = rng.index(n_hubs);
        net.slaughterhouse = RateLayer(c.size, hub_network(rng, hub, n_hubs, c.slaughterhouse_out_degree,
                                                           c.slaughterhouse_rate_per_week));
    }
    {
        std::vector<Id> order(c.size);
        std::iota(order.begin(), order.end(), Id{0});
        for (std::size_t k = order.size(); k > 1; --k)
            std::swap(order[k - 1], order[rng.index(k)]);
        const auto members = static_cast<std::size_t>(c.company_fraction * static_cast<double>(c.size));
        std::vector<std::pair<Id, Id>> pairs;
        std::size_t pos = 0;
        while (c.company_size_max >= 2 && pos + 1 < members) {
            std::size_t size = 2 + rng.index(c.company_size_max - 1);
            size = std::min(size, members - pos);
            for (std::size_t a = pos; a < pos + size; ++a)
                for (std::size_t b = a + 1; b < pos + size; ++b)
                    pairs.emplace_back(order[a], order[b]);
            pos += size;
        }
        net.company = AssociationLayer(c.size, pairs);
    }
    return Population(std::move(farms), std::move(net));
}

} // namespace epitrace
