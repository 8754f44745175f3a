#ifndef EPITRACE_POPULATION_HPP
#define EPITRACE_POPULATION_HPP

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace epitrace {

using Id = std::size_t;

inline constexpr int kProductionTypes = 10;

/// Transmission channels of the four-mode model plus the background source.
enum class Channel : std::uint8_t { FM, SH, CP, Spatial, Background };

std::string_view channel_name(Channel c);
Channel parse_channel(std::string_view s);

struct Point
{
    double x = 0.0;
    double y = 0.0;
};

struct Individual
{
    std::int64_t label = 0; ///< id as given in the input file
    Point location;
    int production_type = 1; ///< 1..10
};

struct RateEdge
{
    Id src;
    Id dst;
    double rate; ///< contacts per day
};

/// Directed sparse rate graph with CSR indices in both directions.
/// Edge indices are stable and dense, so per-edge caches can be flat arrays.
class RateLayer
{
public:
    RateLayer() = default;
    /// Builds from raw edges; duplicates must already be merged.
    RateLayer(std::size_t n, std::vector<RateEdge> edges);

    std::size_t size() const { return edges_.size(); }
    const RateEdge& edge(std::size_t e) const { return edges_[e]; }
    std::span<const RateEdge> edges() const { return edges_; }

    /// Edge indices leaving i / entering j.
    std::span<const std::size_t> out_edges(Id i) const;
    std::span<const std::size_t> in_edges(Id j) const;

    /// Rate of i -> j, 0 if absent.
    double rate(Id i, Id j) const;

private:
    std::vector<RateEdge> edges_;
    std::vector<std::size_t> out_offsets_, out_index_;
    std::vector<std::size_t> in_offsets_, in_index_;
};

/// Symmetric 0/1 adjacency, stored as a neighbour list per node.
class AssociationLayer
{
public:
    AssociationLayer() = default;
    /// `pairs` lists each undirected edge once.
    AssociationLayer(std::size_t n, const std::vector<std::pair<Id, Id>>& pairs);

    std::span<const Id> neighbours(Id i) const;
    bool connected(Id i, Id j) const;
    std::size_t edge_count() const { return pairs_; }

private:
    std::vector<std::size_t> offsets_;
    std::vector<Id> index_; // sorted within each row
    std::size_t pairs_ = 0;
};

struct NetworkSet
{
    RateLayer feedmill;
    RateLayer slaughterhouse;
    AssociationLayer company;

    const RateLayer& frequency(Channel c) const;
};

class Population
{
public:
    Population() = default;
    Population(std::vector<Individual> individuals, NetworkSet networks);

    std::size_t size() const { return individuals_.size(); }
    const Individual& individual(Id i) const { return individuals_[i]; }
    std::span<const Individual> individuals() const { return individuals_; }
    const NetworkSet& networks() const { return networks_; }

    int production_type(Id i) const { return individuals_[i].production_type; }

    /// Dense id of an input label.
    Id index_of(std::int64_t label) const;
    bool has_label(std::int64_t label) const { return by_label_.count(label) != 0; }

    void check_id(Id i) const;

private:
    std::vector<Individual> individuals_;
    NetworkSet networks_;
    std::unordered_map<std::int64_t, Id> by_label_;
};

double euclidean_distance(const Population& pop, Id i, Id j);

struct PotentialInfector
{
    Id source;
    Channel channel;
    bool operator==(const PotentialInfector&) const = default;
};

/// All network sources with a nonzero edge into j, ordered by (source, channel).
std::vector<PotentialInfector> potential_infectors(const Population& pop, Id j);

/// Reads population.csv plus optional feedmill.csv, slaughterhouse.csv and
/// company.csv from a directory.
Population load_population(const std::filesystem::path& dir);

/// Single-file loaders, exposed so callers can compose their own layout.
std::vector<Individual> read_individuals(const std::filesystem::path& file);
/// Returns merged edges over dense ids; rates converted from per week to per day.
std::vector<RateEdge> read_frequency_edges(const std::filesystem::path& file,
                                           const std::unordered_map<std::int64_t, Id>& ids);
std::vector<std::pair<Id, Id>> read_association_edges(const std::filesystem::path& file,
                                                      const std::unordered_map<std::int64_t, Id>& ids);

void write_population(const Population& pop, const std::filesystem::path& dir);

struct SyntheticPopulationConfig
{
    std::size_t size = 500;
    double extent_km = 60.0;        ///< side of the square region
    std::size_t clusters = 12;
    double cluster_sd_km = 4.0;
    double clustered_fraction = 0.8;
    std::vector<double> type_weights = {0.6, 0.1, 0.05, 0.05, 0.04, 0.04, 0.04, 0.03, 0.03, 0.02};
    std::size_t feedmills = 6;
    double feedmill_rate_per_week = 1.0;  ///< median per-edge rate
    std::size_t feedmill_out_degree = 3;
    std::size_t slaughterhouses = 4;
    double slaughterhouse_rate_per_week = 0.25;
    std::size_t slaughterhouse_out_degree = 3;
    std::size_t company_size_max = 5;
    double company_fraction = 0.5; ///< share of farms belonging to some company
    std::uint64_t seed = 1;
};

/// Clustered spatial layout with feedmill/slaughterhouse-style frequency
/// networks (farms served by the same hub contact each other) and small
/// company cliques.
Population synthesize_population(const SyntheticPopulationConfig& config);

} // namespace epitrace

#endif // EPITRACE_POPULATION_HPP
