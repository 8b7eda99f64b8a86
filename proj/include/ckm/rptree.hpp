#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <vector>

#include "ckm/core.hpp"

namespace ckm {

using Rng = std::mt19937_64;

// Derives an independent stream seed from a base seed, e.g. one per tree.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

struct PrincipalDirection {
    std::vector<double> direction;  // unit norm
    bool degenerate = false;        // sample had zero variance; direction is random
    std::size_t iterations = 0;
};

inline constexpr std::size_t kMaxPowerIterations = 100;
inline constexpr double kDirectionAngleTolerance = 1e-6;

// Top eigenvector of the centered sample covariance by power iteration.
// `sample` is row-major with `dim` columns.
PrincipalDirection principal_direction(std::span<const double> sample, std::size_t dim, Rng& rng);

struct RPTreeNode {
    std::vector<double> direction;  // internal nodes only
    double threshold = 0.0;
    std::int32_t left = -1;
    std::int32_t right = -1;
    std::vector<PointId> bucket;    // leaves only, ascending

    bool is_leaf() const { return left < 0; }
};

// Balanced random bi-partition tree. Node 0 is the root. A point goes left
// when its projection onto the node direction is <= the threshold.
class RPTree {
public:
    RPTree() = default;
    RPTree(std::size_t dim, std::size_t point_count, std::size_t bucket_capacity,
           std::vector<RPTreeNode> nodes);

    std::size_t dim() const { return dim_; }
    std::size_t point_count() const { return point_count_; }
    std::size_t bucket_capacity() const { return bucket_capacity_; }
    const std::vector<RPTreeNode>& nodes() const { return nodes_; }
    std::vector<RPTreeNode>& mutable_nodes() { return nodes_; }

    // Leaf node ids in depth-first left-to-right order.
    std::vector<std::size_t> leaf_ids() const;
    std::size_t leaf_count() const;
    std::size_t depth() const;

    std::size_t route_leaf(std::span<const double> x) const;

private:
    std::size_t dim_ = 0;
    std::size_t point_count_ = 0;
    std::size_t bucket_capacity_ = 0;
    std::vector<RPTreeNode> nodes_;
};

struct TreeParams {
    std::size_t bucket_capacity = 10;
    std::size_t sample_size = 256;
};

// Recursive median splits along principal directions of random node samples
// until every leaf holds at most `bucket_capacity` points.
RPTree build_tree(const Dataset& dataset, const TreeParams& params, std::uint64_t seed);

// Same splitting rule, but always splits the currently largest leaf (oldest
// first on ties) until exactly `leaf_count` leaves exist.
RPTree build_tree_with_leaves(const Dataset& dataset, std::size_t leaf_count,
                              std::size_t sample_size, std::uint64_t seed);

std::span<const PointId> route_point(const RPTree& tree, std::span<const double> x);

// Per-point neighbor sets, the union of the leaf buckets containing the point
// over every tree added so far. Each set is sorted and always contains the
// point itself.
class NeighborhoodIndex {
public:
    NeighborhoodIndex() = default;
    explicit NeighborhoodIndex(std::size_t n);

    std::size_t size() const { return neighbors_.size(); }
    std::size_t tree_count() const { return tree_count_; }
    std::span<const PointId> neighbors(std::size_t i) const { return neighbors_[i]; }

    std::size_t max_size() const;
    double mean_size() const;

    // Raw access for deserialization and bulk updates.
    std::vector<std::vector<PointId>>& mutable_sets() { return neighbors_; }
    void set_tree_count(std::size_t m) { tree_count_ = m; }

private:
    std::vector<std::vector<PointId>> neighbors_;
    std::size_t tree_count_ = 0;
};

void add_tree_to_index(NeighborhoodIndex& index, const RPTree& tree, std::size_t threads = 1);

// Binary persistence, little-endian with a versioned header.
void write_tree(const RPTree& tree, const std::filesystem::path& path);
RPTree read_tree(const std::filesystem::path& path);
void write_index(const NeighborhoodIndex& index, const std::filesystem::path& path);
NeighborhoodIndex read_index(const std::filesystem::path& path);

}  // namespace ckm
