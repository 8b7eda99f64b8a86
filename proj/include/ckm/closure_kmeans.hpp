#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "ckm/core.hpp"
#include "ckm/rptree.hpp"

namespace ckm {

struct ClosureConfig {
    std::size_t k = 0;
    std::size_t bucket_capacity = 10;
    std::size_t max_trees = 10;
    // A new tree is added when the relative WCSSD reduction drops below this.
    double reduction_threshold = 0.01;
    std::size_t max_iterations = 100;
    double convergence_epsilon = 1e-4;
    std::uint64_t seed = 1;
    std::size_t pca_sample_size = 256;
    std::size_t threads = 1;

    void validate() const;
};

struct ClosureState {
    ClusterModel model;
    NeighborhoodIndex index;
    std::vector<RPTree> trees;
    std::vector<IterationStats> history;
};

// Seed streams: 0 for the initialization tree, l + 1 for neighborhood tree l.
inline std::uint64_t init_tree_seed(std::uint64_t seed) { return derive_seed(seed, 0); }
inline std::uint64_t neighborhood_tree_seed(std::uint64_t seed, std::size_t l) {
    return derive_seed(seed, l + 1);
}

// One cluster per leaf of a random partition tree with exactly k leaves;
// centers are the leaf means and D is filled in.
ClusterModel initial_model(const Dataset& dataset, std::size_t k, std::uint64_t seed,
                           std::size_t pca_sample_size = 256, std::size_t threads = 1);

// Initial model, the first neighborhood tree, and history row 0.
ClosureState initialize(const Dataset& dataset, const ClosureConfig& config);

// Builds the next neighborhood tree and unites it into the index.
void add_neighborhood_tree(ClosureState& state, const Dataset& dataset, const ClosureConfig& config);

struct AssignmentOutcome {
    std::uint64_t distance_computations = 0;
    std::size_t active_points = 0;
    std::size_t max_candidates = 0;
};

// For each point the candidates are the clusters of its neighbors (its own
// cluster included). D[i] must hold the distance to the current center on
// entry; a point moves only to a strictly closer candidate, scanning
// candidates in ascending id order.
AssignmentOutcome closure_assignment_step(ClosureState& state, const Dataset& dataset,
                                          std::size_t threads = 1);

struct UpdateOutcome {
    std::uint64_t distance_computations = 0;
    std::vector<ClusterId> repaired;
};

// Recomputes means, refreshes D against the new centers, then repairs any
// empty clusters. Shared by the closure and Lloyd drivers.
UpdateOutcome update_step(ClusterModel& model, const Dataset& dataset, std::size_t threads = 1);
inline UpdateOutcome update_step(ClosureState& state, const Dataset& dataset,
                                 std::size_t threads = 1) {
    return update_step(state.model, dataset, threads);
}

// Reseeds each empty cluster (ascending id) at the point with the largest
// D[i] among clusters that can spare a member; ties go to the lower point id.
void repair_empty_clusters(ClusterModel& model, const Dataset& dataset,
                           std::span<const ClusterId> empty);

// Relative reduction (previous - current) / previous; zero when previous is zero.
double reduction_rate(double previous, double current);

ClosureState run(const Dataset& dataset, const ClosureConfig& config);

std::vector<std::size_t> active_points(std::span<const ClusterId> prev,
                                       std::span<const ClusterId> next);

}  // namespace ckm
