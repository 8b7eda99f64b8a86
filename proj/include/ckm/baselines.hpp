#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "ckm/core.hpp"
#include "ckm/rptree.hpp"

namespace ckm {

struct LloydConfig {
    std::size_t max_iterations = 100;
    double epsilon = 1e-4;
    std::size_t threads = 1;
};

struct LloydResult {
    ClusterModel model;
    std::vector<IterationStats> history;
};

struct ExactAssignment {
    std::vector<ClusterId> assignments;
    std::vector<double> distances;
    std::uint64_t distance_computations = 0;
    std::size_t active_points = 0;
};

// Full scan over all k centers. A point keeps its cluster unless another
// center is strictly closer; among strictly closer ones the lowest id wins.
ExactAssignment exact_assignment(const Dataset& dataset, const ClusterModel& model,
                                 std::size_t threads = 1);

// Runs Lloyd iterations from a complete model (centers, assignments, D).
// Stops once the relative WCSSD reduction falls below epsilon; the first
// iteration never stops.
LloydResult lloyd_run(const Dataset& dataset, ClusterModel init, const LloydConfig& config);

// Same, starting from bare centers (k x d). The initial assignment is a full
// nearest-center scan with ties to the lower id.
LloydResult lloyd_run(const Dataset& dataset, std::span<const double> init_centers,
                      const LloydConfig& config);

// Lloyd from the same random-partition-tree initialization the closure
// algorithm uses for (k, seed). Row 0 accounts for the initialization.
LloydResult lloyd_run_from_tree_init(const Dataset& dataset, std::size_t k, std::uint64_t seed,
                                     std::size_t pca_sample_size, const LloydConfig& config);

struct Histogram {
    std::vector<double> edges;        // bins + 1 edges over [0, 1]
    std::vector<std::size_t> counts;  // bins

    std::size_t total() const;
    // Fraction of the mass in bins whose right edge is <= `upper`.
    double mass_below(double upper) const;
};

// Ratios r(x) of the active points, in ascending point order.
std::vector<double> distance_ratios(const Dataset& dataset, const ClusterModel& prev_model,
                                    std::span<const ClusterId> next_assignments);

// r(x) for every point whose assignment differs between prev_model and
// next_assignments, measured against prev_model's centers.
Histogram distance_ratio_histogram(const Dataset& dataset, const ClusterModel& prev_model,
                                   std::span<const ClusterId> next_assignments, std::size_t bins);

// Fraction of active points whose new cluster appears among the previous
// clusters of their neighbors. 1 when nothing moved.
double closure_recall(const Dataset& dataset, const ClusterModel& prev_model,
                      std::span<const ClusterId> lloyd_next_assignments,
                      const NeighborhoodIndex& index);

struct RecallPoint {
    std::size_t trees = 0;
    double mean_neighborhood_size = 0.0;
    std::size_t max_neighborhood_size = 0;
    double recall = 0.0;
};

struct DiagnoseConfig {
    std::size_t k = 0;
    std::size_t iteration = 2;  // 1-based exact assignment step to inspect
    std::size_t bucket_capacity = 10;
    std::size_t trees_from = 1;
    std::size_t trees_to = 5;
    std::size_t bins = 20;
    std::uint64_t seed = 1;
    std::size_t pca_sample_size = 256;
    std::size_t threads = 1;
};

struct Diagnosis {
    std::size_t active_points = 0;
    std::vector<double> ratios;
    Histogram histogram;
    std::vector<RecallPoint> recall;
};

// Runs exact Lloyd from the tree initialization up to the requested
// assignment step, then measures distance ratios of its active points and
// closure recall for neighborhoods built from 1..trees_to trees.
Diagnosis diagnose(const Dataset& dataset, const DiagnoseConfig& config);

// Columns: bin_left,bin_right,count
void write_histogram_csv(const Histogram& histogram, const std::filesystem::path& path);
// Columns: trees,mean_neighborhood_size,max_neighborhood_size,recall
void write_recall_csv(std::span<const RecallPoint> curve, const std::filesystem::path& path);

}  // namespace ckm
