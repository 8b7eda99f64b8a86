#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string_view>
#include <vector>

#include "ckm/closure_kmeans.hpp"
#include "ckm/core.hpp"

namespace ckm {

enum class Algorithm : std::uint32_t { closure = 0, lloyd = 1 };

std::string_view to_string(Algorithm algorithm);
Algorithm parse_algorithm(std::string_view name);

// Trained model as persisted on disk. Distances are not stored; to_model()
// recomputes them against a dataset.
struct SavedModel {
    std::uint64_t n = 0;
    std::uint64_t d = 0;
    std::uint64_t k = 0;
    Algorithm algorithm = Algorithm::closure;
    ClosureConfig config;
    std::vector<double> centers;
    std::vector<ClusterId> assignments;

    ClusterModel to_model(const Dataset& dataset) const;
};

SavedModel make_saved_model(const ClusterModel& model, Algorithm algorithm,
                            const ClosureConfig& config);

// Layout (little-endian): "CKMM", u32 version, u64 n, d, k, seed,
// u32 algorithm, u64 bucket_capacity, max_trees, f64 tau, f64 epsilon,
// u64 max_iterations, pca_sample_size, then k*d f64 centers and n u32
// assignments.
void write_model(const SavedModel& model, const std::filesystem::path& path);
SavedModel read_model(const std::filesystem::path& path);

// Columns: iteration,wcssd,distance_computations,active_points,tree_count,elapsed_seconds
void write_history_csv(std::span<const IterationStats> history, std::ostream& out);
void write_history_csv(std::span<const IterationStats> history, const std::filesystem::path& path);
std::vector<IterationStats> read_history_csv(const std::filesystem::path& path);

}  // namespace ckm
