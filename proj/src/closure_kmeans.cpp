#include "ckm/closure_kmeans.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <limits>
#include <mutex>
#include <numeric>
#include <stdexcept>
#include <string>

#include "ckm/parallel.hpp"

namespace ckm {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

double sum_distances(const ClusterModel& model) {
    double total = 0.0;
    for (double v : model.distances) total += v;
    return total;
}

}  // namespace

void ClosureConfig::validate() const {
    if (k < 1) throw std::invalid_argument("k must be at least 1");
    if (bucket_capacity < 2) throw std::invalid_argument("bucket capacity must be at least 2");
    if (max_trees < 1) throw std::invalid_argument("max trees must be at least 1");
    if (!(reduction_threshold >= 0.0)) throw std::invalid_argument("reduction threshold must be >= 0");
    if (!(convergence_epsilon >= 0.0)) throw std::invalid_argument("convergence epsilon must be >= 0");
    if (pca_sample_size < 1) throw std::invalid_argument("PCA sample size must be at least 1");
}

ClusterModel initial_model(const Dataset& dataset, std::size_t k, std::uint64_t seed,
                           std::size_t pca_sample_size, std::size_t threads) {
    if (k < 1 || k > dataset.n()) {
        throw std::invalid_argument("k = " + std::to_string(k) + " must be in [1, n = " +
                                    std::to_string(dataset.n()) + "]");
    }
    const RPTree tree = build_tree_with_leaves(dataset, k, pca_sample_size, seed);

    ClusterModel model;
    model.k = k;
    model.d = dataset.d();
    model.assignments.assign(dataset.n(), 0);
    const auto leaves = tree.leaf_ids();
    for (std::size_t j = 0; j < leaves.size(); ++j) {
        for (PointId i : tree.nodes()[leaves[j]].bucket) {
            model.assignments[i] = static_cast<ClusterId>(j);
        }
    }
    model.centers = update_centers(dataset, model.assignments, k, threads).centers;
    model.distances.resize(dataset.n());
    parallel_for(dataset.n(), threads, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            model.distances[i] = detail::squared_distance(
                dataset.row(i), model.centers.data() + model.assignments[i] * model.d, model.d);
        }
    });
    return model;
}

ClosureState initialize(const Dataset& dataset, const ClosureConfig& config) {
    config.validate();
    const auto start = Clock::now();

    ClosureState state;
    state.model = initial_model(dataset, config.k, init_tree_seed(config.seed),
                                config.pca_sample_size, config.threads);
    state.index = NeighborhoodIndex(dataset.n());
    add_neighborhood_tree(state, dataset, config);

    IterationStats row;
    row.iteration = 0;
    row.wcssd = sum_distances(state.model);
    row.distance_computations = dataset.n();
    row.tree_count = state.index.tree_count();
    row.elapsed = seconds_since(start);
    state.history.push_back(row);
    return state;
}

void add_neighborhood_tree(ClosureState& state, const Dataset& dataset, const ClosureConfig& config) {
    const TreeParams params{config.bucket_capacity, config.pca_sample_size};
    state.trees.push_back(
        build_tree(dataset, params, neighborhood_tree_seed(config.seed, state.trees.size())));
    add_tree_to_index(state.index, state.trees.back(), config.threads);
}

AssignmentOutcome closure_assignment_step(ClosureState& state, const Dataset& dataset,
                                          std::size_t threads) {
    ClusterModel& model = state.model;
    const std::size_t n = dataset.n();
    const std::size_t d = dataset.d();
    if (state.index.size() != n) throw std::invalid_argument("neighborhood index does not match dataset");

    const std::vector<ClusterId> prev = model.assignments;
    std::vector<ClusterId> next(n);
    std::vector<double> next_distance(n);

    std::atomic<std::uint64_t> computations{0};
    std::atomic<std::size_t> moved{0};
    std::size_t max_candidates = 0;
    std::mutex max_mutex;

    parallel_for(n, threads, [&](std::size_t begin, std::size_t end) {
        constexpr std::size_t kUnseen = std::numeric_limits<std::size_t>::max();
        std::vector<std::size_t> seen_by(model.k, kUnseen);
        std::vector<ClusterId> candidates;
        std::uint64_t local_computations = 0;
        std::size_t local_moved = 0;
        std::size_t local_max = 0;
        for (std::size_t i = begin; i < end; ++i) {
            candidates.clear();
            for (PointId y : state.index.neighbors(i)) {
                const ClusterId j = prev[y];
                if (seen_by[j] != i) {
                    seen_by[j] = i;
                    candidates.push_back(j);
                }
            }
            std::sort(candidates.begin(), candidates.end());
            local_max = std::max(local_max, candidates.size());

            const ClusterId current = prev[i];
            ClusterId best = current;
            double best_distance = model.distances[i];
            const double* x = dataset.row(i);
            for (ClusterId j : candidates) {
                if (j == current) continue;
                const double dist = detail::squared_distance(x, model.centers.data() + j * d, d);
                ++local_computations;
                if (dist < best_distance) {
                    best_distance = dist;
                    best = j;
                }
            }
            next[i] = best;
            next_distance[i] = best_distance;
            if (best != current) ++local_moved;
        }
        computations += local_computations;
        moved += local_moved;
        std::lock_guard lock(max_mutex);
        max_candidates = std::max(max_candidates, local_max);
    });

    model.assignments = std::move(next);
    model.distances = std::move(next_distance);
    return {computations.load(), moved.load(), max_candidates};
}

void repair_empty_clusters(ClusterModel& model, const Dataset& dataset,
                           std::span<const ClusterId> empty) {
    if (empty.empty()) return;
    if (empty.size() >= dataset.n()) {
        throw std::invalid_argument("more empty clusters than points can fill");
    }
    std::vector<std::size_t> counts(model.k, 0);
    for (ClusterId z : model.assignments) ++counts[z];

    for (ClusterId j : empty) {
        if (counts[j] != 0) throw std::invalid_argument("cluster " + std::to_string(j) + " is not empty");
        std::size_t farthest = dataset.n();
        double farthest_distance = -1.0;
        for (std::size_t i = 0; i < dataset.n(); ++i) {
            if (counts[model.assignments[i]] < 2) continue;
            if (model.distances[i] > farthest_distance) {
                farthest_distance = model.distances[i];
                farthest = i;
            }
        }
        if (farthest == dataset.n()) {
            throw std::invalid_argument("more empty clusters than points can fill");
        }
        --counts[model.assignments[farthest]];
        model.assignments[farthest] = j;
        counts[j] = 1;
        std::copy_n(dataset.row(farthest), model.d, model.center(j).begin());
        model.distances[farthest] = 0.0;
    }
}

UpdateOutcome update_step(ClusterModel& model, const Dataset& dataset, std::size_t threads) {
    const std::size_t d = model.d;
    CenterUpdate update = update_centers(dataset, model.assignments, model.k, threads);
    for (std::size_t j = 0; j < model.k; ++j) {
        if (update.counts[j] == 0) continue;
        std::copy_n(update.centers.begin() + j * d, d, model.centers.begin() + j * d);
    }

    parallel_for(dataset.n(), threads, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            model.distances[i] = detail::squared_distance(
                dataset.row(i), model.centers.data() + model.assignments[i] * d, d);
        }
    });

    UpdateOutcome out;
    out.distance_computations = dataset.n();
    repair_empty_clusters(model, dataset, update.empty);
    out.repaired = std::move(update.empty);
    return out;
}

double reduction_rate(double previous, double current) {
    if (previous <= 0.0) return 0.0;
    return (previous - current) / previous;
}

ClosureState run(const Dataset& dataset, const ClosureConfig& config) {
    const auto start = Clock::now();
    ClosureState state = initialize(dataset, config);

    double previous = state.history.back().wcssd;
    for (std::size_t t = 1; t <= config.max_iterations; ++t) {
        IterationStats row;
        row.iteration = t;
        row.tree_count = state.index.tree_count();

        const AssignmentOutcome assigned = closure_assignment_step(state, dataset, config.threads);
        const UpdateOutcome updated = update_step(state, dataset, config.threads);
        row.wcssd = sum_distances(state.model);
        row.distance_computations = assigned.distance_computations + updated.distance_computations;
        row.active_points = assigned.active_points;
        row.max_candidates = assigned.max_candidates;

        const double rate = t == 1 ? std::numeric_limits<double>::infinity()
                                   : reduction_rate(previous, row.wcssd);
        previous = row.wcssd;

        bool grew = false;
        if (rate < config.reduction_threshold && state.trees.size() < config.max_trees) {
            add_neighborhood_tree(state, dataset, config);
            grew = true;
        }
        row.elapsed = seconds_since(start);
        state.history.push_back(row);

        if (!grew && rate < config.convergence_epsilon) break;
    }
    return state;
}

std::vector<std::size_t> active_points(std::span<const ClusterId> prev,
                                       std::span<const ClusterId> next) {
    if (prev.size() != next.size()) {
        throw std::invalid_argument("assignment vectors differ in length: " +
                                    std::to_string(prev.size()) + " vs " +
                                    std::to_string(next.size()));
    }
    std::vector<std::size_t> moved;
    for (std::size_t i = 0; i < prev.size(); ++i) {
        if (prev[i] != next[i]) moved.push_back(i);
    }
    return moved;
}

}  // namespace ckm
