#include "ckm/baselines.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <string>

#include "ckm/closure_kmeans.hpp"
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

ExactAssignment exact_assignment(const Dataset& dataset, const ClusterModel& model,
                                 std::size_t threads) {
    const std::size_t n = dataset.n();
    const std::size_t d = model.d;
    const std::size_t k = model.k;
    if (model.distances.size() != n || model.assignments.size() != n) {
        throw std::invalid_argument("model does not cover the dataset");
    }

    ExactAssignment out;
    out.assignments.resize(n);
    out.distances.resize(n);
    std::atomic<std::size_t> moved{0};
    parallel_for(n, threads, [&](std::size_t begin, std::size_t end) {
        std::size_t local_moved = 0;
        for (std::size_t i = begin; i < end; ++i) {
            const double* x = dataset.row(i);
            const ClusterId current = model.assignments[i];
            ClusterId best = current;
            double best_distance = model.distances[i];
            for (std::size_t j = 0; j < k; ++j) {
                if (j == current) continue;
                const double dist = detail::squared_distance(x, model.centers.data() + j * d, d);
                if (dist < best_distance) {
                    best_distance = dist;
                    best = static_cast<ClusterId>(j);
                }
            }
            out.assignments[i] = best;
            out.distances[i] = best_distance;
            if (best != current) ++local_moved;
        }
        moved += local_moved;
    });
    out.distance_computations = static_cast<std::uint64_t>(n) * (k - 1);
    out.active_points = moved.load();
    return out;
}

LloydResult lloyd_run(const Dataset& dataset, ClusterModel init, const LloydConfig& config) {
    const auto start = Clock::now();
    init.validate(dataset);
    if (init.distances.size() != dataset.n()) {
        throw std::invalid_argument("initial model is missing its distance array");
    }

    LloydResult result;
    result.model = std::move(init);
    IterationStats first;
    first.wcssd = sum_distances(result.model);
    first.elapsed = seconds_since(start);
    result.history.push_back(first);

    double previous = first.wcssd;
    for (std::size_t t = 1; t <= config.max_iterations; ++t) {
        ExactAssignment step = exact_assignment(dataset, result.model, config.threads);
        result.model.assignments = std::move(step.assignments);
        result.model.distances = std::move(step.distances);
        const UpdateOutcome updated = update_step(result.model, dataset, config.threads);

        IterationStats row;
        row.iteration = t;
        row.wcssd = sum_distances(result.model);
        row.distance_computations = step.distance_computations + updated.distance_computations;
        row.active_points = step.active_points;
        row.max_candidates = result.model.k;
        row.elapsed = seconds_since(start);
        result.history.push_back(row);

        const double rate = t == 1 ? std::numeric_limits<double>::infinity()
                                   : reduction_rate(previous, row.wcssd);
        previous = row.wcssd;
        if (rate < config.epsilon) break;
    }
    return result;
}

LloydResult lloyd_run(const Dataset& dataset, std::span<const double> init_centers,
                      const LloydConfig& config) {
    const auto start = Clock::now();
    const std::size_t d = dataset.d();
    if (init_centers.empty() || init_centers.size() % d != 0) {
        throw std::invalid_argument("initial centers must be a k x d matrix");
    }
    ClusterModel model;
    model.d = d;
    model.k = init_centers.size() / d;
    if (model.k > dataset.n()) throw std::invalid_argument("k exceeds the number of points");
    model.centers.assign(init_centers.begin(), init_centers.end());
    model.assignments.resize(dataset.n());
    model.distances.resize(dataset.n());
    parallel_for(dataset.n(), config.threads, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            ClusterId best = 0;
            double best_distance = std::numeric_limits<double>::infinity();
            for (std::size_t j = 0; j < model.k; ++j) {
                const double dist =
                    detail::squared_distance(dataset.row(i), model.centers.data() + j * d, d);
                if (dist < best_distance) {
                    best_distance = dist;
                    best = static_cast<ClusterId>(j);
                }
            }
            model.assignments[i] = best;
            model.distances[i] = best_distance;
        }
    });

    const double setup = seconds_since(start);
    LloydResult result = lloyd_run(dataset, std::move(model), config);
    result.history.front().distance_computations =
        static_cast<std::uint64_t>(dataset.n()) * result.model.k;
    for (auto& row : result.history) row.elapsed += setup;
    return result;
}

LloydResult lloyd_run_from_tree_init(const Dataset& dataset, std::size_t k, std::uint64_t seed,
                                     std::size_t pca_sample_size, const LloydConfig& config) {
    const auto start = Clock::now();
    ClusterModel init = initial_model(dataset, k, init_tree_seed(seed), pca_sample_size, config.threads);
    const double setup = seconds_since(start);
    LloydResult result = lloyd_run(dataset, std::move(init), config);
    result.history.front().distance_computations = dataset.n();
    for (auto& row : result.history) row.elapsed += setup;
    return result;
}

std::size_t Histogram::total() const {
    std::size_t sum = 0;
    for (std::size_t c : counts) sum += c;
    return sum;
}

double Histogram::mass_below(double upper) const {
    const std::size_t all = total();
    if (all == 0) return 0.0;
    std::size_t below = 0;
    for (std::size_t b = 0; b < counts.size(); ++b) {
        if (edges[b + 1] <= upper + 1e-12) below += counts[b];
    }
    return static_cast<double>(below) / static_cast<double>(all);
}

std::vector<double> distance_ratios(const Dataset& dataset, const ClusterModel& prev_model,
                                    std::span<const ClusterId> next_assignments) {
    prev_model.validate(dataset);
    if (next_assignments.size() != dataset.n()) {
        throw std::invalid_argument("next assignments do not cover the dataset");
    }
    std::vector<double> ratios;
    for (std::size_t i : active_points(prev_model.assignments, next_assignments)) {
        if (next_assignments[i] >= prev_model.k) {
            throw std::invalid_argument("invalid cluster index for point " + std::to_string(i));
        }
        ratios.push_back(distance_ratio(dataset.point(i),
                                        prev_model.center(prev_model.assignments[i]),
                                        prev_model.center(next_assignments[i])));
    }
    return ratios;
}

Histogram distance_ratio_histogram(const Dataset& dataset, const ClusterModel& prev_model,
                                   std::span<const ClusterId> next_assignments, std::size_t bins) {
    if (bins == 0) throw std::invalid_argument("histogram needs at least one bin");
    Histogram h;
    h.counts.assign(bins, 0);
    h.edges.resize(bins + 1);
    for (std::size_t b = 0; b <= bins; ++b) {
        h.edges[b] = static_cast<double>(b) / static_cast<double>(bins);
    }
    for (double r : distance_ratios(dataset, prev_model, next_assignments)) {
        const double scaled = std::floor(std::clamp(r, 0.0, 1.0) * static_cast<double>(bins));
        const auto bin = std::min(bins - 1, static_cast<std::size_t>(scaled));
        ++h.counts[bin];
    }
    return h;
}

double closure_recall(const Dataset& dataset, const ClusterModel& prev_model,
                      std::span<const ClusterId> lloyd_next_assignments,
                      const NeighborhoodIndex& index) {
    prev_model.validate(dataset);
    if (index.size() != dataset.n()) throw std::invalid_argument("index does not match dataset");
    const auto moved = active_points(prev_model.assignments, lloyd_next_assignments);
    if (moved.empty()) return 1.0;
    std::size_t covered = 0;
    for (std::size_t i : moved) {
        const ClusterId target = lloyd_next_assignments[i];
        for (PointId y : index.neighbors(i)) {
            if (prev_model.assignments[y] == target) {
                ++covered;
                break;
            }
        }
    }
    return static_cast<double>(covered) / static_cast<double>(moved.size());
}

Diagnosis diagnose(const Dataset& dataset, const DiagnoseConfig& config) {
    if (config.iteration < 1) throw std::invalid_argument("iteration must be at least 1");
    if (config.trees_from < 1 || config.trees_from > config.trees_to) {
        throw std::invalid_argument("tree range must satisfy 1 <= from <= to");
    }
    if (config.bucket_capacity < 2) throw std::invalid_argument("bucket capacity must be at least 2");

    LloydConfig lloyd;
    lloyd.max_iterations = config.iteration - 1;
    lloyd.epsilon = -std::numeric_limits<double>::infinity();
    lloyd.threads = config.threads;
    const ClusterModel prev =
        lloyd_run_from_tree_init(dataset, config.k, config.seed, config.pca_sample_size, lloyd).model;
    const ExactAssignment next = exact_assignment(dataset, prev, config.threads);

    Diagnosis out;
    out.active_points = next.active_points;
    out.ratios = distance_ratios(dataset, prev, next.assignments);
    out.histogram = distance_ratio_histogram(dataset, prev, next.assignments, config.bins);

    NeighborhoodIndex index(dataset.n());
    const TreeParams params{config.bucket_capacity, config.pca_sample_size};
    for (std::size_t m = 1; m <= config.trees_to; ++m) {
        add_tree_to_index(index, build_tree(dataset, params, neighborhood_tree_seed(config.seed, m - 1)),
                          config.threads);
        if (m < config.trees_from) continue;
        RecallPoint p;
        p.trees = m;
        p.mean_neighborhood_size = index.mean_size();
        p.max_neighborhood_size = index.max_size();
        p.recall = closure_recall(dataset, prev, next.assignments, index);
        out.recall.push_back(p);
    }
    return out;
}

void write_histogram_csv(const Histogram& histogram, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out << "bin_left,bin_right,count\n";
    char buffer[96];
    for (std::size_t b = 0; b < histogram.counts.size(); ++b) {
        std::snprintf(buffer, sizeof buffer, "%.17g,%.17g,%zu\n", histogram.edges[b],
                      histogram.edges[b + 1], histogram.counts[b]);
        out << buffer;
    }
    if (!out) throw std::runtime_error("write to " + path.string() + " failed");
}

void write_recall_csv(std::span<const RecallPoint> curve, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out << "trees,mean_neighborhood_size,max_neighborhood_size,recall\n";
    char buffer[128];
    for (const RecallPoint& p : curve) {
        std::snprintf(buffer, sizeof buffer, "%zu,%.17g,%zu,%.17g\n", p.trees,
                      p.mean_neighborhood_size, p.max_neighborhood_size, p.recall);
        out << buffer;
    }
    if (!out) throw std::runtime_error("write to " + path.string() + " failed");
}

}  // namespace ckm
