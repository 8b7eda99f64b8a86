#pragma once

#include <concepts>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

namespace ckm {

using ClusterId = std::uint32_t;
using PointId = std::uint32_t;
using Label = std::int64_t;

// Dense row-major n x d point set. Coordinates are held as doubles regardless
// of the on-disk precision.
class Dataset {
public:
    Dataset(std::size_t n, std::size_t d, std::vector<double> values,
            std::optional<std::vector<Label>> labels = std::nullopt);

    std::size_t n() const { return n_; }
    std::size_t d() const { return d_; }

    std::span<const double> point(std::size_t i) const {
        return {values_.data() + i * d_, d_};
    }
    const double* row(std::size_t i) const { return values_.data() + i * d_; }
    std::span<const double> values() const { return values_; }

    bool has_labels() const { return labels_.has_value(); }
    const std::optional<std::vector<Label>>& labels() const { return labels_; }
    void set_labels(std::vector<Label> labels);

private:
    std::size_t n_;
    std::size_t d_;
    std::vector<double> values_;
    std::optional<std::vector<Label>> labels_;
};

// Centers, per-point assignments z and the distance array D.
struct ClusterModel {
    std::size_t k = 0;
    std::size_t d = 0;
    std::vector<double> centers;         // k x d
    std::vector<ClusterId> assignments;  // n
    std::vector<double> distances;       // n, squared distance to assigned center

    std::span<const double> center(std::size_t j) const { return {centers.data() + j * d, d}; }
    std::span<double> center(std::size_t j) { return {centers.data() + j * d, d}; }

    // Throws std::invalid_argument if shapes or assignment ids do not fit `dataset`.
    void validate(const Dataset& dataset) const;
};

struct IterationStats {
    std::size_t iteration = 0;
    double wcssd = 0.0;
    std::uint64_t distance_computations = 0;
    std::size_t active_points = 0;
    std::size_t tree_count = 0;
    double elapsed = 0.0;  // cumulative seconds since the run started
    // Largest per-point candidate cluster count seen in this iteration's
    // assignment step. Not part of the exported history.
    std::size_t max_candidates = 0;
};

namespace detail {

inline double squared_distance(const double* a, const double* b, std::size_t d) {
    double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
    std::size_t t = 0;
    for (; t + 4 <= d; t += 4) {
        const double e0 = a[t] - b[t];
        const double e1 = a[t + 1] - b[t + 1];
        const double e2 = a[t + 2] - b[t + 2];
        const double e3 = a[t + 3] - b[t + 3];
        s0 += e0 * e0;
        s1 += e1 * e1;
        s2 += e2 * e2;
        s3 += e3 * e3;
    }
    for (; t < d; ++t) {
        const double e = a[t] - b[t];
        s0 += e * e;
    }
    return (s0 + s1) + (s2 + s3);
}

double nmi_dense(std::span<const std::uint32_t> a, std::size_t classes_a,
                 std::span<const std::uint32_t> b, std::size_t classes_b);

template <std::integral T>
std::vector<std::uint32_t> densify(std::span<const T> labels, std::size_t& classes) {
    std::unordered_map<T, std::uint32_t> ids;
    std::vector<std::uint32_t> out;
    out.reserve(labels.size());
    for (const T& v : labels) {
        auto [it, inserted] = ids.try_emplace(v, static_cast<std::uint32_t>(ids.size()));
        out.push_back(it->second);
    }
    classes = ids.size();
    return out;
}

}  // namespace detail

// Sum of squared coordinate differences. Throws on dimension mismatch.
double squared_euclidean(std::span<const double> a, std::span<const double> b);

// Within-cluster sum of squared distortions of `model` over `dataset`.
double wcssd(const Dataset& dataset, const ClusterModel& model);

struct CenterUpdate {
    std::vector<double> centers;      // k x d; rows of empty clusters are zero and meaningless
    std::vector<std::size_t> counts;  // members per cluster
    std::vector<ClusterId> empty;     // ascending
};

// Per-cluster means. Each mean is summed in ascending point order by a single
// worker, so the result is bit-identical for any thread count.
CenterUpdate update_centers(const Dataset& dataset, std::span<const ClusterId> assignments,
                            std::size_t k, std::size_t threads = 1);

// Normalized mutual information I(a,b)/sqrt(H(a)H(b)). When either partition
// has a single class the score is 1 if both do, else 0.
template <std::integral A, std::integral B>
double nmi(std::span<const A> labels_a, std::span<const B> labels_b) {
    std::size_t ka = 0, kb = 0;
    const auto a = detail::densify(labels_a, ka);
    const auto b = detail::densify(labels_b, kb);
    return detail::nmi_dense(a, ka, b, kb);
}

template <std::integral A, std::integral B>
double nmi(const std::vector<A>& labels_a, const std::vector<B>& labels_b) {
    return nmi(std::span<const A>(labels_a), std::span<const B>(labels_b));
}

// r(x) = 1 - d(x, c_new) / d(x, c_old) with non-squared Euclidean distances.
double distance_ratio(std::span<const double> x, std::span<const double> c_old,
                      std::span<const double> c_new);

}  // namespace ckm
