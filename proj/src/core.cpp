#include "ckm/core.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>

#include "ckm/parallel.hpp"

namespace ckm {

Dataset::Dataset(std::size_t n, std::size_t d, std::vector<double> values,
                 std::optional<std::vector<Label>> labels)
    : n_(n), d_(d), values_(std::move(values)) {
    if (n_ == 0) throw std::invalid_argument("empty dataset");
    if (d_ == 0) throw std::invalid_argument("dataset dimension must be positive");
    if (values_.size() != n_ * d_) {
        throw std::invalid_argument("dataset has " + std::to_string(values_.size()) +
                                    " values, expected " + std::to_string(n_ * d_));
    }
    for (std::size_t i = 0; i < values_.size(); ++i) {
        if (!std::isfinite(values_[i])) {
            throw std::invalid_argument("non-finite coordinate in point " +
                                        std::to_string(i / d_));
        }
    }
    if (labels) set_labels(std::move(*labels));
}

void Dataset::set_labels(std::vector<Label> labels) {
    if (labels.size() != n_) {
        throw std::invalid_argument("label count " + std::to_string(labels.size()) +
                                    " does not match point count " + std::to_string(n_));
    }
    labels_ = std::move(labels);
}

void ClusterModel::validate(const Dataset& dataset) const {
    if (d != dataset.d()) {
        throw std::invalid_argument("model dimension " + std::to_string(d) +
                                    " does not match dataset dimension " +
                                    std::to_string(dataset.d()));
    }
    if (k == 0 || k > dataset.n()) throw std::invalid_argument("cluster count out of range");
    if (centers.size() != k * d) throw std::invalid_argument("center matrix has wrong shape");
    if (assignments.size() != dataset.n()) {
        throw std::invalid_argument("assignment count does not match point count");
    }
    for (std::size_t i = 0; i < assignments.size(); ++i) {
        if (assignments[i] >= k) {
            throw std::invalid_argument("invalid cluster index " +
                                        std::to_string(assignments[i]) + " for point " +
                                        std::to_string(i));
        }
    }
}

double squared_euclidean(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw std::invalid_argument("dimension mismatch: " + std::to_string(a.size()) + " vs " +
                                    std::to_string(b.size()));
    }
    return detail::squared_distance(a.data(), b.data(), a.size());
}

double wcssd(const Dataset& dataset, const ClusterModel& model) {
    model.validate(dataset);
    double total = 0.0;
    for (std::size_t i = 0; i < dataset.n(); ++i) {
        total += detail::squared_distance(dataset.row(i),
                                          model.centers.data() + model.assignments[i] * model.d,
                                          model.d);
    }
    return total;
}

CenterUpdate update_centers(const Dataset& dataset, std::span<const ClusterId> assignments,
                            std::size_t k, std::size_t threads) {
    const std::size_t n = dataset.n();
    const std::size_t d = dataset.d();
    if (assignments.size() != n) {
        throw std::invalid_argument("assignment count does not match point count");
    }

    CenterUpdate out;
    out.counts.assign(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
        if (assignments[i] >= k) {
            throw std::invalid_argument("invalid cluster index for point " + std::to_string(i));
        }
        ++out.counts[assignments[i]];
    }

    // Bucket point ids by cluster, preserving ascending order within each.
    std::vector<std::size_t> offsets(k + 1, 0);
    for (std::size_t j = 0; j < k; ++j) offsets[j + 1] = offsets[j] + out.counts[j];
    std::vector<PointId> members(n);
    {
        std::vector<std::size_t> cursor(offsets.begin(), offsets.end() - 1);
        for (std::size_t i = 0; i < n; ++i) members[cursor[assignments[i]]++] = static_cast<PointId>(i);
    }

    out.centers.assign(k * d, 0.0);
    parallel_for(k, threads, [&](std::size_t begin, std::size_t end) {
        for (std::size_t j = begin; j < end; ++j) {
            if (out.counts[j] == 0) continue;
            double* c = out.centers.data() + j * d;
            for (std::size_t m = offsets[j]; m < offsets[j + 1]; ++m) {
                const double* x = dataset.row(members[m]);
                for (std::size_t t = 0; t < d; ++t) c[t] += x[t];
            }
            const double inv = 1.0 / static_cast<double>(out.counts[j]);
            for (std::size_t t = 0; t < d; ++t) c[t] *= inv;
        }
    });

    for (std::size_t j = 0; j < k; ++j) {
        if (out.counts[j] == 0) out.empty.push_back(static_cast<ClusterId>(j));
    }
    return out;
}

namespace detail {

double nmi_dense(std::span<const std::uint32_t> a, std::size_t classes_a,
                 std::span<const std::uint32_t> b, std::size_t classes_b) {
    if (a.size() != b.size()) {
        throw std::invalid_argument("label vectors differ in length: " +
                                    std::to_string(a.size()) + " vs " + std::to_string(b.size()));
    }
    if (a.empty()) throw std::invalid_argument("nmi needs at least one sample");

    const double n = static_cast<double>(a.size());
    std::vector<double> count_a(classes_a, 0.0), count_b(classes_b, 0.0);
    std::map<std::pair<std::uint32_t, std::uint32_t>, double> joint;
    for (std::size_t i = 0; i < a.size(); ++i) {
        count_a[a[i]] += 1.0;
        count_b[b[i]] += 1.0;
        joint[{a[i], b[i]}] += 1.0;
    }

    auto entropy = [n](const std::vector<double>& counts) {
        double h = 0.0;
        for (double c : counts) {
            if (c > 0.0) h -= (c / n) * std::log(c / n);
        }
        return h;
    };
    const double ha = entropy(count_a);
    const double hb = entropy(count_b);
    if (ha == 0.0 || hb == 0.0) return (ha == 0.0 && hb == 0.0) ? 1.0 : 0.0;

    double mi = 0.0;
    for (const auto& [key, c] : joint) {
        mi += (c / n) * std::log((c * n) / (count_a[key.first] * count_b[key.second]));
    }
    return std::clamp(mi / std::sqrt(ha * hb), 0.0, 1.0);
}

}  // namespace detail

double distance_ratio(std::span<const double> x, std::span<const double> c_old,
                      std::span<const double> c_new) {
    const double old_distance = std::sqrt(squared_euclidean(x, c_old));
    const double new_distance = std::sqrt(squared_euclidean(x, c_new));
    if (old_distance == 0.0) {
        throw std::invalid_argument("point coincides with its old center and cannot be active");
    }
    return 1.0 - new_distance / old_distance;
}

}  // namespace ckm
