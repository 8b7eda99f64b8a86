#include "ckm/rptree.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>
#include <stdexcept>
#include <string>
#include <tuple>
#include <utility>

#include "ckm/parallel.hpp"

namespace ckm {

namespace {

double project(std::span<const double> direction, const double* x) {
    double s = 0.0;
    for (std::size_t t = 0; t < direction.size(); ++t) s += direction[t] * x[t];
    return s;
}

std::vector<double> random_unit_vector(std::size_t dim, Rng& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> v(dim);
    double norm = 0.0;
    while (norm == 0.0) {
        for (double& e : v) e = normal(rng);
        norm = std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
    }
    for (double& e : v) e /= norm;
    return v;
}

struct Split {
    std::vector<double> direction;
    double threshold = 0.0;
    std::vector<PointId> left;
    std::vector<PointId> right;
};

Split split_points(const Dataset& dataset, std::span<const PointId> ids, std::size_t sample_size,
                   Rng& rng) {
    const std::size_t d = dataset.d();
    const std::size_t size = ids.size();

    std::vector<PointId> chosen(ids.begin(), ids.end());
    const std::size_t s = std::min(std::max<std::size_t>(sample_size, 1), size);
    if (s < size) {
        for (std::size_t t = 0; t < s; ++t) {
            std::uniform_int_distribution<std::size_t> pick(t, size - 1);
            std::swap(chosen[t], chosen[pick(rng)]);
        }
    }
    std::vector<double> sample(s * d);
    for (std::size_t t = 0; t < s; ++t) {
        std::copy_n(dataset.row(chosen[t]), d, sample.begin() + t * d);
    }

    Split out;
    out.direction = principal_direction(sample, d, rng).direction;

    std::vector<std::pair<double, PointId>> keyed(size);
    for (std::size_t t = 0; t < size; ++t) {
        keyed[t] = {project(out.direction, dataset.row(ids[t])), ids[t]};
    }
    std::sort(keyed.begin(), keyed.end());

    const std::size_t left_size = (size + 1) / 2;
    const double lo = keyed[left_size - 1].first;
    const double hi = keyed[left_size].first;
    out.threshold = lo;
    if (lo < hi) {
        const double mid = lo + (hi - lo) * 0.5;
        if (mid < hi) out.threshold = mid;
    }
    out.left.reserve(left_size);
    out.right.reserve(size - left_size);
    for (std::size_t t = 0; t < size; ++t) {
        (t < left_size ? out.left : out.right).push_back(keyed[t].second);
    }
    return out;
}

std::vector<PointId> all_points(std::size_t n) {
    std::vector<PointId> ids(n);
    std::iota(ids.begin(), ids.end(), PointId{0});
    return ids;
}

void make_internal(std::vector<RPTreeNode>& nodes, std::size_t node, Split&& split) {
    const auto left = static_cast<std::int32_t>(nodes.size());
    nodes.emplace_back();
    nodes.emplace_back();
    nodes[left].bucket = std::move(split.left);
    nodes[left + 1].bucket = std::move(split.right);
    RPTreeNode& parent = nodes[node];
    parent.direction = std::move(split.direction);
    parent.threshold = split.threshold;
    parent.left = left;
    parent.right = left + 1;
    parent.bucket.clear();
    parent.bucket.shrink_to_fit();
}

void sort_buckets(std::vector<RPTreeNode>& nodes) {
    for (auto& node : nodes) {
        if (node.is_leaf()) std::sort(node.bucket.begin(), node.bucket.end());
    }
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    // splitmix64 finalizer over the combined value
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

PrincipalDirection principal_direction(std::span<const double> sample, std::size_t dim, Rng& rng) {
    if (dim == 0 || sample.empty() || sample.size() % dim != 0) {
        throw std::invalid_argument("sample must be a non-empty matrix with dim columns");
    }
    const std::size_t s = sample.size() / dim;

    std::vector<double> mean(dim, 0.0);
    for (std::size_t r = 0; r < s; ++r) {
        for (std::size_t t = 0; t < dim; ++t) mean[t] += sample[r * dim + t];
    }
    for (double& m : mean) m /= static_cast<double>(s);

    std::vector<double> centered(sample.size());
    double scatter = 0.0;
    double magnitude = 0.0;
    for (std::size_t r = 0; r < s; ++r) {
        for (std::size_t t = 0; t < dim; ++t) {
            const double v = sample[r * dim + t];
            const double c = v - mean[t];
            centered[r * dim + t] = c;
            scatter += c * c;
            magnitude += v * v;
        }
    }

    PrincipalDirection out;
    if (scatter <= 1e-24 * magnitude || scatter == 0.0) {
        out.direction = random_unit_vector(dim, rng);
        out.degenerate = true;
        return out;
    }

    // Explicit d x d covariance pays off once the sample outnumbers the dimension.
    std::vector<double> cov;
    const bool explicit_cov = s > dim;
    if (explicit_cov) {
        cov.assign(dim * dim, 0.0);
        for (std::size_t r = 0; r < s; ++r) {
            const double* x = centered.data() + r * dim;
            for (std::size_t a = 0; a < dim; ++a) {
                const double xa = x[a];
                double* row = cov.data() + a * dim;
                for (std::size_t b = a; b < dim; ++b) row[b] += xa * x[b];
            }
        }
        for (std::size_t a = 0; a < dim; ++a) {
            for (std::size_t b = 0; b < a; ++b) cov[a * dim + b] = cov[b * dim + a];
        }
    }

    std::vector<double> v = random_unit_vector(dim, rng);
    std::vector<double> next(dim);
    std::vector<double> scores(explicit_cov ? 0 : s);
    for (std::size_t it = 1; it <= kMaxPowerIterations; ++it) {
        if (explicit_cov) {
            for (std::size_t a = 0; a < dim; ++a) {
                next[a] = project(v, cov.data() + a * dim);
            }
        } else {
            for (std::size_t r = 0; r < s; ++r) scores[r] = project(v, centered.data() + r * dim);
            std::fill(next.begin(), next.end(), 0.0);
            for (std::size_t r = 0; r < s; ++r) {
                const double* x = centered.data() + r * dim;
                for (std::size_t t = 0; t < dim; ++t) next[t] += scores[r] * x[t];
            }
        }
        const double norm = std::sqrt(std::inner_product(next.begin(), next.end(), next.begin(), 0.0));
        if (norm == 0.0) {
            // Start vector fell into the null space; try again from a fresh one.
            v = random_unit_vector(dim, rng);
            continue;
        }
        double gap = 0.0;
        for (std::size_t t = 0; t < dim; ++t) {
            next[t] /= norm;
            const double e = next[t] - v[t];
            gap += e * e;
        }
        v.swap(next);
        out.iterations = it;
        const double angle = 2.0 * std::asin(std::min(1.0, std::sqrt(gap) * 0.5));
        if (angle < kDirectionAngleTolerance) break;
    }
    out.direction = std::move(v);
    return out;
}

RPTree::RPTree(std::size_t dim, std::size_t point_count, std::size_t bucket_capacity,
               std::vector<RPTreeNode> nodes)
    : dim_(dim), point_count_(point_count), bucket_capacity_(bucket_capacity),
      nodes_(std::move(nodes)) {}

std::vector<std::size_t> RPTree::leaf_ids() const {
    std::vector<std::size_t> leaves;
    if (nodes_.empty()) return leaves;
    std::vector<std::size_t> stack{0};
    while (!stack.empty()) {
        const std::size_t id = stack.back();
        stack.pop_back();
        const RPTreeNode& node = nodes_[id];
        if (node.is_leaf()) {
            leaves.push_back(id);
        } else {
            stack.push_back(static_cast<std::size_t>(node.right));
            stack.push_back(static_cast<std::size_t>(node.left));
        }
    }
    return leaves;
}

std::size_t RPTree::leaf_count() const {
    return static_cast<std::size_t>(
        std::count_if(nodes_.begin(), nodes_.end(), [](const RPTreeNode& n) { return n.is_leaf(); }));
}

std::size_t RPTree::depth() const {
    if (nodes_.empty()) return 0;
    std::size_t deepest = 0;
    std::vector<std::pair<std::size_t, std::size_t>> stack{{0, 0}};
    while (!stack.empty()) {
        auto [id, level] = stack.back();
        stack.pop_back();
        const RPTreeNode& node = nodes_[id];
        if (node.is_leaf()) {
            deepest = std::max(deepest, level);
        } else {
            stack.emplace_back(static_cast<std::size_t>(node.left), level + 1);
            stack.emplace_back(static_cast<std::size_t>(node.right), level + 1);
        }
    }
    return deepest;
}

std::size_t RPTree::route_leaf(std::span<const double> x) const {
    if (x.size() != dim_) {
        throw std::invalid_argument("point dimension " + std::to_string(x.size()) +
                                    " does not match tree dimension " + std::to_string(dim_));
    }
    if (nodes_.empty()) throw std::logic_error("routing through an empty tree");
    std::size_t id = 0;
    while (!nodes_[id].is_leaf()) {
        const RPTreeNode& node = nodes_[id];
        id = static_cast<std::size_t>(project(node.direction, x.data()) <= node.threshold ? node.left
                                                                                       : node.right);
    }
    return id;
}

RPTree build_tree(const Dataset& dataset, const TreeParams& params, std::uint64_t seed) {
    if (params.bucket_capacity < 2) throw std::invalid_argument("bucket capacity must be at least 2");
    Rng rng(seed);
    std::vector<RPTreeNode> nodes(1);
    nodes[0].bucket = all_points(dataset.n());

    std::vector<std::size_t> stack{0};
    while (!stack.empty()) {
        const std::size_t id = stack.back();
        stack.pop_back();
        if (nodes[id].bucket.size() <= params.bucket_capacity) continue;
        Split split = split_points(dataset, nodes[id].bucket, params.sample_size, rng);
        make_internal(nodes, id, std::move(split));
        stack.push_back(static_cast<std::size_t>(nodes[id].right));
        stack.push_back(static_cast<std::size_t>(nodes[id].left));
    }
    sort_buckets(nodes);
    return RPTree(dataset.d(), dataset.n(), params.bucket_capacity, std::move(nodes));
}

RPTree build_tree_with_leaves(const Dataset& dataset, std::size_t leaf_count,
                              std::size_t sample_size, std::uint64_t seed) {
    if (leaf_count == 0 || leaf_count > dataset.n()) {
        throw std::invalid_argument("leaf count " + std::to_string(leaf_count) +
                                    " must be in [1, " + std::to_string(dataset.n()) + "]");
    }
    Rng rng(seed);
    std::vector<RPTreeNode> nodes(1);
    nodes[0].bucket = all_points(dataset.n());

    // (size, -creation order, node id): largest first, oldest first on ties.
    using Entry = std::tuple<std::size_t, std::int64_t, std::size_t>;
    std::priority_queue<Entry> open;
    std::int64_t created = 0;
    open.emplace(dataset.n(), -created++, 0);
    std::size_t leaves = 1;
    std::size_t capacity = 0;
    while (leaves < leaf_count) {
        const auto [size, order, id] = open.top();
        open.pop();
        Split split = split_points(dataset, nodes[id].bucket, sample_size, rng);
        make_internal(nodes, id, std::move(split));
        const auto left = static_cast<std::size_t>(nodes[id].left);
        const auto right = static_cast<std::size_t>(nodes[id].right);
        open.emplace(nodes[left].bucket.size(), -created++, left);
        open.emplace(nodes[right].bucket.size(), -created++, right);
        ++leaves;
    }
    capacity = std::get<0>(open.top());
    sort_buckets(nodes);
    return RPTree(dataset.d(), dataset.n(), capacity, std::move(nodes));
}

std::span<const PointId> route_point(const RPTree& tree, std::span<const double> x) {
    return tree.nodes()[tree.route_leaf(x)].bucket;
}

NeighborhoodIndex::NeighborhoodIndex(std::size_t n) : neighbors_(n) {
    for (std::size_t i = 0; i < n; ++i) neighbors_[i].push_back(static_cast<PointId>(i));
}

std::size_t NeighborhoodIndex::max_size() const {
    std::size_t m = 0;
    for (const auto& s : neighbors_) m = std::max(m, s.size());
    return m;
}

double NeighborhoodIndex::mean_size() const {
    if (neighbors_.empty()) return 0.0;
    double total = 0.0;
    for (const auto& s : neighbors_) total += static_cast<double>(s.size());
    return total / static_cast<double>(neighbors_.size());
}

void add_tree_to_index(NeighborhoodIndex& index, const RPTree& tree, std::size_t threads) {
    if (tree.point_count() != index.size()) {
        throw std::invalid_argument("tree covers " + std::to_string(tree.point_count()) +
                                    " points but index has " + std::to_string(index.size()));
    }
    const std::vector<std::size_t> leaves = tree.leaf_ids();
    auto& sets = index.mutable_sets();
    // Every point sits in exactly one leaf, so workers over disjoint leaf
    // ranges never touch the same set.
    parallel_for(leaves.size(), threads, [&](std::size_t begin, std::size_t end) {
        std::vector<PointId> merged;
        for (std::size_t l = begin; l < end; ++l) {
            const auto& bucket = tree.nodes()[leaves[l]].bucket;
            for (PointId i : bucket) {
                auto& own = sets[i];
                merged.clear();
                std::set_union(own.begin(), own.end(), bucket.begin(), bucket.end(),
                               std::back_inserter(merged));
                own.assign(merged.begin(), merged.end());
            }
        }
    });
    index.set_tree_count(index.tree_count() + 1);
}

}  // namespace ckm
