#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <set>
#include <vector>

#include "ckm/rptree.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace ckm;
using ckm::testing::TempDir;
using ckm::testing::uniform_dataset;

namespace {

double norm(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

double angle_between_lines(std::span<const double> a, std::span<const double> b) {
    double dot = 0.0;
    for (std::size_t t = 0; t < a.size(); ++t) dot += a[t] * b[t];
    return std::acos(std::min(1.0, std::abs(dot) / (norm(a) * norm(b))));
}

// Every point of the dataset appears in exactly one leaf.
void check_partition(const RPTree& tree, std::size_t n) {
    std::vector<int> seen(n, 0);
    for (std::size_t leaf : tree.leaf_ids()) {
        const auto& bucket = tree.nodes()[leaf].bucket;
        CHECK(std::is_sorted(bucket.begin(), bucket.end()));
        for (PointId i : bucket) ++seen[i];
    }
    CHECK(std::all_of(seen.begin(), seen.end(), [](int c) { return c == 1; }));
}

std::size_t subtree_size(const RPTree& tree, std::size_t id) {
    const RPTreeNode& node = tree.nodes()[id];
    if (node.is_leaf()) return node.bucket.size();
    return subtree_size(tree, static_cast<std::size_t>(node.left)) +
           subtree_size(tree, static_cast<std::size_t>(node.right));
}

}  // namespace

TEST_CASE("principal direction of points on a line") {
    std::vector<double> sample;
    for (int i = 0; i < 20; ++i) {
        sample.push_back(i * 0.5 - 3.0);
        sample.push_back(0.0);
        sample.push_back(0.0);
    }
    Rng rng(1);
    const PrincipalDirection pd = principal_direction(sample, 3, rng);
    CHECK_FALSE(pd.degenerate);
    CHECK(std::abs(std::abs(pd.direction[0]) - 1.0) < 1e-9);
    CHECK(std::abs(pd.direction[1]) < 1e-6);
    CHECK(std::abs(pd.direction[2]) < 1e-6);
}

TEST_CASE("identical points give a degenerate flag and still a unit direction") {
    const std::vector<double> sample(5 * 4, 2.5);
    Rng rng(3);
    const PrincipalDirection pd = principal_direction(sample, 4, rng);
    CHECK(pd.degenerate);
    CHECK(norm(pd.direction) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("principal direction agrees with a dense eigen-solver") {
    const double theta = std::numbers::pi / 6.0;
    std::mt19937_64 gen(42);
    std::normal_distribution<double> g(0.0, 1.0);
    const std::size_t s = 500;
    std::vector<double> sample(s * 2);
    Eigen::MatrixXd m(s, 2);
    for (std::size_t r = 0; r < s; ++r) {
        const double u = std::sqrt(10.0) * g(gen), v = g(gen);
        sample[2 * r] = std::cos(theta) * u - std::sin(theta) * v;
        sample[2 * r + 1] = std::sin(theta) * u + std::cos(theta) * v;
        m(static_cast<Eigen::Index>(r), 0) = sample[2 * r];
        m(static_cast<Eigen::Index>(r), 1) = sample[2 * r + 1];
    }
    const Eigen::MatrixXd centered = m.rowwise() - m.colwise().mean();
    const Eigen::Matrix2d cov = centered.transpose() * centered / static_cast<double>(s);
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(cov);
    const Eigen::Vector2d top = es.eigenvectors().col(1);
    const std::vector<double> oracle{top(0), top(1)};
    const std::vector<double> truth{std::cos(theta), std::sin(theta)};

    Rng rng(9);
    const PrincipalDirection pd = principal_direction(sample, 2, rng);
    CHECK_FALSE(pd.degenerate);
    CHECK(angle_between_lines(pd.direction, oracle) < 1e-3);
    CHECK(angle_between_lines(pd.direction, truth) < 5.0 * std::numbers::pi / 180.0);
}

TEST_CASE("principal direction in more dimensions than samples") {
    std::mt19937_64 gen(4);
    std::normal_distribution<double> g(0.0, 1.0);
    const std::size_t s = 8, d = 40;
    std::vector<double> sample(s * d);
    Eigen::MatrixXd m(s, d);
    for (std::size_t r = 0; r < s; ++r) {
        for (std::size_t t = 0; t < d; ++t) {
            sample[r * d + t] = g(gen) * (t == 3 ? 20.0 : 1.0);
            m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(t)) = sample[r * d + t];
        }
    }
    const Eigen::MatrixXd centered = m.rowwise() - m.colwise().mean();
    const Eigen::MatrixXd cov = centered.transpose() * centered;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
    const Eigen::VectorXd top = es.eigenvectors().col(static_cast<Eigen::Index>(d) - 1);
    const std::vector<double> oracle(top.data(), top.data() + d);

    Rng rng(5);
    const PrincipalDirection pd = principal_direction(sample, d, rng);
    CHECK(angle_between_lines(pd.direction, oracle) < 1e-3);
}

TEST_CASE("build_tree on ten points with capacity five") {
    const Dataset ds = uniform_dataset(10, 3, 2);
    const RPTree tree = build_tree(ds, {5, 256}, 1);
    CHECK(tree.leaf_count() == 2);
    CHECK(tree.depth() == 1);
    check_partition(tree, 10);
    for (std::size_t leaf : tree.leaf_ids()) CHECK(tree.nodes()[leaf].bucket.size() == 5);
}

TEST_CASE("build_tree with n not above capacity is a single leaf") {
    const Dataset ds = uniform_dataset(7, 2, 2);
    const RPTree tree = build_tree(ds, {10, 256}, 1);
    CHECK(tree.leaf_count() == 1);
    CHECK(tree.depth() == 0);
    CHECK(tree.nodes()[0].bucket.size() == 7);
    CHECK_THROWS_AS(build_tree(ds, {1, 256}, 1), std::invalid_argument);
}

TEST_CASE("build_tree on ten thousand points") {
    const Dataset ds = uniform_dataset(10000, 8, 3);
    const RPTree tree = build_tree(ds, {10, 256}, 11);
    check_partition(tree, ds.n());
    for (std::size_t leaf : tree.leaf_ids()) {
        CHECK(tree.nodes()[leaf].bucket.size() <= 10);
        CHECK(tree.nodes()[leaf].bucket.size() >= 1);
    }
    const auto expected = static_cast<std::size_t>(std::ceil(std::log2(10000.0 / 10.0)));
    CHECK(tree.depth() + 1 >= expected);
    CHECK(tree.depth() <= expected + 1);
}

TEST_CASE("tree splits are balanced and directions are unit vectors") {
    const Dataset ds = uniform_dataset(3000, 5, 4);
    const RPTree tree = build_tree(ds, {7, 64}, 5);
    for (const RPTreeNode& node : tree.nodes()) {
        if (node.is_leaf()) continue;
        const std::size_t l = subtree_size(tree, static_cast<std::size_t>(node.left));
        const std::size_t r = subtree_size(tree, static_cast<std::size_t>(node.right));
        CHECK(l >= r);
        CHECK(l - r <= 1);
        CHECK(norm(node.direction) == doctest::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("build_tree is deterministic in the seed") {
    const Dataset ds = uniform_dataset(2000, 6, 5);
    const RPTree a = build_tree(ds, {10, 100}, 77);
    const RPTree b = build_tree(ds, {10, 100}, 77);
    const RPTree c = build_tree(ds, {10, 100}, 78);
    REQUIRE(a.nodes().size() == b.nodes().size());
    bool same = true;
    for (std::size_t i = 0; i < a.nodes().size(); ++i) {
        same = same && a.nodes()[i].bucket == b.nodes()[i].bucket &&
               a.nodes()[i].direction == b.nodes()[i].direction &&
               a.nodes()[i].threshold == b.nodes()[i].threshold;
    }
    CHECK(same);
    bool differs = a.nodes().size() != c.nodes().size();
    for (std::size_t i = 0; !differs && i < a.nodes().size(); ++i) {
        differs = a.nodes()[i].bucket != c.nodes()[i].bucket;
    }
    CHECK(differs);
}

TEST_CASE("build_tree_with_leaves yields exactly the requested leaf count") {
    const Dataset ds = uniform_dataset(1000, 4, 6);
    for (std::size_t k : {1u, 2u, 3u, 17u, 100u, 1000u}) {
        const RPTree tree = build_tree_with_leaves(ds, k, 256, 3);
        CHECK(tree.leaf_count() == k);
        check_partition(tree, ds.n());
    }
    CHECK_THROWS_AS(build_tree_with_leaves(ds, 0, 256, 3), std::invalid_argument);
    CHECK_THROWS_AS(build_tree_with_leaves(ds, 1001, 256, 3), std::invalid_argument);
}

TEST_CASE("a single tree turns leaf buckets into neighborhoods") {
    const Dataset ds = uniform_dataset(500, 3, 7);
    const RPTree tree = build_tree(ds, {10, 256}, 2);
    NeighborhoodIndex index(ds.n());
    CHECK(index.tree_count() == 0);
    add_tree_to_index(index, tree);
    CHECK(index.tree_count() == 1);
    for (std::size_t leaf : tree.leaf_ids()) {
        const auto& bucket = tree.nodes()[leaf].bucket;
        for (PointId i : bucket) {
            const auto nb = index.neighbors(i);
            CHECK(std::vector<PointId>(nb.begin(), nb.end()) == bucket);
        }
    }
}

TEST_CASE("adding the same tree twice changes no neighborhood") {
    const Dataset ds = uniform_dataset(400, 3, 8);
    const RPTree tree = build_tree(ds, {10, 256}, 2);
    NeighborhoodIndex index(ds.n());
    add_tree_to_index(index, tree);
    const auto before = index.mutable_sets();
    add_tree_to_index(index, tree);
    CHECK(index.mutable_sets() == before);
}

TEST_CASE("two trees: sizes, self-membership and symmetry") {
    const Dataset ds = uniform_dataset(2000, 4, 9);
    NeighborhoodIndex index(ds.n());
    add_tree_to_index(index, build_tree(ds, {10, 256}, 1), 2);
    add_tree_to_index(index, build_tree(ds, {10, 256}, 2), 3);
    CHECK(index.tree_count() == 2);
    CHECK(index.max_size() <= 20);
    CHECK(index.max_size() > 10);

    std::vector<std::set<PointId>> sets(ds.n());
    for (std::size_t i = 0; i < ds.n(); ++i) {
        const auto nb = index.neighbors(i);
        CHECK(std::is_sorted(nb.begin(), nb.end()));
        CHECK(std::adjacent_find(nb.begin(), nb.end()) == nb.end());
        sets[i] = std::set<PointId>(nb.begin(), nb.end());
        CHECK(sets[i].count(static_cast<PointId>(i)) == 1);
    }
    bool symmetric = true;
    for (std::size_t i = 0; i < ds.n(); ++i) {
        for (PointId j : sets[i]) symmetric = symmetric && sets[j].count(static_cast<PointId>(i)) == 1;
    }
    CHECK(symmetric);
}

TEST_CASE("index rejects a tree over another point count") {
    const Dataset small = uniform_dataset(50, 2, 1);
    NeighborhoodIndex index(60);
    CHECK_THROWS_AS(add_tree_to_index(index, build_tree(small, {10, 256}, 1)), std::invalid_argument);
}

TEST_CASE("routing a training point lands in its own leaf") {
    const Dataset ds = uniform_dataset(1500, 5, 10);
    const RPTree tree = build_tree(ds, {10, 256}, 4);
    for (std::size_t i = 0; i < ds.n(); ++i) {
        const auto bucket = route_point(tree, ds.point(i));
        CHECK(std::binary_search(bucket.begin(), bucket.end(), static_cast<PointId>(i)));
    }
}

TEST_CASE("routing through a single-leaf tree returns everything") {
    const Dataset ds = uniform_dataset(5, 2, 10);
    const RPTree tree = build_tree(ds, {10, 256}, 4);
    const std::vector<double> far{100.0, -100.0};
    CHECK(route_point(tree, far).size() == 5);
    const std::vector<double> wrong{1.0};
    CHECK_THROWS_AS(route_point(tree, wrong), std::invalid_argument);
}

TEST_CASE("held-out points follow exactly one root-to-leaf path") {
    const Dataset ds = uniform_dataset(3000, 6, 12);
    const Dataset queries = uniform_dataset(100, 6, 13);
    const RPTree tree = build_tree(ds, {10, 256}, 8);
    for (std::size_t q = 0; q < queries.n(); ++q) {
        const auto x = queries.point(q);
        // Replay the path and confirm the opposite branch was not satisfiable.
        std::size_t id = 0;
        while (!tree.nodes()[id].is_leaf()) {
            const RPTreeNode& node = tree.nodes()[id];
            double proj = 0.0;
            for (std::size_t t = 0; t < x.size(); ++t) proj += node.direction[t] * x[t];
            id = static_cast<std::size_t>(proj <= node.threshold ? node.left : node.right);
        }
        CHECK(tree.route_leaf(x) == id);
    }
}

TEST_CASE("tree and index survive a save/load round trip") {
    TempDir dir;
    const Dataset ds = uniform_dataset(800, 4, 14);
    const RPTree tree = build_tree(ds, {10, 256}, 3);
    write_tree(tree, dir / "t.bin");
    const RPTree back = read_tree(dir / "t.bin");
    CHECK(back.dim() == tree.dim());
    CHECK(back.point_count() == tree.point_count());
    CHECK(back.bucket_capacity() == tree.bucket_capacity());
    REQUIRE(back.nodes().size() == tree.nodes().size());
    for (std::size_t i = 0; i < tree.nodes().size(); ++i) {
        CHECK(back.nodes()[i].bucket == tree.nodes()[i].bucket);
        CHECK(back.nodes()[i].direction == tree.nodes()[i].direction);
        CHECK(back.nodes()[i].threshold == tree.nodes()[i].threshold);
        CHECK(back.nodes()[i].left == tree.nodes()[i].left);
    }

    NeighborhoodIndex index(ds.n());
    add_tree_to_index(index, tree);
    add_tree_to_index(index, build_tree(ds, {10, 256}, 4));
    write_index(index, dir / "i.bin");
    NeighborhoodIndex loaded = read_index(dir / "i.bin");
    CHECK(loaded.tree_count() == 2);
    CHECK(loaded.mutable_sets() == index.mutable_sets());

    std::filesystem::resize_file(dir / "i.bin", std::filesystem::file_size(dir / "i.bin") - 3);
    CHECK_THROWS(read_index(dir / "i.bin"));
}
