#include <stdexcept>
#include <string>

#include "binary_io.hpp"
#include "ckm/rptree.hpp"

namespace ckm {

namespace {
constexpr std::uint32_t kTreeVersion = 1;
constexpr std::uint32_t kIndexVersion = 1;
}  // namespace

void write_tree(const RPTree& tree, const std::filesystem::path& path) {
    binary::Writer out(path);
    out.magic("CKRT");
    out.le<std::uint32_t>(kTreeVersion);
    out.le<std::uint64_t>(tree.dim());
    out.le<std::uint64_t>(tree.point_count());
    out.le<std::uint64_t>(tree.bucket_capacity());
    out.le<std::uint64_t>(tree.nodes().size());
    for (const RPTreeNode& node : tree.nodes()) {
        out.le<std::int32_t>(node.left);
        out.le<std::int32_t>(node.right);
        if (node.is_leaf()) {
            out.le<std::uint64_t>(node.bucket.size());
            for (PointId i : node.bucket) out.le<std::uint32_t>(i);
        } else {
            out.le<double>(node.threshold);
            for (double v : node.direction) out.le<double>(v);
        }
    }
    out.finish();
}

RPTree read_tree(const std::filesystem::path& path) {
    binary::Reader in(path);
    in.expect_magic("CKRT");
    if (const auto version = in.le<std::uint32_t>(); version != kTreeVersion) {
        throw std::runtime_error(path.string() + ": unsupported tree version " +
                                 std::to_string(version));
    }
    const auto dim = in.le<std::uint64_t>();
    const auto points = in.le<std::uint64_t>();
    const auto capacity = in.le<std::uint64_t>();
    const auto count = in.le<std::uint64_t>();
    std::vector<RPTreeNode> nodes(count);
    for (std::uint64_t id = 0; id < count; ++id) {
        RPTreeNode& node = nodes[id];
        node.left = in.le<std::int32_t>();
        node.right = in.le<std::int32_t>();
        if (node.is_leaf()) {
            const auto size = in.le<std::uint64_t>();
            if (size > points) throw std::runtime_error(path.string() + ": corrupt leaf size");
            node.bucket.resize(size);
            for (auto& i : node.bucket) i = in.le<std::uint32_t>();
        } else {
            if (node.right < 0 || static_cast<std::uint64_t>(node.left) >= count ||
                static_cast<std::uint64_t>(node.right) >= count) {
                throw std::runtime_error(path.string() + ": corrupt child index at node " +
                                         std::to_string(id));
            }
            node.threshold = in.le<double>();
            node.direction.resize(dim);
            for (double& v : node.direction) v = in.le<double>();
        }
    }
    return RPTree(dim, points, capacity, std::move(nodes));
}

void write_index(const NeighborhoodIndex& index, const std::filesystem::path& path) {
    binary::Writer out(path);
    out.magic("CKNI");
    out.le<std::uint32_t>(kIndexVersion);
    out.le<std::uint64_t>(index.size());
    out.le<std::uint64_t>(index.tree_count());
    for (std::size_t i = 0; i < index.size(); ++i) {
        const auto set = index.neighbors(i);
        out.le<std::uint32_t>(static_cast<std::uint32_t>(set.size()));
        for (PointId j : set) out.le<std::uint32_t>(j);
    }
    out.finish();
}

NeighborhoodIndex read_index(const std::filesystem::path& path) {
    binary::Reader in(path);
    in.expect_magic("CKNI");
    if (const auto version = in.le<std::uint32_t>(); version != kIndexVersion) {
        throw std::runtime_error(path.string() + ": unsupported index version " +
                                 std::to_string(version));
    }
    const auto n = in.le<std::uint64_t>();
    const auto trees = in.le<std::uint64_t>();
    NeighborhoodIndex index(n);
    auto& sets = index.mutable_sets();
    for (std::uint64_t i = 0; i < n; ++i) {
        const auto size = in.le<std::uint32_t>();
        if (size > n) throw std::runtime_error(path.string() + ": corrupt set size");
        sets[i].resize(size);
        for (auto& j : sets[i]) {
            j = in.le<std::uint32_t>();
            if (j >= n) throw std::runtime_error(path.string() + ": neighbor id out of range");
        }
    }
    index.set_tree_count(trees);
    return index;
}

}  // namespace ckm
