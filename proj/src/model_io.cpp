#include "ckm/model_io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "binary_io.hpp"

namespace ckm {

namespace {

constexpr std::uint32_t kModelVersion = 1;
constexpr const char* kHistoryHeader =
    "iteration,wcssd,distance_computations,active_points,tree_count,elapsed_seconds";

template <class T>
T parse_cell(std::string_view cell, const std::filesystem::path& path, std::size_t line) {
    T value{};
    const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
    if (ec != std::errc() || ptr != cell.data() + cell.size()) {
        throw std::runtime_error(path.string() + ":" + std::to_string(line) +
                                 ": malformed history cell '" + std::string(cell) + "'");
    }
    return value;
}

}  // namespace

std::string_view to_string(Algorithm algorithm) {
    return algorithm == Algorithm::lloyd ? "lloyd" : "closure";
}

Algorithm parse_algorithm(std::string_view name) {
    if (name == "closure") return Algorithm::closure;
    if (name == "lloyd") return Algorithm::lloyd;
    throw std::invalid_argument("unknown algorithm '" + std::string(name) + "'");
}

ClusterModel SavedModel::to_model(const Dataset& dataset) const {
    if (d != dataset.d()) {
        throw std::invalid_argument("model dimension " + std::to_string(d) +
                                    " does not match dataset dimension " +
                                    std::to_string(dataset.d()));
    }
    if (n != dataset.n()) {
        throw std::invalid_argument("model was trained on " + std::to_string(n) +
                                    " points but dataset has " + std::to_string(dataset.n()));
    }
    ClusterModel model;
    model.k = k;
    model.d = d;
    model.centers = centers;
    model.assignments = assignments;
    model.validate(dataset);
    model.distances.resize(dataset.n());
    for (std::size_t i = 0; i < dataset.n(); ++i) {
        model.distances[i] = squared_euclidean(dataset.point(i), model.center(model.assignments[i]));
    }
    return model;
}

SavedModel make_saved_model(const ClusterModel& model, Algorithm algorithm,
                            const ClosureConfig& config) {
    SavedModel saved;
    saved.n = model.assignments.size();
    saved.d = model.d;
    saved.k = model.k;
    saved.algorithm = algorithm;
    saved.config = config;
    saved.centers = model.centers;
    saved.assignments = model.assignments;
    return saved;
}

void write_model(const SavedModel& model, const std::filesystem::path& path) {
    if (model.centers.size() != model.k * model.d || model.assignments.size() != model.n) {
        throw std::invalid_argument("saved model arrays do not match its header");
    }
    binary::Writer out(path);
    out.magic("CKMM");
    out.le<std::uint32_t>(kModelVersion);
    out.le<std::uint64_t>(model.n);
    out.le<std::uint64_t>(model.d);
    out.le<std::uint64_t>(model.k);
    out.le<std::uint64_t>(model.config.seed);
    out.le<std::uint32_t>(static_cast<std::uint32_t>(model.algorithm));
    out.le<std::uint64_t>(model.config.bucket_capacity);
    out.le<std::uint64_t>(model.config.max_trees);
    out.le<double>(model.config.reduction_threshold);
    out.le<double>(model.config.convergence_epsilon);
    out.le<std::uint64_t>(model.config.max_iterations);
    out.le<std::uint64_t>(model.config.pca_sample_size);
    for (double v : model.centers) out.le<double>(v);
    for (ClusterId z : model.assignments) out.le<std::uint32_t>(z);
    out.finish();
}

SavedModel read_model(const std::filesystem::path& path) {
    binary::Reader in(path);
    in.expect_magic("CKMM");
    if (const auto version = in.le<std::uint32_t>(); version != kModelVersion) {
        throw std::runtime_error(path.string() + ": unsupported model version " +
                                 std::to_string(version));
    }
    SavedModel model;
    model.n = in.le<std::uint64_t>();
    model.d = in.le<std::uint64_t>();
    model.k = in.le<std::uint64_t>();
    model.config.k = model.k;
    model.config.seed = in.le<std::uint64_t>();
    const auto algorithm = in.le<std::uint32_t>();
    if (algorithm > 1) throw std::runtime_error(path.string() + ": unknown algorithm tag");
    model.algorithm = static_cast<Algorithm>(algorithm);
    model.config.bucket_capacity = in.le<std::uint64_t>();
    model.config.max_trees = in.le<std::uint64_t>();
    model.config.reduction_threshold = in.le<double>();
    model.config.convergence_epsilon = in.le<double>();
    model.config.max_iterations = in.le<std::uint64_t>();
    model.config.pca_sample_size = in.le<std::uint64_t>();
    if (model.k == 0 || model.d == 0 || model.k > model.n) {
        throw std::runtime_error(path.string() + ": inconsistent model header");
    }
    model.centers.resize(model.k * model.d);
    for (double& v : model.centers) v = in.le<double>();
    model.assignments.resize(model.n);
    for (auto& z : model.assignments) {
        z = in.le<std::uint32_t>();
        if (z >= model.k) throw std::runtime_error(path.string() + ": assignment out of range");
    }
    return model;
}

void write_history_csv(std::span<const IterationStats> history, std::ostream& out) {
    out << kHistoryHeader << '\n';
    char buffer[64];
    for (const IterationStats& row : history) {
        out << row.iteration << ',';
        std::snprintf(buffer, sizeof buffer, "%.17g", row.wcssd);
        out << buffer << ',' << row.distance_computations << ',' << row.active_points << ','
            << row.tree_count << ',';
        std::snprintf(buffer, sizeof buffer, "%.6f", row.elapsed);
        out << buffer << '\n';
    }
}

void write_history_csv(std::span<const IterationStats> history, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    write_history_csv(history, out);
    out.flush();
    if (!out) throw std::runtime_error("write to " + path.string() + " failed");
}

std::vector<IterationStats> read_history_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line) || line != kHistoryHeader) {
        throw std::runtime_error(path.string() + ":1: unexpected history header");
    }
    std::vector<IterationStats> rows;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::vector<std::string_view> cells;
        std::string_view rest(line);
        while (true) {
            const auto comma = rest.find(',');
            cells.push_back(rest.substr(0, comma));
            if (comma == std::string_view::npos) break;
            rest.remove_prefix(comma + 1);
        }
        if (cells.size() != 6) {
            throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                                     ": expected 6 columns");
        }
        IterationStats row;
        row.iteration = parse_cell<std::size_t>(cells[0], path, line_no);
        row.wcssd = parse_cell<double>(cells[1], path, line_no);
        row.distance_computations = parse_cell<std::uint64_t>(cells[2], path, line_no);
        row.active_points = parse_cell<std::size_t>(cells[3], path, line_no);
        row.tree_count = parse_cell<std::size_t>(cells[4], path, line_no);
        row.elapsed = parse_cell<double>(cells[5], path, line_no);
        rows.push_back(row);
    }
    return rows;
}

}  // namespace ckm
