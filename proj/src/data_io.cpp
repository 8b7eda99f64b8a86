#include "ckm/data_io.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <random>
#include <string_view>

namespace ckm {

namespace {

std::vector<unsigned char> slurp(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t load_u32(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void store_u32(std::uint32_t v, unsigned char* p) {
    p[0] = static_cast<unsigned char>(v);
    p[1] = static_cast<unsigned char>(v >> 8);
    p[2] = static_cast<unsigned char>(v >> 16);
    p[3] = static_cast<unsigned char>(v >> 24);
}

// Shared record walker for fvecs/bvecs; `width` is the byte size of one value.
template <class Decode>
Dataset read_vecs(const std::filesystem::path& path, std::size_t width, Decode decode) {
    const std::vector<unsigned char> bytes = slurp(path);
    if (bytes.empty()) throw FormatError(path.string() + ": empty dataset");

    std::vector<double> values;
    std::size_t dim = 0;
    std::size_t records = 0;
    std::size_t offset = 0;
    while (offset < bytes.size()) {
        const std::string where = path.string() + ": record " + std::to_string(records);
        if (bytes.size() - offset < 4) throw FormatError(where + ": truncated header");
        const auto header = static_cast<std::int32_t>(load_u32(bytes.data() + offset));
        offset += 4;
        if (header <= 0) throw FormatError(where + ": non-positive dimension " + std::to_string(header));
        const auto d = static_cast<std::size_t>(header);
        if (records == 0) {
            dim = d;
        } else if (d != dim) {
            throw FormatError(where + ": dimension " + std::to_string(d) + " differs from " +
                              std::to_string(dim));
        }
        if (bytes.size() - offset < d * width) throw FormatError(where + ": truncated record");
        for (std::size_t t = 0; t < d; ++t) {
            values.push_back(decode(bytes.data() + offset + t * width));
        }
        offset += d * width;
        ++records;
    }
    return Dataset(records, dim, std::move(values));
}

void write_bytes(const std::vector<unsigned char>& bytes, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw std::runtime_error("write to " + path.string() + " failed");
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

template <class T>
bool parse_number(std::string_view cell, T& value) {
    cell = trim(cell);
    if (!cell.empty() && cell.front() == '+') cell.remove_prefix(1);
    const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
    return !cell.empty() && ec == std::errc() && ptr == cell.data() + cell.size();
}

std::string lower_extension(const std::filesystem::path& path) {
    std::string ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return ext;
}

}  // namespace

Dataset read_fvecs(const std::filesystem::path& path) {
    return read_vecs(path, 4, [](const unsigned char* p) {
        return static_cast<double>(std::bit_cast<float>(load_u32(p)));
    });
}

void write_fvecs(const Dataset& dataset, const std::filesystem::path& path) {
    const std::size_t d = dataset.d();
    std::vector<unsigned char> bytes(dataset.n() * (4 + 4 * d));
    unsigned char* p = bytes.data();
    for (std::size_t i = 0; i < dataset.n(); ++i) {
        store_u32(static_cast<std::uint32_t>(d), p);
        p += 4;
        for (double v : dataset.point(i)) {
            store_u32(std::bit_cast<std::uint32_t>(static_cast<float>(v)), p);
            p += 4;
        }
    }
    write_bytes(bytes, path);
}

Dataset read_bvecs(const std::filesystem::path& path) {
    return read_vecs(path, 1, [](const unsigned char* p) { return static_cast<double>(*p); });
}

void write_bvecs(const Dataset& dataset, const std::filesystem::path& path) {
    const std::size_t d = dataset.d();
    std::vector<unsigned char> bytes(dataset.n() * (4 + d));
    unsigned char* p = bytes.data();
    for (std::size_t i = 0; i < dataset.n(); ++i) {
        store_u32(static_cast<std::uint32_t>(d), p);
        p += 4;
        for (double v : dataset.point(i)) {
            if (v < 0.0 || v > 255.0 || v != std::floor(v)) {
                throw std::invalid_argument("point " + std::to_string(i) +
                                            " has a value not representable as a byte");
            }
            *p++ = static_cast<unsigned char>(v);
        }
    }
    write_bytes(bytes, path);
}

Dataset read_csv(const std::filesystem::path& path, bool has_labels) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());

    std::vector<double> values;
    std::vector<Label> labels;
    std::size_t dim = 0;
    std::size_t rows = 0;
    std::size_t line_no = 0;
    std::string line;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const std::string where = path.string() + ":" + std::to_string(line_no);

        std::vector<std::string_view> cells;
        std::string_view rest(line);
        while (true) {
            const auto comma = rest.find(',');
            cells.push_back(rest.substr(0, comma));
            if (comma == std::string_view::npos) break;
            rest.remove_prefix(comma + 1);
        }
        const std::size_t coords = cells.size() - (has_labels ? 1 : 0);
        if (coords == 0) throw FormatError(where + ": row has no coordinates");
        if (rows == 0) {
            dim = coords;
        } else if (coords != dim) {
            throw FormatError(where + ": expected " + std::to_string(dim) + " coordinates, got " +
                              std::to_string(coords));
        }
        for (std::size_t c = 0; c < coords; ++c) {
            double v = 0.0;
            if (!parse_number(cells[c], v) || !std::isfinite(v)) {
                throw FormatError(where + ": column " + std::to_string(c + 1) +
                                  ": not a finite number: '" + std::string(cells[c]) + "'");
            }
            values.push_back(v);
        }
        if (has_labels) {
            Label label = 0;
            if (!parse_number(cells.back(), label)) {
                throw FormatError(where + ": label is not an integer: '" +
                                  std::string(cells.back()) + "'");
            }
            labels.push_back(label);
        }
        ++rows;
    }
    if (rows == 0) throw FormatError(path.string() + ": empty dataset");
    if (has_labels) return Dataset(rows, dim, std::move(values), std::move(labels));
    return Dataset(rows, dim, std::move(values));
}

void write_csv(const Dataset& dataset, const std::filesystem::path& path, bool with_labels) {
    if (with_labels && !dataset.has_labels()) {
        throw std::invalid_argument("dataset has no labels to write");
    }
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    char buffer[40];
    for (std::size_t i = 0; i < dataset.n(); ++i) {
        const auto x = dataset.point(i);
        for (std::size_t t = 0; t < x.size(); ++t) {
            std::snprintf(buffer, sizeof buffer, "%.17g", x[t]);
            if (t > 0) out << ',';
            out << buffer;
        }
        if (with_labels) out << ',' << (*dataset.labels())[i];
        out << '\n';
    }
    out.flush();
    if (!out) throw std::runtime_error("write to " + path.string() + " failed");
}

std::vector<Label> read_labels(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::vector<Label> labels;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        Label label = 0;
        if (!parse_number(std::string_view(line), label)) {
            throw FormatError(path.string() + ":" + std::to_string(line_no) +
                              ": label is not an integer");
        }
        labels.push_back(label);
    }
    return labels;
}

void write_labels(const std::vector<Label>& labels, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    for (Label l : labels) out << l << '\n';
    out.flush();
    if (!out) throw std::runtime_error("write to " + path.string() + " failed");
}

Dataset load_dataset(const std::filesystem::path& path) {
    const std::string ext = lower_extension(path);
    if (ext == ".fvecs") return read_fvecs(path);
    if (ext == ".bvecs") return read_bvecs(path);
    if (ext == ".csv") return read_csv(path, false);
    throw std::invalid_argument("unsupported dataset extension '" + ext + "' for " + path.string());
}

void save_dataset(const Dataset& dataset, const std::filesystem::path& path) {
    const std::string ext = lower_extension(path);
    if (ext == ".fvecs") return write_fvecs(dataset, path);
    if (ext == ".bvecs") return write_bvecs(dataset, path);
    if (ext == ".csv") return write_csv(dataset, path, false);
    throw std::invalid_argument("unsupported dataset extension '" + ext + "' for " + path.string());
}

namespace {

void check_gmm(const GmmParams& p) {
    if (p.k_true < 1) throw std::invalid_argument("k_true must be at least 1");
    if (p.n < 1) throw std::invalid_argument("n must be at least 1");
    if (p.k_true > p.n) throw std::invalid_argument("k_true must not exceed n");
    if (p.d < 1) throw std::invalid_argument("d must be at least 1");
    if (!(p.sigma >= 0.0) || !std::isfinite(p.sigma)) throw std::invalid_argument("sigma must be >= 0");
    if (!(p.center_scale >= 0.0) || !std::isfinite(p.center_scale)) {
        throw std::invalid_argument("center scale must be >= 0");
    }
}

std::vector<double> draw_centers(const GmmParams& p, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> uniform(-p.center_scale, p.center_scale);
    std::vector<double> centers(p.k_true * p.d);
    for (double& c : centers) c = p.center_scale > 0.0 ? uniform(rng) : 0.0;
    return centers;
}

}  // namespace

std::vector<double> gmm_centers(const GmmParams& params) {
    check_gmm(params);
    std::mt19937_64 rng(params.seed);
    return draw_centers(params, rng);
}

Dataset gen_gmm(const GmmParams& params) {
    check_gmm(params);
    std::mt19937_64 rng(params.seed);
    const std::vector<double> centers = draw_centers(params, rng);

    std::uniform_int_distribution<std::size_t> component(0, params.k_true - 1);
    std::normal_distribution<double> noise(0.0, 1.0);
    std::vector<double> values(params.n * params.d);
    std::vector<Label> labels(params.n);
    for (std::size_t i = 0; i < params.n; ++i) {
        const std::size_t c = component(rng);
        labels[i] = static_cast<Label>(c);
        for (std::size_t t = 0; t < params.d; ++t) {
            const double offset = params.sigma > 0.0 ? params.sigma * noise(rng) : 0.0;
            values[i * params.d + t] = centers[c * params.d + t] + offset;
        }
    }
    return Dataset(params.n, params.d, std::move(values), std::move(labels));
}

}  // namespace ckm
