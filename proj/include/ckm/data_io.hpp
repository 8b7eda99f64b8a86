#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "ckm/core.hpp"

namespace ckm {

// Malformed input. The message always names the offending record or line.
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// fvecs: per record a little-endian int32 dimension followed by that many
// little-endian float32 values. bvecs: same header, then unsigned bytes.
Dataset read_fvecs(const std::filesystem::path& path);
void write_fvecs(const Dataset& dataset, const std::filesystem::path& path);
Dataset read_bvecs(const std::filesystem::path& path);
void write_bvecs(const Dataset& dataset, const std::filesystem::path& path);

// Comma-separated numeric rows. With `has_labels` the last column is an
// integer class id.
Dataset read_csv(const std::filesystem::path& path, bool has_labels);
void write_csv(const Dataset& dataset, const std::filesystem::path& path, bool with_labels);

// One integer label per line.
std::vector<Label> read_labels(const std::filesystem::path& path);
void write_labels(const std::vector<Label>& labels, const std::filesystem::path& path);

// Dispatches on extension: .fvecs, .bvecs, .csv (no label column).
Dataset load_dataset(const std::filesystem::path& path);
void save_dataset(const Dataset& dataset, const std::filesystem::path& path);

struct GmmParams {
    std::size_t k_true = 10;
    std::size_t n = 1000;
    std::size_t d = 2;
    double center_scale = 10.0;
    double sigma = 0.5;
    std::uint64_t seed = 1;
};

// Isotropic Gaussian mixture. Component centers are uniform in
// [-center_scale, center_scale]^d, each point picks a component uniformly.
Dataset gen_gmm(const GmmParams& params);

// The centers gen_gmm draws for `params`, in component order.
std::vector<double> gmm_centers(const GmmParams& params);

}  // namespace ckm
