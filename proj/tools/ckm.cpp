// ckm: command-line driver for closure-based k-means.
//
//   ckm gen       synthesize a Gaussian-mixture dataset (+ .labels sidecar)
//   ckm train     run closure k-means or exact Lloyd, write model and history
//   ckm eval      report WCSSD (and NMI given labels) for a saved model
//   ckm diagnose  distance-ratio histogram and closure-recall curve
//
// Exit codes: 0 success, 2 usage error, 1 runtime error.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <numeric>
#include <string>

#include "CLI11.hpp"
#include "ckm/baselines.hpp"
#include "ckm/closure_kmeans.hpp"
#include "ckm/data_io.hpp"
#include "ckm/model_io.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kUsageError = 2;
constexpr int kRuntimeError = 1;

std::string format_real(double v) {
    char buffer[40];
    std::snprintf(buffer, sizeof buffer, "%.17g", v);
    return buffer;
}

fs::path labels_sidecar(const fs::path& data_path) {
    fs::path p = data_path;
    return p.replace_extension(".labels");
}

std::pair<std::size_t, std::size_t> parse_range(const std::string& text) {
    const auto dots = text.find("..");
    auto to_size = [&](const std::string& s) {
        std::size_t used = 0;
        const unsigned long long v = std::stoull(s, &used);
        if (used != s.size()) throw CLI::ValidationError("--trees-range", "bad number '" + s + "'");
        return static_cast<std::size_t>(v);
    };
    try {
        if (dots == std::string::npos) return {1, to_size(text)};
        return {to_size(text.substr(0, dots)), to_size(text.substr(dots + 2))};
    } catch (const std::logic_error&) {
        throw CLI::ValidationError("--trees-range", "expected FROM..TO, got '" + text + "'");
    }
}

struct GenArgs {
    ckm::GmmParams gmm;
    std::string out;
};

int run_gen(const GenArgs& args) {
    const ckm::Dataset data = ckm::gen_gmm(args.gmm);
    ckm::save_dataset(data, args.out);
    const fs::path labels = labels_sidecar(args.out);
    ckm::write_labels(*data.labels(), labels);
    std::cout << "points=" << data.n() << "\n"
              << "dim=" << data.d() << "\n"
              << "data=" << args.out << "\n"
              << "labels=" << labels.string() << "\n";
    return 0;
}

struct TrainArgs {
    std::string input;
    std::string algo = "closure";
    ckm::ClosureConfig config;
    std::string out_model;
    std::string out_history;
};

int run_train(const TrainArgs& args) {
    const ckm::Dataset data = ckm::load_dataset(args.input);
    const ckm::Algorithm algorithm = ckm::parse_algorithm(args.algo);
    const ckm::ClosureConfig& config = args.config;
    config.validate();
    if (config.k > data.n()) {
        throw std::invalid_argument("k = " + std::to_string(config.k) + " exceeds n = " +
                                    std::to_string(data.n()));
    }

    ckm::ClusterModel model;
    std::vector<ckm::IterationStats> history;
    std::size_t trees = 0;
    if (algorithm == ckm::Algorithm::closure) {
        ckm::ClosureState state = ckm::run(data, config);
        model = std::move(state.model);
        history = std::move(state.history);
        trees = state.trees.size();
    } else {
        ckm::LloydConfig lloyd;
        lloyd.max_iterations = config.max_iterations;
        lloyd.epsilon = config.convergence_epsilon;
        lloyd.threads = config.threads;
        ckm::LloydResult result =
            ckm::lloyd_run_from_tree_init(data, config.k, config.seed, config.pca_sample_size, lloyd);
        model = std::move(result.model);
        history = std::move(result.history);
    }

    if (!args.out_model.empty()) {
        ckm::write_model(ckm::make_saved_model(model, algorithm, config), args.out_model);
    }
    if (!args.out_history.empty()) ckm::write_history_csv(history, fs::path(args.out_history));

    const std::uint64_t computations = std::accumulate(
        history.begin(), history.end(), std::uint64_t{0},
        [](std::uint64_t acc, const ckm::IterationStats& row) { return acc + row.distance_computations; });
    std::cout << "algo=" << ckm::to_string(algorithm) << "\n"
              << "iterations=" << history.back().iteration << "\n"
              << "wcssd=" << format_real(history.back().wcssd) << "\n"
              << "distance_computations=" << computations << "\n"
              << "trees=" << trees << "\n"
              << "elapsed_seconds=" << history.back().elapsed << "\n";
    return 0;
}

struct EvalArgs {
    std::string input;
    std::string model;
    std::string labels;
};

int run_eval(const EvalArgs& args) {
    const ckm::Dataset data = ckm::load_dataset(args.input);
    const ckm::SavedModel saved = ckm::read_model(args.model);
    const ckm::ClusterModel model = saved.to_model(data);
    std::cout << "n=" << data.n() << "\n"
              << "d=" << data.d() << "\n"
              << "k=" << model.k << "\n"
              << "wcssd=" << format_real(ckm::wcssd(data, model)) << "\n";
    if (!args.labels.empty()) {
        const std::vector<ckm::Label> labels = ckm::read_labels(args.labels);
        if (labels.size() != data.n()) {
            throw std::invalid_argument("labels file has " + std::to_string(labels.size()) +
                                        " entries for " + std::to_string(data.n()) + " points");
        }
        std::cout << "nmi=" << format_real(ckm::nmi(labels, model.assignments)) << "\n";
    }
    return 0;
}

struct DiagnoseArgs {
    std::string input;
    ckm::DiagnoseConfig config;
    std::string trees_range = "1..5";
    std::string out_dir;
};

int run_diagnose(DiagnoseArgs args) {
    const ckm::Dataset data = ckm::load_dataset(args.input);
    std::tie(args.config.trees_from, args.config.trees_to) = parse_range(args.trees_range);
    const ckm::Diagnosis result = ckm::diagnose(data, args.config);

    fs::create_directories(args.out_dir);
    const fs::path histogram_path = fs::path(args.out_dir) / "distance_ratio_histogram.csv";
    const fs::path recall_path = fs::path(args.out_dir) / "closure_recall.csv";
    ckm::write_histogram_csv(result.histogram, histogram_path);
    ckm::write_recall_csv(result.recall, recall_path);

    std::size_t below = 0;
    for (double r : result.ratios) below += r < 0.15 ? 1 : 0;
    std::cout << "active_points=" << result.active_points << "\n"
              << "ratio_below_0.15="
              << format_real(result.ratios.empty() ? 0.0
                                                   : static_cast<double>(below) / result.ratios.size())
              << "\n";
    for (const auto& p : result.recall) {
        std::cout << "recall[trees=" << p.trees << ",mean_size=" << format_real(p.mean_neighborhood_size)
                  << "]=" << format_real(p.recall) << "\n";
    }
    std::cout << "histogram=" << histogram_path.string() << "\n"
              << "recall_curve=" << recall_path.string() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Closure-based approximate k-means"};
    app.require_subcommand(1);

    GenArgs gen;
    auto* gen_cmd = app.add_subcommand("gen", "Generate a Gaussian-mixture dataset");
    gen_cmd->add_option("--k-true", gen.gmm.k_true, "Mixture components")->required();
    gen_cmd->add_option("--n", gen.gmm.n, "Point count")->required();
    gen_cmd->add_option("--d", gen.gmm.d, "Dimension")->required();
    gen_cmd->add_option("--sigma", gen.gmm.sigma, "Component standard deviation")->capture_default_str();
    gen_cmd->add_option("--center-scale", gen.gmm.center_scale, "Centers uniform in [-s, s]^d")
        ->capture_default_str();
    gen_cmd->add_option("--seed", gen.gmm.seed, "Random seed")->capture_default_str();
    gen_cmd->add_option("--out", gen.out, "Output file (.fvecs, .bvecs or .csv)")->required();

    TrainArgs train;
    auto* train_cmd = app.add_subcommand("train", "Cluster a dataset");
    train_cmd->add_option("--input", train.input, "Dataset (.fvecs, .bvecs or .csv)")->required();
    train_cmd->add_option("--k", train.config.k, "Cluster count")->required();
    train_cmd->add_option("--algo", train.algo, "closure or lloyd")
        ->check(CLI::IsMember({"closure", "lloyd"}))
        ->capture_default_str();
    train_cmd->add_option("--bucket-size", train.config.bucket_capacity, "RP-tree leaf capacity")
        ->capture_default_str();
    train_cmd->add_option("--max-trees", train.config.max_trees, "Neighborhood tree budget")
        ->capture_default_str();
    train_cmd->add_option("--tau", train.config.reduction_threshold,
                          "Add a tree when the relative WCSSD reduction falls below this")
        ->capture_default_str();
    train_cmd->add_option("--epsilon", train.config.convergence_epsilon, "Convergence threshold")
        ->capture_default_str();
    train_cmd->add_option("--max-iters", train.config.max_iterations, "Iteration cap")
        ->capture_default_str();
    train_cmd->add_option("--seed", train.config.seed, "Random seed")->capture_default_str();
    train_cmd->add_option("--threads", train.config.threads, "Worker threads")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    train_cmd->add_option("--pca-sample", train.config.pca_sample_size, "Points sampled per split")
        ->capture_default_str();
    train_cmd->add_option("--out-model", train.out_model, "Binary model output");
    train_cmd->add_option("--out-history", train.out_history, "Per-iteration CSV output");

    EvalArgs eval;
    auto* eval_cmd = app.add_subcommand("eval", "Evaluate a saved model");
    eval_cmd->add_option("--input", eval.input, "Dataset")->required();
    eval_cmd->add_option("--model", eval.model, "Model written by train")->required();
    eval_cmd->add_option("--labels", eval.labels, "Ground-truth labels, one per line");

    DiagnoseArgs diag;
    auto* diag_cmd = app.add_subcommand("diagnose", "Distance-ratio and closure-recall diagnostics");
    diag_cmd->add_option("--input", diag.input, "Dataset")->required();
    diag_cmd->add_option("--k", diag.config.k, "Cluster count")->required();
    diag_cmd->add_option("--iteration", diag.config.iteration, "Exact assignment step to inspect")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    diag_cmd->add_option("--bucket-size", diag.config.bucket_capacity, "RP-tree leaf capacity")
        ->capture_default_str();
    diag_cmd->add_option("--trees-range", diag.trees_range, "Tree counts FROM..TO")->capture_default_str();
    diag_cmd->add_option("--bins", diag.config.bins, "Histogram bins")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    diag_cmd->add_option("--seed", diag.config.seed, "Random seed")->capture_default_str();
    diag_cmd->add_option("--threads", diag.config.threads, "Worker threads")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    diag_cmd->add_option("--pca-sample", diag.config.pca_sample_size, "Points sampled per split")
        ->capture_default_str();
    diag_cmd->add_option("--out-dir", diag.out_dir, "Directory for the CSV outputs")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n\n";
        const CLI::App* failed = &app;
        for (const CLI::App* sub : app.get_subcommands()) failed = sub;
        std::cerr << failed->help();
        return kUsageError;
    }

    try {
        if (*gen_cmd) return run_gen(gen);
        if (*train_cmd) return run_train(train);
        if (*eval_cmd) return run_eval(eval);
        if (*diag_cmd) return run_diagnose(diag);
    } catch (const CLI::ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsageError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kRuntimeError;
    }
    return kUsageError;
}
