#include <sys/wait.h>

#include <cstdio>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "ckm/data_io.hpp"
#include "ckm/model_io.hpp"
#include "doctest.h"
#include "test_util.hpp"

using ckm::testing::TempDir;

namespace {

struct Result {
    int code = -1;
    std::string out;
};

Result ckm_cli(const std::string& args) {
    const std::string command = std::string(CKM_CLI_PATH) + " " + args + " 2>/dev/null";
    Result r;
    FILE* pipe = popen(command.c_str(), "r");
    REQUIRE(pipe != nullptr);
    char buffer[4096];
    std::size_t got = 0;
    while ((got = std::fread(buffer, 1, sizeof buffer, pipe)) > 0) r.out.append(buffer, got);
    const int status = pclose(pipe);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

std::map<std::string, std::string> fields(const std::string& text) {
    std::map<std::string, std::string> out;
    std::istringstream in(text);
    for (std::string line; std::getline(in, line);) {
        const auto eq = line.rfind('=');
        if (eq != std::string::npos) out[line.substr(0, eq)] = line.substr(eq + 1);
    }
    return out;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string q(const std::filesystem::path& p) { return "'" + p.string() + "'"; }

}  // namespace

TEST_CASE("gen writes data and labels, reproducibly") {
    TempDir dir;
    const std::string args = "gen --k-true 5 --n 500 --d 4 --seed 3 --out ";
    Result r = ckm_cli(args + q(dir / "a.fvecs"));
    REQUIRE(r.code == 0);
    CHECK(fields(r.out)["points"] == "500");
    CHECK(std::filesystem::file_size(dir / "a.fvecs") == 500 * (4 + 16));
    CHECK(ckm::read_labels(dir / "a.labels").size() == 500);

    REQUIRE(ckm_cli(args + q(dir / "b.fvecs")).code == 0);
    CHECK(slurp(dir / "a.fvecs") == slurp(dir / "b.fvecs"));
    CHECK(slurp(dir / "a.labels") == slurp(dir / "b.labels"));
}

TEST_CASE("usage errors exit with code 2") {
    CHECK(ckm_cli("gen --k-true 5 --n 500 --d 4").code == 2);
    CHECK(ckm_cli("").code == 2);
    CHECK(ckm_cli("train --input x.fvecs").code == 2);
    CHECK(ckm_cli("train --input x.fvecs --k 3 --algo magic").code == 2);
}

TEST_CASE("runtime errors exit with code 1") {
    TempDir dir;
    CHECK(ckm_cli("train --input " + q(dir / "missing.fvecs") + " --k 3").code == 1);
    REQUIRE(ckm_cli("gen --k-true 2 --n 20 --d 2 --out " + q(dir / "s.csv")).code == 0);
    CHECK(ckm_cli("train --input " + q(dir / "s.csv") + " --k 21").code == 1);
}

TEST_CASE("closure with one all-covering tree reproduces Lloyd") {
    TempDir dir;
    REQUIRE(ckm_cli("gen --k-true 8 --n 800 --d 3 --sigma 1.5 --out " + q(dir / "g.fvecs")).code == 0);
    const std::string common = "train --input " + q(dir / "g.fvecs") + " --k 12 --seed 4 ";
    const Result closure =
        ckm_cli(common + "--algo closure --bucket-size 800 --max-trees 1 --out-history " + q(dir / "c.csv"));
    const Result lloyd = ckm_cli(common + "--algo lloyd --out-history " + q(dir / "l.csv"));
    REQUIRE(closure.code == 0);
    REQUIRE(lloyd.code == 0);
    auto c = fields(closure.out), l = fields(lloyd.out);
    CHECK(c["wcssd"] == l["wcssd"]);
    CHECK(c["iterations"] == l["iterations"]);
    CHECK(c["algo"] == "closure");
    CHECK(l["algo"] == "lloyd");

    const auto hc = ckm::read_history_csv(dir / "c.csv");
    const auto hl = ckm::read_history_csv(dir / "l.csv");
    REQUIRE(hc.size() == hl.size());
    for (std::size_t t = 0; t < hc.size(); ++t) CHECK(hc[t].wcssd == hl[t].wcssd);
}

TEST_CASE("zero iterations write a single history row") {
    TempDir dir;
    REQUIRE(ckm_cli("gen --k-true 3 --n 100 --d 2 --out " + q(dir / "g.csv")).code == 0);
    const Result r = ckm_cli("train --input " + q(dir / "g.csv") + " --k 3 --max-iters 0 --out-history " +
                             q(dir / "h.csv"));
    REQUIRE(r.code == 0);
    CHECK(fields(r.out)["iterations"] == "0");
    CHECK(ckm::read_history_csv(dir / "h.csv").size() == 1);
}

TEST_CASE("eval reproduces the training WCSSD and reports NMI") {
    TempDir dir;
    REQUIRE(ckm_cli("gen --k-true 4 --n 400 --d 8 --sigma 0.2 --out " + q(dir / "g.fvecs")).code == 0);
    const Result train = ckm_cli("train --input " + q(dir / "g.fvecs") + " --k 4 --out-model " + q(dir / "m.ckm"));
    REQUIRE(train.code == 0);
    const Result eval = ckm_cli("eval --input " + q(dir / "g.fvecs") + " --model " + q(dir / "m.ckm") +
                                " --labels " + q(dir / "g.labels"));
    REQUIRE(eval.code == 0);
    auto e = fields(eval.out);
    CHECK(e["n"] == "400");
    CHECK(e["d"] == "8");
    CHECK(e["k"] == "4");
    CHECK(std::stod(e["wcssd"]) == doctest::Approx(std::stod(fields(train.out)["wcssd"])).epsilon(1e-9));
    const double nmi = std::stod(e["nmi"]);
    CHECK(nmi >= 0.0);
    CHECK(nmi <= 1.0);

    REQUIRE(ckm_cli("gen --k-true 4 --n 10 --d 8 --out " + q(dir / "small.fvecs")).code == 0);
    CHECK(ckm_cli("eval --input " + q(dir / "small.fvecs") + " --model " + q(dir / "m.ckm")).code == 1);
}

TEST_CASE("diagnose writes both curves with non-decreasing recall") {
    TempDir dir;
    REQUIRE(ckm_cli("gen --k-true 10 --n 2000 --d 6 --sigma 1.5 --out " + q(dir / "g.fvecs")).code == 0);
    const Result r = ckm_cli("diagnose --input " + q(dir / "g.fvecs") + " --k 20 --trees-range 1..4 --out-dir " +
                             q(dir / "out"));
    REQUIRE(r.code == 0);
    CHECK(std::filesystem::exists(dir / "out" / "distance_ratio_histogram.csv"));
    std::ifstream in(dir / "out" / "closure_recall.csv");
    std::string line;
    std::getline(in, line);
    CHECK(line == "trees,mean_neighborhood_size,max_neighborhood_size,recall");
    double previous = -1.0;
    int rows = 0;
    while (std::getline(in, line)) {
        const double recall = std::stod(line.substr(line.rfind(',') + 1));
        CHECK(recall >= previous);
        previous = recall;
        ++rows;
    }
    CHECK(rows == 4);
    CHECK(ckm_cli("diagnose --input " + q(dir / "g.fvecs") + " --k 20 --trees-range 3..x --out-dir " +
                  q(dir / "o2"))
              .code == 2);
}
