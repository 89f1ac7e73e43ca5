#include "doctest.h"

#include "spectemp/errors.hpp"
#include "spectemp/harness.hpp"

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;
using namespace spectemp;
using namespace spectemp::harness;
using nlohmann::json;

namespace {

const fs::path kScratch = fs::temp_directory_path() / "spectemp_cli_tests";

int run_cli(const std::string& args) {
    fs::create_directories(kScratch);
    const std::string cmd = std::string(SPECTEMP_CLI) + ' ' + args + " > " + (kScratch / "stdout.txt").string() +
                            " 2> " + (kScratch / "stderr.txt").string();
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

fs::path write_file(const std::string& name, const std::string& text) {
    fs::create_directories(kScratch);
    const fs::path p = kScratch / name;
    std::ofstream(p) << text;
    return p;
}

int count_lines(const fs::path& p) {
    const std::string s = slurp(p);
    return static_cast<int>(std::count(s.begin(), s.end(), '\n'));
}

const char* kFastTrain = " --set train.epochs=3 --set data.periods=6 --set data.nodes=4";

} // namespace

TEST_CASE("exit codes") {
    CHECK(run_cli("train") == kUsage);
    CHECK(run_cli("") == kUsage);
    CHECK(run_cli("bogus --config configs/train_seasonal.json") == kUsage);
    CHECK(run_cli("train --config /nonexistent/config.json --out " + (kScratch / "x").string()) == kUsage);
    const auto broken = write_file("broken.json", "{ not json");
    CHECK(run_cli("train --config " + broken.string() + " --out " + (kScratch / "x").string()) == kUsage);
    CHECK(run_cli("ablate --config configs/ablate.json --set ablate.axis=colour --out " + (kScratch / "x").string()) ==
          kUsage);
    CHECK(slurp(kScratch / "stderr.txt").find("basis") != std::string::npos);
    CHECK(run_cli("train --config configs/train_seasonal.json --set model.degree=-2 --out " +
                  (kScratch / "x").string()) == kUsage);

    const auto bad_csv = write_file("bad.csv", "1,2,3\n4,5\n");
    CHECK(run_cli("train --config configs/train_seasonal.json --set data.source=csv --set data.path=" +
                  bad_csv.string() + " --out " + (kScratch / "x").string()) == kDataError);
    CHECK(slurp(kScratch / "stderr.txt").find("line 2") != std::string::npos);
    const auto bad_dtdg = write_file("bad.dtdg", "3 1\n0 9\n#\n");
    CHECK(run_cli("twl --config configs/twl.json --set twl.graphs=[\\\"" + bad_dtdg.string() + "\\\"] --out " +
                  (kScratch / "x").string()) == kDataError);
    CHECK(run_cli("--help") == kOk);
}

TEST_CASE("train is reproducible and writes its artifacts") {
    const fs::path a = kScratch / "train_a", b = kScratch / "train_b";
    fs::remove_all(a);
    fs::remove_all(b);
    REQUIRE(run_cli("train --config configs/train_seasonal.json --seed 7 --out " + a.string() + kFastTrain) == kOk);
    REQUIRE(run_cli("train --config configs/train_seasonal.json --seed 7 --out " + b.string() + kFastTrain) == kOk);
    for (const char* f : {"model.ckpt", "history.csv", "metrics.json", "normalizer.json", "dataset.json", "manifest.json"})
        CHECK(fs::exists(a / f));
    CHECK(slurp(a / "metrics.json") == slurp(b / "metrics.json"));
    const json metrics = json::parse(slurp(a / "metrics.json"));
    CHECK(metrics.at("seed") == 7);
    CHECK(metrics.at("mae").get<double>() > 0.0);
    CHECK(metrics.at("rmse").get<double>() >= metrics.at("mae").get<double>());
    CHECK(count_lines(a / "history.csv") == 1 + metrics.at("epochs_run").get<int>());

    const json manifest = json::parse(slurp(a / "manifest.json"));
    CHECK(manifest.at("seed") == 7);
    CHECK(manifest.at("command") == "train");
    CHECK(manifest.at("config").at("train").at("epochs") == 3);
    CHECK(manifest.at("config").at("model").contains("basis"));

    // Forecast from the saved checkpoint on a held-out style CSV.
    const auto input = write_file("forecast_in.csv", [] {
        std::ostringstream os;
        for (int n = 0; n < 4; ++n) {
            for (int t = 0; t < 30; ++t) os << (t ? "," : "") << std::sin(0.26 * t + n);
            os << '\n';
        }
        return os.str();
    }());
    const fs::path f = kScratch / "forecast";
    fs::remove_all(f);
    CHECK(run_cli("forecast --config configs/train_seasonal.json --set forecast.checkpoint=" + (a / "model.ckpt").string() +
                  " --set forecast.normalizer=" + (a / "normalizer.json").string() +
                  " --set forecast.input=" + input.string() + " --out " + f.string()) == kOk);
    CHECK(fs::exists(f / "forecast.csv"));
}

TEST_CASE("synth exports one embedding row per series") {
    const fs::path out = kScratch / "synth";
    fs::remove_all(out);
    REQUIRE(run_cli("synth --config configs/synth.json --seed 1 --out " + out.string() +
                    " --set synth.n_per_group=3 --set synth.length=200 --set synth.periods=10 --set train.epochs=2") ==
            kOk);
    CHECK(count_lines(out / "embedding_vectors_model.csv") == 1 + 6);
    CHECK(count_lines(out / "embedding_vectors_control.csv") == 1 + 6);
    CHECK(count_lines(out / "labels.csv") == 1 + 6);
    const json s = json::parse(slurp(out / "silhouette.json"));
    CHECK(s.contains("model"));
    CHECK(s.contains("control"));
    CHECK(slurp(out / "embeddings_model.csv").rfind("node_id,t,dim,value\n", 0) == 0);
}

TEST_CASE("twl reports the figure verdicts") {
    const fs::path out = kScratch / "twl";
    fs::remove_all(out);
    REQUIRE(run_cli("twl --config configs/twl.json --out " + out.string()) == kOk);
    const json r = json::parse(slurp(out / "twl.json"));
    REQUIRE(r.at("graphs").size() == 2);
    const auto& left = r["graphs"][0];
    const auto& right = r["graphs"][1];
    CHECK(left.at("time") == 1);
    bool ac_same = false;
    for (const auto& p : left.at("pairs"))
        if (p["u"] == 0 && p["v"] == 2) ac_same = !p["distinguishable"].get<bool>();
    CHECK(ac_same);
    for (const auto& p : right.at("pairs")) CHECK(p["distinguishable"].get<bool>());
    CHECK(left.at("self_test") == "inconclusive");
    CHECK(r.at("comparisons")[0].at("verdict") == "non-isomorphic");
    CHECK(fs::exists(out / "colors_fig5_left.csv"));
}

TEST_CASE("theory writes one convergence curve per basis") {
    const fs::path out = kScratch / "theory";
    fs::remove_all(out);
    REQUIRE(run_cli("theory --config configs/theory.json --out " + out.string() +
                    " --set theory.lemma.trials=20 --set theory.model_race=false --set data.periods=6") == kOk);
    const std::string csv = slurp(out / "convergence.csv");
    CHECK(csv.rfind("epoch,basis,train_loss\n", 0) == 0);
    for (const char* b : {"monomial", "bernstein", "chebyshev2", "gegenbauer", "jacobi"})
        CHECK(csv.find(std::string("\n0,") + b + ",") != std::string::npos);
    const json report = json::parse(slurp(out / "report.json"));
    CHECK(report.contains("lemma"));
    CHECK(fs::exists(out / "orthogonality.csv"));
    CHECK(fs::exists(out / "density.csv"));
}

TEST_CASE("config handling") {
    json cfg = {{"model", {{"degree", 3}}}};
    apply_overrides(cfg, {"model.degree=5", "model.basis=jacobi", "train.lr=0.01", "data.split=[0.7,0.2,0.1]"});
    CHECK(cfg["model"]["degree"] == 5);
    CHECK(cfg["model"]["basis"] == "jacobi");
    CHECK(cfg["train"]["lr"] == 0.01);
    CHECK(cfg["data"]["split"].size() == 3);
    CHECK_THROWS_AS(apply_overrides(cfg, {"novalue"}), ConfigError);
    CHECK_THROWS_AS(load_config(""), ConfigError);

    ExperimentSpec spec;
    spec.config_path = write_file("partial.json", R"({"model": {"degree": 2}})").string();
    spec.overrides = {"train.epochs=4"};
    const json eff = effective_config(spec);
    CHECK(eff["model"]["degree"] == 2);
    CHECK(eff["model"]["basis"] == default_config()["model"]["basis"]);
    CHECK(eff["train"]["epochs"] == 4);
}

TEST_CASE("ablation enumeration") {
    CHECK(ablation_variants("basis").size() == 5);
    CHECK(ablation_variants("design").size() == 7);
    CHECK(ablation_variants("addons").size() == 3);
    CHECK(ablation_variants("all").size() == 15);
    CHECK_THROWS_AS(ablation_variants("colour"), ConfigError);
}

TEST_CASE("orthogonality report") {
    const auto rows = orthogonality_report(6, 1.0);
    REQUIRE(rows.size() == 5);
    for (const auto& r : rows) {
        CAPTURE(r.basis);
        const bool expect = r.basis != "monomial" && r.basis != "bernstein";
        CHECK(r.orthogonal == expect);
    }
}

TEST_CASE("silhouette") {
    Matrix pts(4, 1);
    pts << 0, 1, 10, 11;
    // a = 1, b = mean distance to the other cluster.
    const double s0 = 1.0 - 1.0 / 10.5;
    const double s1 = 1.0 - 1.0 / 9.5;
    CHECK(silhouette(pts, {0, 0, 1, 1}) == doctest::Approx((s0 + s1) / 2.0));
    Matrix three(3, 1);
    three << 0, 1, 5;
    // The singleton point scores 0.
    CHECK(silhouette(three, {0, 0, 1}) == doctest::Approx((0.8 + 0.75) / 3.0));
    CHECK(silhouette(pts, {1, 0, 1, 0}) < 0.0);
    CHECK_THROWS_AS(silhouette(pts, {0, 0, 0, 0}), ParameterError);
    CHECK_THROWS_AS(silhouette(pts, {0, 1}), ShapeError);
}
