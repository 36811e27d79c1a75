#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "critbatch/cli.hpp"
#include "critbatch/io.hpp"

using namespace critbatch;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& tag) {
    const fs::path p = fs::temp_directory_path() / ("critbatch_test_" + tag);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

const char* kTheoryConfig = R"({
  "epsilon": 0.1,
  "methods": ["sgd"],
  "triples": {"sgd": [100.0, 10.0, 0.05]}
})";

const char* kSweepConfig = R"({
  "problem": {"kind":"noisy_quadratic","n":64,"d":1,"seed":3,"params":{"curvature_min":1.0}},
  "optimizer": {"method":"sgd","alpha":0.1,"beta1":0.9,"beta2":0.999,"delta":1e-8,
                "amsgrad":false,"momentum_bias_correction":false},
  "batch_grid": [1, 2, 4],
  "threshold": 0.005,
  "max_epochs": 200,
  "eval_every": 1,
  "seeds": [1, 2],
  "oracle_mode": "controlled",
  "sigma2": 0.0,
  "theta0": [1.0]
})";

}  // namespace

TEST_CASE("cmd_theory emits the summary and a zero-derivative row at b_star") {
    const auto dir = fresh_dir("theory");
    write_file((dir / "config.json").string(), kTheoryConfig);
    TheoryOptions opt{(dir / "config.json").string(), dir.string()};
    CHECK(cmd_theory(opt) == kExitOk);

    const json summary = json::parse(read_file((dir / "summary.json").string()));
    CHECK(summary.at("methods").at("sgd").at("b_star").get<double>() ==
          doctest::Approx(400.0).epsilon(1e-12));
    CHECK(summary.at("methods").at("sgd").at("sfo_at_b_star").get<double>() ==
          doctest::Approx(1.6e6).epsilon(1e-9));

    // find the curve row at b = b_star and check the stationarity of sfo there
    const std::string curves = read_file((dir / "curves.csv").string());
    bool found = false;
    std::istringstream in(curves);
    std::string line;
    std::getline(in, line);
    CHECK(line == "method,b,k,sfo,dk_db,dsfo_db");
    while (std::getline(in, line)) {
        const auto f = split_csv_line(line);
        REQUIRE(f.size() == 6);
        const double b = parse_double(f[1]);
        if (std::abs(b - 400.0) < 1e-9) {
            found = true;
            CHECK(std::abs(parse_double(f[5])) <= 1e-9);
            CHECK(parse_double(f[2]) == doctest::Approx(4000.0).epsilon(1e-12));
        }
    }
    CHECK(found);

    const json manifest = json::parse(read_file((dir / "manifest.json").string()));
    CHECK(manifest.at("command") == "theory");
    CHECK(manifest.at("output_paths").size() == 3);
}

TEST_CASE("cmd_theory reports infeasible epsilon per method") {
    const auto dir = fresh_dir("theory_infeasible");
    write_file((dir / "config.json").string(),
               R"({"epsilon": 0.05, "methods": ["sgd"], "triples": {"sgd": [100.0,10.0,0.05]}})");
    TheoryOptions opt{(dir / "config.json").string(), dir.string()};
    CHECK(cmd_theory(opt) == kExitInfeasibleEpsilon);
    const json summary = json::parse(read_file((dir / "summary.json").string()));
    CHECK(summary.at("methods").at("sgd").at("error") == "infeasible_epsilon");
}

TEST_CASE("cmd_theory rejects malformed configs") {
    const auto dir = fresh_dir("theory_bad");
    write_file((dir / "config.json").string(), R"({"methods": ["sgd"]})");
    TheoryOptions opt{(dir / "config.json").string(), dir.string()};
    CHECK(cmd_theory(opt) == kExitConfigError);
}

TEST_CASE("cmd_sweep writes the pinned csv schema and is byte-reproducible") {
    setenv("SOURCE_DATE_EPOCH", "1700000000", 1);
    const auto dir1 = fresh_dir("sweep1");
    const auto dir2 = fresh_dir("sweep2");
    write_file((dir1 / "config.json").string(), kSweepConfig);

    SweepOptions opt;
    opt.config_path = (dir1 / "config.json").string();
    opt.out_dir = dir1.string();
    CHECK(cmd_sweep(opt) == kExitOk);

    const std::string csv = read_file((dir1 / "sweep.csv").string());
    const std::string manifest = read_file((dir1 / "manifest.json").string());
    CHECK(csv.rfind("method,batch_size,steps,sfo,final_loss,seed,status,wall_ms\n", 0) == 0);
    // 3 batch sizes x 2 seeds = 6 data rows
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 7);

    // rerun in place: byte-identical outputs including the manifest
    CHECK(cmd_sweep(opt) == kExitOk);
    CHECK(read_file((dir1 / "sweep.csv").string()) == csv);
    CHECK(read_file((dir1 / "manifest.json").string()) == manifest);

    // a run into a second directory reproduces the data files byte for byte
    opt.out_dir = dir2.string();
    CHECK(cmd_sweep(opt) == kExitOk);
    CHECK(read_file((dir2 / "sweep.csv").string()) == csv);
    CHECK(read_file((dir2 / "aggregate.csv").string()) ==
          read_file((dir1 / "aggregate.csv").string()));
    unsetenv("SOURCE_DATE_EPOCH");
}

TEST_CASE("cmd_sweep seed overrides take precedence") {
    const auto dir = fresh_dir("sweep_seeds");
    write_file((dir / "config.json").string(), kSweepConfig);
    SweepOptions opt;
    opt.config_path = (dir / "config.json").string();
    opt.out_dir = dir.string();
    opt.seeds = std::string("7,8,9");
    CHECK(cmd_sweep(opt) == kExitOk);
    const std::string csv = read_file((dir / "sweep.csv").string());
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 10);  // header + 3 b x 3 seeds
    CHECK(csv.find(",7,") != std::string::npos);
    CHECK(csv.find(",42,") == std::string::npos);
}

TEST_CASE("fit and report round trip through files") {
    const auto dir = fresh_dir("fitreport");
    // synthetic records straight from the model K = a b / (b - c)
    std::string csv = "method,batch_size,steps,sfo,final_loss,seed,status,wall_ms\n";
    for (const long b : {256L, 512L, 1024L, 2048L, 4096L}) {
        const double k = 2000.0 * static_cast<double>(b) / (static_cast<double>(b) - 200.0);
        const long ks = std::lround(k);
        csv += "sgd," + std::to_string(b) + "," + std::to_string(ks) + "," +
               std::to_string(ks * b) + ",0.099," + "1,reached,0\n";
    }
    write_file((dir / "sweep.csv").string(), csv);

    FitOptions fopt{(dir / "sweep.csv").string(), (dir / "fit.json").string()};
    CHECK(cmd_fit(fopt) == kExitOk);
    const json fitdoc = json::parse(read_file((dir / "fit.json").string()));
    CHECK(fitdoc.at("b_star").get<double>() == doctest::Approx(400.0).epsilon(0.01));
    CHECK(fitdoc.at("argmin_b").get<std::int64_t>() == 512);
    CHECK(fitdoc.at("degenerate").get<bool>() == false);

    // theory on the same explicit grid, then the merged report
    write_file((dir / "tconfig.json").string(),
               R"({"epsilon":0.1,"methods":["sgd"],"triples":{"sgd":[100.0,10.0,0.05]},)"
               R"("grid":[256,512,1024,2048,4096]})");
    TheoryOptions topt{(dir / "tconfig.json").string(), (dir / "theory").string()};
    CHECK(cmd_theory(topt) == kExitOk);

    ReportOptions ropt{(dir / "theory/summary.json").string(), (dir / "fit.json").string(),
                       (dir / "report.csv").string()};
    CHECK(cmd_report(ropt) == kExitOk);
    const std::string report = read_file((dir / "report.csv").string());
    std::istringstream in(report);
    std::string line;
    std::getline(in, line);
    CHECK(line == "b,k_measured,k_fitted,sfo_measured,sfo_fitted");
    int rows = 0;
    const double a = fitdoc.at("a").get<double>();
    const double c = fitdoc.at("c").get<double>();
    while (std::getline(in, line)) {
        ++rows;
        const auto f = split_csv_line(line);
        REQUIRE(f.size() == 5);
        const double b = parse_double(f[0]);
        const double fitted = parse_double(f[2]);
        CHECK(std::abs(fitted - a * b / (b - c)) <= 1e-12 * fitted);
        CHECK(parse_double(f[4]) == doctest::Approx(fitted * b).epsilon(1e-14));
    }
    CHECK(rows == 5);  // full grid intersection
}

TEST_CASE("degenerate fit exits with its own status code") {
    const auto dir = fresh_dir("fit_degenerate");
    std::string csv = "method,batch_size,steps,sfo,final_loss,seed,status,wall_ms\n";
    for (const long b : {8L, 16L, 32L, 64L})
        csv += "sgd," + std::to_string(b) + ",1000," + std::to_string(1000 * b) +
               ",0.09,1,reached,0\n";
    write_file((dir / "sweep.csv").string(), csv);
    FitOptions fopt{(dir / "sweep.csv").string(), (dir / "fit.json").string()};
    CHECK(cmd_fit(fopt) == kExitDegenerateFit);
    const json fitdoc = json::parse(read_file((dir / "fit.json").string()));
    CHECK(fitdoc.at("degenerate").get<bool>() == true);
}

TEST_CASE("fit rejects short or malformed inputs") {
    const auto dir = fresh_dir("fit_bad");
    write_file((dir / "short.csv").string(),
               "method,batch_size,steps,sfo,final_loss,seed,status,wall_ms\n"
               "sgd,2,10,20,0.1,1,reached,0\nsgd,4,6,24,0.1,1,reached,0\n");
    FitOptions fopt{(dir / "short.csv").string(), (dir / "fit.json").string()};
    CHECK(cmd_fit(fopt) == kExitConfigError);
    write_file((dir / "bad.csv").string(), "not,a,sweep\n");
    FitOptions fopt2{(dir / "bad.csv").string(), (dir / "fit.json").string()};
    CHECK(cmd_fit(fopt2) == kExitConfigError);
}

TEST_CASE("report on disjoint grids is an explicit error") {
    const auto dir = fresh_dir("report_disjoint");
    write_file((dir / "tconfig.json").string(),
               R"({"epsilon":0.1,"methods":["sgd"],"triples":{"sgd":[100.0,10.0,0.05]},)"
               R"("grid":[300,600,1200]})");
    TheoryOptions topt{(dir / "tconfig.json").string(), (dir / "theory").string()};
    CHECK(cmd_theory(topt) == kExitOk);

    std::string csv = "method,batch_size,steps,sfo,final_loss,seed,status,wall_ms\n";
    for (const long b : {256L, 512L, 1024L})
        csv += "sgd," + std::to_string(b) + ",100," + std::to_string(100 * b) +
               ",0.09,1,reached,0\n";
    write_file((dir / "sweep.csv").string(), csv);
    FitOptions fopt{(dir / "sweep.csv").string(), (dir / "fit.json").string()};
    CHECK(cmd_fit(fopt) == kExitDegenerateFit);  // flat data, still writes the file

    ReportOptions ropt{(dir / "theory/summary.json").string(), (dir / "fit.json").string(),
                       (dir / "report.csv").string()};
    CHECK(cmd_report(ropt) == kExitConfigError);
}

TEST_CASE("the installed binary wires the subcommands end to end") {
    const auto dir = fresh_dir("binary");
    write_file((dir / "config.json").string(), kTheoryConfig);
    const std::string cmd = std::string(CRITBATCH_BIN) + " theory --config " +
                            (dir / "config.json").string() + " --out " + dir.string() +
                            " >/dev/null 2>&1";
    CHECK(std::system(cmd.c_str()) == 0);
    CHECK(fs::exists(dir / "curves.csv"));
    CHECK(fs::exists(dir / "summary.json"));

    const std::string bad = std::string(CRITBATCH_BIN) + " theory --config /nonexistent.json"
                            " --out " + dir.string() + " >/dev/null 2>&1";
    const int rc = std::system(bad.c_str());
    CHECK(WEXITSTATUS(rc) == kExitConfigError);
}

TEST_CASE("CRITBATCH_SEED overrides config seeds, CLI flag overrides both") {
    const auto dir = fresh_dir("sweep_env");
    write_file((dir / "config.json").string(), kSweepConfig);
    setenv("CRITBATCH_SEED", "21,22", 1);

    SweepOptions opt;
    opt.config_path = (dir / "config.json").string();
    opt.out_dir = dir.string();
    CHECK(cmd_sweep(opt) == kExitOk);
    std::string csv = read_file((dir / "sweep.csv").string());
    CHECK(csv.find(",21,reached") != std::string::npos);
    CHECK(csv.find(",1,reached") == std::string::npos);

    opt.seeds = std::string("31");
    CHECK(cmd_sweep(opt) == kExitOk);
    csv = read_file((dir / "sweep.csv").string());
    CHECK(csv.find(",31,reached") != std::string::npos);
    CHECK(csv.find(",21,reached") == std::string::npos);
    unsetenv("CRITBATCH_SEED");
}
