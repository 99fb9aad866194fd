#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "helpers.hpp"
#include "sfde/io.hpp"

namespace fs = std::filesystem;

namespace {

struct RunResult {
    int exit_code = -1;
    std::string output;  // stdout + stderr
};

RunResult run_cli(const std::string& args, const fs::path& cwd) {
    const fs::path log = cwd / "cli_output.log";
    const std::string command = "cd '" + cwd.string() + "' && '" + SFDE_CLI_PATH + "' " + args +
                                " > '" + log.string() + "' 2>&1";
    const int raw = std::system(command.c_str());
    RunResult result;
    result.exit_code = (raw >= 0) ? ((raw >> 8) & 0xff) : raw;
    std::ifstream in(log);
    std::ostringstream buf;
    buf << in.rdbuf();
    result.output = buf.str();
    return result;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

int count_data_rows(const std::string& csv) {
    int lines = 0;
    for (char c : csv) {
        if (c == '\n') {
            ++lines;
        }
    }
    return lines - 2;  // metadata comment + column header
}

class TempDir {
  public:
    TempDir() {
        dir_ = fs::temp_directory_path() /
               ("sfde_cli_test_" + std::to_string(::getpid()) + "_" +
                std::to_string(counter_++));
        fs::create_directories(dir_);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(dir_, ec);
    }
    const fs::path& path() const { return dir_; }

  private:
    fs::path dir_;
    static inline int counter_ = 0;
};

void write_file(const fs::path& p, const std::string& text) {
    std::ofstream out(p);
    out << text;
}

const char* base_config = R"({
  "model": "benchmark2d",
  "theta_true": [1.0, 2.0, 3.0, 4.0],
  "simulate": {"n": 100, "epsilon": 0.1, "seed": 42},
  "montecarlo": {
    "grid": [{"n": 50, "epsilon": 0.1}],
    "replications": 2,
    "master_seed": 7,
    "estimator": "closed_form"
  },
  "output_dir": "out",
  "workers": 1
})";

} // namespace

TEST_CASE("simulate writes the full grid and is byte-stable", "[cli]") {
    TempDir tmp;
    write_file(tmp.path() / "config.json", base_config);

    const auto first = run_cli("simulate --config config.json", tmp.path());
    INFO(first.output);
    REQUIRE(first.exit_code == 0);
    const auto csv1 = slurp(tmp.path() / "out" / "path.csv");
    REQUIRE(count_data_rows(csv1) == 10 + 100 + 1);

    const auto second = run_cli("simulate --config config.json --out out2", tmp.path());
    REQUIRE(second.exit_code == 0);
    REQUIRE(slurp(tmp.path() / "out2" / "path.csv") == csv1);

    REQUIRE(fs::exists(tmp.path() / "out" / "manifest"));
}

TEST_CASE("missing config keys are reported with exit 2", "[cli]") {
    TempDir tmp;
    write_file(tmp.path() / "config.json",
               R"({"model": "benchmark2d", "theta_true": [1,2,3,4],
                   "simulate": {"n": 100, "seed": 42}})");
    const auto result = run_cli("simulate --config config.json", tmp.path());
    REQUIRE(result.exit_code == 2);
    REQUIRE(result.output.find("epsilon") != std::string::npos);

    write_file(tmp.path() / "bad_key.json",
               R"({"model": "benchmark2d", "theta_true": [1,2,3,4], "simulat": {}})");
    const auto unknown = run_cli("simulate --config bad_key.json", tmp.path());
    REQUIRE(unknown.exit_code == 2);
    REQUIRE(unknown.output.find("simulat") != std::string::npos);
}

TEST_CASE("estimate consumes simulate output", "[cli]") {
    TempDir tmp;
    write_file(tmp.path() / "config.json", base_config);
    REQUIRE(run_cli("simulate --config config.json", tmp.path()).exit_code == 0);

    SECTION("closed form and optimizer agree on the same file") {
        const auto closed = run_cli("estimate out/path.csv --config config.json", tmp.path());
        INFO(closed.output);
        REQUIRE(closed.exit_code == 0);
        const auto optimizer = run_cli(
            "estimate out/path.csv --config config.json --estimator optimizer --out out_opt",
            tmp.path());
        REQUIRE(optimizer.exit_code == 0);

        auto parse_row = [](const std::string& text) {
            std::istringstream in(text);
            std::string header, row;
            std::getline(in, header);
            std::getline(in, row);
            std::vector<double> values;
            std::istringstream cells(row);
            std::string cell;
            for (int i = 0; i < 4; ++i) {
                std::getline(cells, cell, ',');
                values.push_back(std::stod(cell));
            }
            return values;
        };
        const auto a = parse_row(slurp(tmp.path() / "out" / "estimate.csv"));
        const auto b = parse_row(slurp(tmp.path() / "out_opt" / "estimate.csv"));
        for (int i = 0; i < 4; ++i) {
            REQUIRE(std::isfinite(a[i]));
            REQUIRE(a[i] >= 0.1);
            REQUIRE(a[i] <= 10.0);
            REQUIRE(std::abs(a[i] - b[i]) <= 1e-4);
        }
    }
    SECTION("corrupted cells are rejected with the row named") {
        auto csv = slurp(tmp.path() / "out" / "path.csv");
        const auto pos = csv.rfind("\n", csv.size() - 2);
        csv = csv.substr(0, pos + 1) + "1,not_a_number,2\n";
        write_file(tmp.path() / "corrupt.csv", csv);
        const auto result = run_cli("estimate corrupt.csv --config config.json", tmp.path());
        REQUIRE(result.exit_code == 2);
        REQUIRE(result.output.find("row") != std::string::npos);
    }
    SECTION("metadata mismatch against the config is exit 2") {
        std::string other = base_config;
        const auto pos = other.find("\"n\": 100");
        other.replace(pos, 8, "\"n\": 120");
        write_file(tmp.path() / "other.json", other);
        const auto result = run_cli("estimate out/path.csv --config other.json", tmp.path());
        REQUIRE(result.exit_code == 2);
    }
}

TEST_CASE("montecarlo smoke run writes every artifact", "[cli]") {
    TempDir tmp;
    write_file(tmp.path() / "config.json", base_config);
    const auto result = run_cli("montecarlo --config config.json", tmp.path());
    INFO(result.output);
    REQUIRE(result.exit_code == 0);
    for (const char* name : {"summary.csv", "qq_normal_alpha1.csv", "qq_normal_alpha2.csv",
                             "qq_normal_beta1.csv", "qq_normal_beta2.csv", "qq_chi2.csv",
                             "chi2_samples.csv", "manifest"}) {
        REQUIRE(fs::exists(tmp.path() / "out" / name));
    }
    REQUIRE(result.output.find("alpha1") != std::string::npos);
}

TEST_CASE("montecarlo summaries are worker-count invariant", "[cli]") {
    TempDir tmp;
    write_file(tmp.path() / "config.json", base_config);
    const auto one = run_cli("montecarlo --config config.json --workers 1 --out w1", tmp.path());
    REQUIRE(one.exit_code == 0);
    const auto eight = run_cli("montecarlo --config config.json --workers 8 --out w8", tmp.path());
    REQUIRE(eight.exit_code == 0);
    REQUIRE(slurp(tmp.path() / "w1" / "summary.csv") == slurp(tmp.path() / "w8" / "summary.csv"));
    REQUIRE(slurp(tmp.path() / "w1" / "qq_chi2.csv") == slurp(tmp.path() / "w8" / "qq_chi2.csv"));
}

TEST_CASE("seed override changes the manifest and the data", "[cli]") {
    TempDir tmp;
    write_file(tmp.path() / "config.json", base_config);
    REQUIRE(run_cli("simulate --config config.json --seed 99 --out s99", tmp.path()).exit_code ==
            0);
    REQUIRE(run_cli("simulate --config config.json --out s42", tmp.path()).exit_code == 0);
    REQUIRE(slurp(tmp.path() / "s99" / "path.csv") != slurp(tmp.path() / "s42" / "path.csv"));
    REQUIRE(slurp(tmp.path() / "s99" / "manifest").find("master_seed=99") != std::string::npos);
}
