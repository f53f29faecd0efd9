// Copyright 2026 The sparseflow authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <catch2/catch_amalgamated.hpp>
#include <fstream>

#include "sparseflow/cli/commands.hpp"
#include "test_helpers.hpp"

using namespace sparseflow;

namespace {

int call_cli(const std::vector<std::string>& args) {
    std::vector<const char*> argv = {"sparseflow"};
    for (const auto& a : args) argv.push_back(a.c_str());
    return cli::run_cli(static_cast<int>(argv.size()), argv.data());
}

int count_lines(const std::filesystem::path& p) {
    std::ifstream in(p);
    int n = 0;
    std::string line;
    while (std::getline(in, line)) ++n;
    return n;
}

// one tiny dataset shared by the CLI cases (generation is the slow part)
struct CliFixture {
    sftest::TempDir tmp{"cli"};
    std::filesystem::path data;
    CliFixture() : data(tmp.path / "ds") {
        REQUIRE(call_cli({"generate", "--out", data.string(), "--seed", "3", "--geometries", "3", "--runs", "3",
                          "--folds", "3", "--steps", "80"}) == 0);
    }
};

}  // namespace

TEST_CASE("generate writes a validating dataset and is idempotent under seed", "[cli][generate]") {
    sftest::TempDir tmp("cli_gen");
    const auto d1 = (tmp.path / "a").string();
    const auto d2 = (tmp.path / "b").string();
    std::vector<std::string> args = {"generate", "--out", d1,      "--seed",  "9", "--geometries", "3",
                                     "--runs",   "4",     "--folds", "3",     "--steps", "60"};
    REQUIRE(call_cli(args) == 0);
    args[2] = d2;
    REQUIRE(call_cli(args) == 0);

    auto m1 = load_manifest(std::filesystem::path(d1) / "manifest.json");
    CHECK_NOTHROW(validate_manifest(m1, d1));
    CHECK(m1.runs.size() == 4);
    CHECK(m1.geometries.size() == 3);
    CHECK(m1.folds.size() == 3);

    // byte-identical outputs under the same seed
    for (const auto& entry : std::filesystem::recursive_directory_iterator(d1)) {
        if (!entry.is_regular_file()) continue;
        const auto rel = std::filesystem::relative(entry.path(), d1);
        std::ifstream a(entry.path(), std::ios::binary), b(std::filesystem::path(d2) / rel, std::ios::binary);
        std::string sa((std::istreambuf_iterator<char>(a)), std::istreambuf_iterator<char>());
        std::string sb((std::istreambuf_iterator<char>(b)), std::istreambuf_iterator<char>());
        REQUIRE(sa == sb);
    }
}

TEST_CASE("generate with a single geometry emits one sample and no folds", "[cli][generate]") {
    sftest::TempDir tmp("cli_gen1");
    const auto d = (tmp.path / "ds").string();
    REQUIRE(call_cli({"generate", "--out", d, "--seed", "1", "--geometries", "1", "--runs", "1", "--steps", "40"}) ==
            0);
    auto m = load_manifest(std::filesystem::path(d) / "manifest.json");
    CHECK(m.runs.size() == 1);
    CHECK(m.folds.empty());
}

TEST_CASE("train, resume and eval round the pipeline", "[cli][train][eval]") {
    CliFixture fx;
    const auto ck = [&](const std::string& c) { return (fx.tmp.path / ("ck_" + c + ".sfck")).string(); };

    SECTION("one epoch logs exactly one row; resume continues monotonically") {
        REQUIRE(call_cli({"train", "--data", fx.data.string(), "--out", ck("x"), "--component", "x", "--fold", "0",
                          "--epochs", "1", "--seed", "5"}) == 0);
        const auto log = ck("x") + ".metrics.csv";
        CHECK(count_lines(log) == 2);  // header + 1 epoch row

        REQUIRE(call_cli({"train", "--data", fx.data.string(), "--out", ck("x"), "--component", "x", "--fold", "0",
                          "--epochs", "2", "--seed", "5", "--resume"}) == 0);
        CHECK(count_lines(log) == 3);
        std::ifstream in(log);
        std::string header, r1, r2;
        std::getline(in, header);
        std::getline(in, r1);
        std::getline(in, r2);
        const int64_t s1 = std::stoll(r1.substr(r1.find(',') + 1));
        const int64_t s2 = std::stoll(r2.substr(r2.find(',') + 1));
        CHECK(s2 > s1);
    }

    SECTION("eval needs all three components for the magnitude row") {
        for (const std::string c : {"x", "y", "z"})
            REQUIRE(call_cli({"train", "--data", fx.data.string(), "--out", ck(c), "--component", c, "--fold", "0",
                              "--epochs", "1", "--seed", "5"}) == 0);
        const auto report = (fx.tmp.path / "report.csv").string();
        REQUIRE(call_cli({"eval", "--data", fx.data.string(), "--fold", "0", "--ckpt-x", ck("x"), "--ckpt-y", ck("y"),
                          "--ckpt-z", ck("z"), "--out", report}) == 0);
        CHECK(count_lines(report) == 5);  // header + x,y,z,magnitude

        const auto partial = (fx.tmp.path / "partial.csv").string();
        REQUIRE(call_cli({"eval", "--data", fx.data.string(), "--fold", "0", "--ckpt-x", ck("x"), "--out", partial}) ==
                0);
        CHECK(count_lines(partial) == 2);  // magnitude omitted with a warning
    }

    SECTION("checkpoints from a different configuration are refused") {
        REQUIRE(call_cli({"train", "--data", fx.data.string(), "--out", ck("x"), "--component", "x", "--fold", "0",
                          "--epochs", "1", "--seed", "5"}) == 0);
        CHECK(call_cli({"train", "--data", fx.data.string(), "--out", ck("x"), "--component", "y", "--fold", "0",
                        "--epochs", "2", "--seed", "5", "--resume"}) == cli::kExitData);
    }
}

TEST_CASE("ablate emits the table-shaped CSV", "[cli][ablate]") {
    CliFixture fx;
    const auto report = (fx.tmp.path / "ablate.csv").string();
    REQUIRE(call_cli({"ablate", "--data", fx.data.string(), "--out", report, "--suite", "skip", "--seeds", "4",
                      "--epochs", "1", "--batch", "1"}) == 0);
    CHECK(count_lines(report) == 7);  // header + 3 components x 2 settings
}

TEST_CASE("exit codes follow the documented contract", "[cli][errors]") {
    sftest::TempDir tmp("cli_err");
    SECTION("usage errors exit 1") {
        CHECK(call_cli({"definitely-not-a-subcommand"}) == cli::kExitUsage);
        CHECK(call_cli({"train", "--out", "x.sfck"}) == cli::kExitUsage);  // missing --data
    }
    SECTION("missing dataset exits 2 naming the manifest") {
        CHECK(call_cli({"train", "--data", (tmp.path / "nope").string(), "--out", (tmp.path / "c.sfck").string()}) ==
              cli::kExitData);
    }
    SECTION("selfcheck exits 0, injected fault exits 3") {
        std::ostringstream sink;
        CHECK(cli::selfcheck_run(sink, false));
        CHECK_FALSE(cli::selfcheck_run(sink, true));
    }
}
