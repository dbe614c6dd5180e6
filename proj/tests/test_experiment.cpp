// Copyright 2026 The sdlr Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "sdlr/experiment.hpp"

using namespace sdlr;
namespace fs = std::filesystem;

namespace {

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("sdlr_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string field_of(const std::string& text) {
  try {
    parse_config_text(text);
  } catch (const ConfigError& e) {
    return e.field();
  }
  return "";
}

ExperimentConfig small_gbm() {
  ExperimentConfig c = default_config(ExperimentKind::gbm);
  c.n = 8;
  c.ranks = {1, 3};
  c.samples = 600;
  c.dt = 0.01;
  c.horizon = 0.2;
  c.initial_rank = 3;
  return c;
}

}  // namespace

TEST(Config, DefaultsFollowExperiment) {
  const ExperimentConfig c = parse_config_text(R"({"experiment": "oscillator"})");
  EXPECT_EQ(c.n, 21);
  EXPECT_DOUBLE_EQ(c.dt, 1.0 / 500.0);
  EXPECT_DOUBLE_EQ(c.gamma1, 0.2);
  EXPECT_EQ(c.spectrum_k, 5);
  const ExperimentConfig b = parse_config_text(R"({"experiment": "burgers"})");
  EXPECT_EQ(b.n, 21);
  EXPECT_DOUBLE_EQ(b.nu, 0.01);
  EXPECT_DOUBLE_EQ(b.gamma, 0.1);
}

TEST(Config, ErrorsNameTheField) {
  EXPECT_EQ(field_of(R"({"experiment": "gbm", "dt": 0})"), "config.dt");
  EXPECT_EQ(field_of(R"({"experiment": "gbm", "T": -1})"), "config.T");
  EXPECT_EQ(field_of(R"({"experiment": "gbm", "samples": 0})"), "config.samples");
  EXPECT_EQ(field_of(R"({"experiment": "gbm", "ranks": [1, 21]})"), "config.ranks[1]");
  EXPECT_EQ(field_of(R"({"experiment": "gbm", "ranks": [1, "x"]})"), "config.ranks[1]");
  EXPECT_EQ(field_of(R"({"experiment": "gbm", "methods": ["sdlr", "foo"]})"),
            "config.methods[1]");
  EXPECT_EQ(field_of(R"({"experiment": "gbm", "methods": ["lindblad_ref"]})"),
            "config.methods[0]");
  EXPECT_EQ(field_of(R"({"experiment": "gbm", "bogus": 1})"), "config.bogus");
  EXPECT_EQ(field_of(R"({"experiment": "nope"})"), "config.experiment");
  EXPECT_EQ(field_of(R"({"n": 3})"), "config.experiment");
  EXPECT_EQ(field_of(R"({"experiment": "burgers", "n": 20})"), "config.n");
  EXPECT_EQ(field_of(R"({"experiment": "oscillator", "unraveling": "x"})"), "config.unraveling");
  EXPECT_EQ(field_of(R"({"experiment": "oscillator", "gamma1": -0.1})"), "config.gamma1");
  EXPECT_EQ(field_of(R"({"experiment": "custom-linear", "n": 2, "ranks": [1], "initial_rank": 1})"), "config.lambda_real");
  EXPECT_EQ(field_of(R"([1, 2])"), "config");
  EXPECT_EQ(field_of(R"({"experiment": )"), "config");
}

TEST(Config, AliasesForListFields) {
  const ExperimentConfig c =
      parse_config_text(R"({"experiment": "gbm", "rank_list": [2], "method_list": ["do"]})");
  ASSERT_EQ(c.ranks.size(), 1u);
  EXPECT_EQ(c.ranks[0], 2);
  ASSERT_EQ(c.methods.size(), 1u);
  EXPECT_EQ(c.methods[0], Method::do_method);
}

TEST(Config, SerializationRoundTripIsIdempotent) {
  for (const char* text :
       {R"({"experiment": "gbm", "seed": 18446744073709551615, "dt": 0.1})",
        R"({"experiment": "burgers", "n": 11, "ranks": [2, 3]})",
        R"({"experiment": "oscillator", "unraveling": "qsd", "methods": ["sdlr", "lowrank_qme"]})",
        R"({"experiment": "custom-linear", "n": 2, "lambda_real": [-1, 0, 0, -1],
            "theta_real": [0.1, 0, 0, 0.1], "ranks": [1], "initial_rank": 2})"}) {
    const nlohmann::json once = to_json(parse_config_text(text));
    const nlohmann::json twice = to_json(parse_config(once));
    EXPECT_EQ(once, twice) << text;
  }
  EXPECT_EQ(parse_config_text(R"({"experiment": "gbm", "seed": 18446744073709551615})").seed,
            18446744073709551615ULL);
}

TEST(Csv, HeaderOnlyForEmptyRecords) {
  const fs::path dir = scratch("empty");
  write_csv({}, dir / "x.csv", 3);
  EXPECT_EQ(read_file(dir / "x.csv"),
            "t,rel_err_mean,rel_err_second,eig1,eig2,eig3,residual_eps_sq,trace,gronwall_bound\n");
}

TEST(Csv, SeventeenDigitRoundTrip) {
  const fs::path dir = scratch("roundtrip");
  TrajectoryRecord r;
  r.t = 0.1;
  r.rel_err_mean = 1.0 / 3.0;
  r.rel_err_second = std::numeric_limits<double>::infinity();
  r.top_eigs = {std::nextafter(1.0, 2.0), 1e-300};
  r.residual_eps_sq = 5e-324;
  r.trace = -0.0;
  TrajectoryRecord s = r;
  s.t = 0.2;
  s.gronwall_bound = 2.0 / 7.0;
  write_csv({r, s}, dir / "r.csv", 2);
  std::istringstream in(read_file(dir / "r.csv"));
  std::string line;
  std::getline(in, line);
  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    rows.push_back(cells);
  }
  ASSERT_EQ(rows.size(), 2u);
  ASSERT_EQ(rows[0].size(), 8u);
  EXPECT_EQ(std::strtod(rows[0][1].c_str(), nullptr), r.rel_err_mean);
  EXPECT_TRUE(std::isinf(std::strtod(rows[0][2].c_str(), nullptr)));
  EXPECT_EQ(std::strtod(rows[0][3].c_str(), nullptr), r.top_eigs[0]);
  EXPECT_EQ(std::strtod(rows[0][4].c_str(), nullptr), r.top_eigs[1]);
  EXPECT_EQ(std::strtod(rows[0][5].c_str(), nullptr), r.residual_eps_sq);
  EXPECT_EQ(rows[0][7], "");
  EXPECT_EQ(std::strtod(rows[1][7].c_str(), nullptr), *s.gronwall_bound);
}

TEST(Csv, MismatchedEigenvalueCountAndBadPath) {
  TrajectoryRecord r;
  r.top_eigs = {1.0};
  const fs::path dir = scratch("bad");
  EXPECT_THROW(write_csv({r}, dir / "a.csv", 2), DimensionError);
  try {
    write_csv({}, dir / "missing" / "a.csv", 2);
    FAIL() << "expected Error";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("missing"), std::string::npos);
  }
}

TEST(RunExperiment, GbmEmitsRankLabelledFiles) {
  ExperimentConfig c = small_gbm();
  const ExperimentResult res = run_experiment(c);
  const fs::path dir = scratch("gbm");
  write_experiment(res, dir);
  for (const char* f : {"sdlr_r1.csv", "sdlr_r3.csv", "do_r1.csv", "do_r3.csv", "metadata.json"}) {
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  }
  const RunOutput* run = res.find(Method::sdlr, 3);
  ASSERT_NE(run, nullptr);
  EXPECT_FALSE(run->error);
  // Records at t = 0, every stride and the final time, strictly increasing.
  ASSERT_GE(run->records.size(), 2u);
  for (std::size_t i = 1; i < run->records.size(); ++i) {
    EXPECT_GT(run->records[i].t, run->records[i - 1].t);
  }
  EXPECT_NEAR(run->records.back().t, 0.2, 1e-12);
  EXPECT_TRUE(run->records.front().gronwall_bound.has_value());
  // Rank 3 captures the rank-3 initial law exactly.
  EXPECT_LT(run->records.front().rel_err_second, 0.1);
  EXPECT_LT(run->records.back().rel_err_second, res.find(Method::sdlr, 1)->records.back().rel_err_second);
}

TEST(RunExperiment, DeterministicAcrossWorkerCounts) {
  const ExperimentConfig c = small_gbm();
  std::string out[2];
  const char* threads[2] = {"1", "3"};
  for (int k = 0; k < 2; ++k) {
    ::setenv("SDLR_THREADS", threads[k], 1);
    const fs::path dir = scratch(std::string("det") + threads[k]);
    write_experiment(run_experiment(c), dir);
    out[k] = read_file(dir / "sdlr_r3.csv") + read_file(dir / "do_r3.csv");
  }
  ::unsetenv("SDLR_THREADS");
  EXPECT_EQ(out[0], out[1]);
}

TEST(RunExperiment, OscillatorQsdReportsUndefinedMean) {
  ExperimentConfig c = default_config(ExperimentKind::oscillator);
  c.n = 6;
  c.ranks = {3};
  c.samples = 300;
  c.horizon = 0.1;
  c.dt = 0.01;
  c.initial_rank = 3;
  c.unraveling = Unraveling::qsd;
  c.methods = {Method::sdlr, Method::lindblad_ref};
  const ExperimentResult res = run_experiment(c);
  const RunOutput* run = res.find(Method::sdlr, 3);
  ASSERT_NE(run, nullptr);
  EXPECT_TRUE(std::isinf(run->records.back().rel_err_mean));
  EXPECT_TRUE(std::isfinite(run->records.back().rel_err_second));
  const RunOutput* ref = res.find(Method::lindblad_ref, 6);
  ASSERT_NE(ref, nullptr);
  EXPECT_EQ(ref->records.back().rel_err_second, 0.0);
  EXPECT_NEAR(ref->records.back().trace, 1.0, 1e-8);
}

TEST(RunExperiment, SingularityBecomesErrorRecord) {
  ExperimentConfig c = default_config(ExperimentKind::oscillator);
  c.n = 6;
  c.ranks = {2, 4};
  c.samples = 100;
  c.horizon = 0.05;
  c.dt = 0.01;
  c.initial_rank = 3;
  c.methods = {Method::lowrank_qme};
  const ExperimentResult res = run_experiment(c);
  EXPECT_FALSE(res.find(Method::lowrank_qme, 2)->error);
  // A rank-4 frame on a rank-3 initial density has a singular sigma.
  ASSERT_TRUE(res.find(Method::lowrank_qme, 4)->error);
  EXPECT_TRUE(res.metadata["errors"].contains("lowrank_qme_r4"));
}

TEST(ListExperiments, AllKindsPresent) {
  const auto list = list_experiments();
  ASSERT_EQ(list.size(), 4u);
  EXPECT_STREQ(list[3].name, "custom-linear");
}
