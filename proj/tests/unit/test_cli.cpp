#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "app.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / ("npv_cli_" + std::string(info->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path write_config(const json& doc, const std::string& name = "config.json") {
    const fs::path p = dir_ / name;
    std::ofstream(p) << doc.dump(2);
    return p;
  }

  int run(std::vector<std::string> args) {
    out_.str("");
    err_.str("");
    std::vector<const char*> argv{"npv"};
    for (const auto& a : args) argv.push_back(a.c_str());
    return npv::app::run(static_cast<int>(argv.size()), argv.data(), out_, err_);
  }

  static std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
  }

  static json read_json(const fs::path& p) { return json::parse(slurp(p)); }

  fs::path dir_;
  std::ostringstream out_, err_;
};

json case_study(const json& abstraction, const std::string& formula) {
  return {{"system", {{"builtin", "case_study_linear"}}},
          {"abstraction", abstraction},
          {"spec",
           {{"formula", formula},
            {"labels",
             {{"O", {{{"lo", {1.2, 1.6}}, {"hi", {2.0, 2.0}}}}}, {"D", {{{"lo", {0.0, 0.0}}, {"hi", {0.8, 0.4}}}}}}}}}};
}

}  // namespace

TEST_F(Cli, EstimateLcOnTheScalarLinearSystem) {
  const json doc = {{"seed", 1},
                    {"system", {{"builtin", "univariate_linear"}}},
                    {"lc", {{"n", 60000}, {"m", 10}, {"constants", {{"c_f", 1.0}, {"c_b1", 0.5}, {"c_b2", 0.5}}}}}};
  const auto cfg = write_config(doc);
  ASSERT_EQ(run({"estimate-lc", "--config", cfg.string(), "--out", (dir_ / "out").string()}), 0) << err_.str();
  const json rep = read_json(dir_ / "out" / "lc_report.json");
  const auto& r = rep["reports"][0];
  // 0.5 phi(1) = 0.12099
  EXPECT_LE(r["interval"][0].get<double>(), 0.1210);
  EXPECT_GE(r["interval"][1].get<double>(), 0.1210);
  EXPECT_TRUE(fs::exists(dir_ / "out" / "lc_summary.txt"));
}

TEST_F(Cli, MissingSmoothnessConstantIsAValidationError) {
  const json doc = {{"system", {{"builtin", "univariate_linear"}}}, {"lc", {{"n", 100}, {"constants", json::object()}}}};
  EXPECT_EQ(run({"estimate-lc", "--config", write_config(doc).string()}), 2);
  EXPECT_NE(err_.str().find("C_f"), std::string::npos) << err_.str();
  EXPECT_NE(err_.str().find("lc.constants.c_f"), std::string::npos) << err_.str();
}

TEST_F(Cli, UnknownKeysAndBadValuesNameTheirPath) {
  json doc = {{"system", {{"builtin", "case_study_linear"}}}, {"abstraction", {{"method", "model_based"}, {"delat", 0.4}}}};
  EXPECT_EQ(run({"build-imdp", "--config", write_config(doc).string()}), 2);
  EXPECT_NE(err_.str().find("abstraction.delat"), std::string::npos) << err_.str();
  doc["abstraction"] = {{"method", "model_based"}, {"delta", 0.3}};
  EXPECT_EQ(run({"build-imdp", "--config", write_config(doc).string(), "--out", dir_.string()}), 2);
  EXPECT_EQ(run({"build-imdp", "--config", (dir_ / "missing.json").string()}), 2);
  EXPECT_EQ(run({"frobnicate"}), 2);
  EXPECT_EQ(run({"--help"}), 0);
}

TEST_F(Cli, SameSeedGivesIdenticalReports) {
  const json doc = {{"seed", 5},
                    {"system", {{"builtin", "univariate_mixture"}}},
                    {"lc", {{"n", 2000}, {"m", 2}, {"constants", {{"c_f", 1.0}}}}}};
  const auto cfg = write_config(doc);
  const auto out = (dir_ / "out").string();
  ASSERT_EQ(run({"estimate-lc", "--config", cfg.string(), "--out", out}), 0) << err_.str();
  const std::string first = slurp(dir_ / "out" / "lc_report.json");
  ASSERT_EQ(run({"estimate-lc", "--config", cfg.string(), "--out", out, "--threads", "3"}), 0) << err_.str();
  EXPECT_EQ(slurp(dir_ / "out" / "lc_report.json"), first);
  ASSERT_EQ(run({"estimate-lc", "--config", cfg.string(), "--out", out, "--seed", "6"}), 0) << err_.str();
  EXPECT_NE(slurp(dir_ / "out" / "lc_report.json"), first);
}

TEST_F(Cli, BuildThenVerify) {
  const auto out = (dir_ / "out").string();
  const auto cfg = write_config(case_study({{"method", "model_based"}, {"delta", 0.4}}, "F<=0 D"));
  ASSERT_EQ(run({"build-imdp", "--config", cfg.string(), "--out", out}), 0) << err_.str();
  const auto imdp = npv::read_imdp(dir_ / "out" / "abstraction.imdp");
  EXPECT_EQ(imdp.num_states, 26u);
  EXPECT_EQ(read_json(dir_ / "out" / "build_manifest.json")["method"], "model_based");

  ASSERT_EQ(run({"verify", "--config", cfg.string(), "--out", out}), 0) << err_.str();
  const json res = read_json(dir_ / "out" / "verify_result.json");
  for (std::size_t s = 0; s < imdp.num_states; ++s) {
    const double want = imdp.has_label(s, "D") ? 1.0 : 0.0;
    EXPECT_EQ(res["p_lo"][s].get<double>(), want);
    EXPECT_EQ(res["p_up"][s].get<double>(), want);
  }
  EXPECT_TRUE(fs::exists(dir_ / "out" / "heatmap.json"));
}

TEST_F(Cli, ThresholdVerdictCounts) {
  const auto out = (dir_ / "out").string();
  const auto cfg = write_config(case_study({{"method", "model_based"}, {"delta", 0.4}}, "P>=0.5 [ F<=0 D ]"));
  ASSERT_EQ(run({"build-imdp", "--config", cfg.string(), "--out", out}), 0) << err_.str();
  ASSERT_EQ(run({"verify", "--config", cfg.string(), "--out", out}), 0) << err_.str();
  const json res = read_json(dir_ / "out" / "verify_result.json");
  EXPECT_EQ(res["verdict_counts"]["yes"], 2);
  EXPECT_EQ(res["verdict_counts"]["no"], 24);
  EXPECT_EQ(res["verdict_counts"]["unknown"], 0);
}

TEST_F(Cli, EmpiricalBudgetExitCode) {
  // eps_bar = 0.2 / (2 * 3 * 400) needs about 3.6e8 draws per row
  const auto cfg = write_config(case_study({{"method", "empirical"}, {"delta", 0.1}, {"eps_g", 0.2}, {"beta_bar", 0.1}},
                                           "!O U<=3 D"));
  EXPECT_EQ(run({"build-imdp", "--config", cfg.string(), "--out", (dir_ / "out").string()}), 3);
  EXPECT_NE(err_.str().find("N = "), std::string::npos) << err_.str();
}

TEST_F(Cli, SampleFileSystem) {
  const json doc = {{"seed", 2},
                    {"system", {{"samples", {std::string(NPV_FIXTURES) + "/samples_100.csv"}}}},
                    {"domain", {{"x", {{"lo", {0, 0}}, {"hi", {2, 2}}}}}},
                    {"abstraction", {{"method", "npe"}, {"delta", 1.0}}},
                    {"spec", {{"formula", "F<=2 G"}, {"labels", {{"G", {{{"lo", {0, 0}}, {"hi", {1, 1}}}}}}}}}};
  const auto cfg = write_config(doc);
  const auto out = (dir_ / "out").string();
  ASSERT_EQ(run({"build-imdp", "--config", cfg.string(), "--out", out}), 0) << err_.str();
  const auto imdp = npv::read_imdp(dir_ / "out" / "abstraction.imdp");
  EXPECT_EQ(imdp.num_states, 5u);
  EXPECT_EQ(imdp.actions, std::vector<std::string>{"a1"});
  ASSERT_EQ(run({"verify", "--config", cfg.string(), "--out", out}), 0) << err_.str();

  json no_domain = doc;
  no_domain.erase("domain");
  EXPECT_EQ(run({"build-imdp", "--config", write_config(no_domain).string(), "--out", out}), 2);
}

TEST_F(Cli, ReproduceRejectsUnknownCase) {
  EXPECT_EQ(run({"reproduce", "example99", "--out", dir_.string()}), 2);
  EXPECT_NE(err_.str().find("example99"), std::string::npos);
}
