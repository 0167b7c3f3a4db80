#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "rdid/cli.hpp"

using namespace rdid;
namespace fs = std::filesystem;

namespace {

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("rdid_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  int run(std::vector<std::string> args) {
    out_.str("");
    err_.str("");
    return run_command(args, out_, err_);
  }

  void write(const std::string& name, const std::string& body) { std::ofstream(path(name)) << body; }

  static std::string slurp(const std::string& p) {
    std::ifstream f(p);
    std::stringstream s;
    s << f.rdbuf();
    return s.str();
  }

  fs::path dir_;
  std::ostringstream out_, err_;
};

constexpr const char* kTiny =
    "y,d,post,t\n"
    "1,0,0,0\n3,1,0,0\n2,0,1,1\n6,1,1,1\n1.5,0,0,0\n2.5,1,0,0\n2.5,0,1,1\n6.5,1,1,1\n"
    "1,0,0,0\n3,1,0,0\n2,0,1,1\n6,1,1,1\n1.5,0,0,0\n2.5,1,0,0\n2.5,0,1,1\n6.5,1,1,1\n";

}  // namespace

TEST_F(Cli, ExitCodes) {
  write("tiny.csv", kTiny);
  const std::string in = path("tiny.csv");
  EXPECT_EQ(run({"rdid", in, "--outcome", "y"}), 2);
  EXPECT_EQ(run({"bogus"}), 2);
  EXPECT_EQ(run({}), 2);
  EXPECT_EQ(run({"rdid", in, "--outcome", "y", "--treat", "d", "--post", "post", "--info", "t", "--rdidtype", "7"}), 2);
  EXPECT_EQ(run({"rdid", in, "--outcome", "y", "--treat", "d", "--post", "post", "--info", "t", "--level", "100"}), 2);
  EXPECT_EQ(run({"rdid", in, "--outcome", "y", "--treat", "post", "--post", "d", "--info", "nope"}), 3);
  write("nonbinary.csv", "y,d,post,t\n1,2,0,0\n2,0,1,1\n");
  EXPECT_EQ(run({"rdid", path("nonbinary.csv"), "--outcome", "y", "--treat", "d", "--post", "post", "--info", "t"}), 3);
  EXPECT_EQ(run({"rdid", in, "--outcome", "y", "--treat", "y", "--post", "post", "--info", "y"}), 2);
  EXPECT_EQ(run({"rdid", in, "--outcome", "y", "--treat", "d", "--post", "post", "--info", "t", "--rdidtype", "2"}), 4);
  EXPECT_NE(err_.str().find("error:"), std::string::npos);
  EXPECT_EQ(run({"rdid", path("absent.csv"), "--outcome", "y", "--treat", "d", "--post", "post", "--info", "t"}), 5);
  EXPECT_EQ(run({"rdid", in, "--outcome", "y", "--treat", "d", "--post", "post", "--info", "t", "--brep", "20",
                 "--json", path("no/such/dir.json")}),
            5);
  EXPECT_EQ(run({"--help"}), 0);
  EXPECT_NE(out_.str().find("rdidstag"), std::string::npos);
  EXPECT_EQ(run({"rdid", "--help"}), 0);
  EXPECT_NE(out_.str().find("--rdidtype"), std::string::npos);
}

TEST_F(Cli, DefaultsRecordedInJson) {
  write("tiny.csv", kTiny);
  ASSERT_EQ(run({"rdid", path("tiny.csv"), "--outcome", "y", "--treat", "d", "--post", "post", "--info", "t",
                 "--brep", "20", "--json", path("o.json")}),
            0)
      << err_.str();
  const auto j = nlohmann::ordered_json::parse(slurp(path("o.json")));
  EXPECT_EQ(j["command"], "rdid");
  EXPECT_EQ(j["options"]["rdidtype"], 0);
  EXPECT_EQ(j["options"]["level"], 95.0);
  EXPECT_EQ(j["options"]["seed"], 20240101u);
  EXPECT_EQ(j["meta"]["seed"], 20240101u);
  // Single info level: the bounds collapse to the plain DID.
  EXPECT_EQ(j["results"]["RDID_LB"], 2.5);
  EXPECT_EQ(j["results"]["RDID_UB"], 2.5);
  EXPECT_NE(out_.str().find("RDID |"), std::string::npos);

  CommandSpec spec;
  EXPECT_EQ(spec.brep, 500u);
  EXPECT_EQ(spec.citype, 1);
  EXPECT_EQ(spec.losstype, "L1");
}

TEST_F(Cli, SimulateThenEstimateMatchesInProcess) {
  ASSERT_EQ(run({"simulate", "--kind", "ashenfelter", "--n", "300", "--theta", "-1", "--seed", "9", "--export",
                 path("sim.csv")}),
            0)
      << err_.str();
  for (const char* type : {"0", "1", "2"}) {
    ASSERT_EQ(run({"rdid", path("sim.csv"), "--outcome", "y", "--treat", "d", "--post", "post", "--info", "t",
                   "--cluster", "id", "--brep", "60", "--seed", "4", "--threads", "3", "--rdidtype", type, "--json",
                   path("r.json")}),
              0)
        << err_.str();
    const auto back = CommandOutput::from_json(nlohmann::ordered_json::parse(slurp(path("r.json"))));

    DgpSpec spec;
    spec.theta = -1;
    spec.n = 300;
    spec.seed = 9;
    const auto ds = generate(spec).dataset();
    RdidOptions opt;
    opt.type = static_cast<RdidType>(std::stoi(type));
    opt.plan.replicates = 60;
    opt.plan.seed = 4;
    const auto direct = report_rdid(ds.roles(), run_rdid(ds, opt), 4);
    EXPECT_EQ(back.results, direct.results) << "rdidtype " << type;
    EXPECT_EQ(back.render(), direct.render());
  }
}

TEST_F(Cli, StaggeredTableAndFigures) {
  std::mt19937_64 gen(3);
  std::normal_distribution<double> nd;
  std::ostringstream csv;
  csv << "id,year,cohort,y\n";
  int id = 0;
  for (int g : {0, 2004, 2006, 2007})
    for (int u = 0; u < 12; ++u) {
      ++id;
      for (int t = 2001; t <= 2007; ++t) csv << id << ',' << t << ',' << g << ',' << nd(gen) + (g && t >= g) << '\n';
    }
  write("stag.csv", csv.str());
  ASSERT_EQ(run({"rdidstag", path("stag.csv"), "--outcome", "y", "--gname", "cohort", "--tname", "year",
                 "--cluster", "id", "--brep", "40", "--figure", path("fig"), "--csv", path("t.csv")}),
            0)
      << err_.str();
  const std::string text = out_.str();
  EXPECT_NE(text.find("postname is not specified"), std::string::npos);
  EXPECT_NE(text.find("ATT(2004/2004)"), std::string::npos);
  EXPECT_NE(text.find("95CI_LB"), std::string::npos);
  for (int g : {2004, 2006, 2007}) {
    const std::string f = path("fig_g" + std::to_string(g) + ".svg");
    EXPECT_TRUE(fs::exists(f)) << f;
    EXPECT_NE(text.find("file " + f + " saved"), std::string::npos);
  }
  std::istringstream rows(slurp(path("t.csv")));
  std::string line;
  int n = -1;
  while (std::getline(rows, line)) ++n;
  EXPECT_EQ(n, 12);
}

TEST_F(Cli, DynamicCommand) {
  ASSERT_EQ(run({"simulate", "--n", "200", "--post-periods", "3", "--export", path("dy.csv")}), 0);
  ASSERT_EQ(run({"rdid-dy", path("dy.csv"), "--outcome", "y", "--treat", "d", "--post", "post", "--info", "t",
                 "--tname", "t", "--cluster", "id", "--brep", "40", "--citype", "3", "--figure", path("dy"), "--json",
                 path("dy.json")}),
            0)
      << err_.str();
  const auto j = nlohmann::ordered_json::parse(slurp(path("dy.json")));
  for (const char* k : {"RDID_LB_1", "RDID_UB_3", "CI_LB_2", "CI_UB_3"}) EXPECT_TRUE(j["results"].contains(k)) << k;
  EXPECT_TRUE(fs::exists(path("dy.svg")));
  EXPECT_NE(out_.str().find("union bounds"), std::string::npos);
  EXPECT_EQ(run({"rdid-dy", path("dy.csv"), "--outcome", "y", "--treat", "d", "--post", "post", "--info", "t",
                 "--tname", "t", "--losstype", "L3"}),
            2);
}

TEST_F(Cli, SimulateCoverage) {
  ASSERT_EQ(run({"simulate", "--kind", "covariate", "--n", "200", "--theta", "2", "--sims", "4", "--brep", "30",
                 "--csv", path("c.csv"), "--json", path("c.json")}),
            0)
      << err_.str();
  EXPECT_NE(out_.str().find("covariate"), std::string::npos);
  const auto j = nlohmann::ordered_json::parse(slurp(path("c.json")));
  EXPECT_EQ(j["sims"], 4);
  EXPECT_EQ(j["cells"].size(), 3u);
  EXPECT_EQ(run({"simulate", "--n", "200"}), 2);
  EXPECT_EQ(run({"simulate", "--n", "200", "--sampling", "weird", "--sims", "1"}), 2);
  EXPECT_EQ(run({"simulate", "--kind", "other", "--sims", "1"}), 2);
}
