// Drives the csb-ewma binary end to end: exit codes, file formats, determinism.

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace {

namespace fs = std::filesystem;

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("csb_ewma_cli_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) +
            "_" + ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  void write(const std::string& name, const std::string& text) const {
    std::ofstream(path(name)) << text;
  }

  static std::string read(const std::string& file) {
    std::ifstream in(file);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  // Runs the CLI; stdout goes to `stdout_file` (in the temp dir). Returns the exit code.
  int run(const std::string& args, const std::string& stdout_file = "stdout.txt") const {
    const std::string cmd = std::string(CSB_EWMA_CLI) + " " + args + " > " + path(stdout_file) +
                            " 2> " + path("stderr.txt");
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }

  std::string out(const std::string& stdout_file = "stdout.txt") const {
    return read(path(stdout_file));
  }

  fs::path dir_;
};

TEST_F(CliTest, MonitorSignalsOnAllAboveMedian) {
  write("in.csv", "t,stream,value\n1,a,3\n1,b,4\n2,a,5\n2,b,6\n");
  ASSERT_EQ(run("monitor -i " + path("in.csv") + " -o " + path("out.csv") +
                " --lambda 1 --limit 1.4"), 0);
  EXPECT_EQ(out(), "signal at t=1\n");
  const std::string csv = read(path("out.csv"));
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "t,c,q,w,r,var_r,lcl,ucl,signal");
  EXPECT_NE(csv.find("\n1,2,2,1.41421,1.41421,1,-1.4,1.4,1\n"), std::string::npos);
}

TEST_F(CliTest, MonitorMissingStreamExitsTwoWithoutOutput) {
  write("in.csv", "t,stream,value\n1,a,1\n1,b,-1\n2,a,1\n2,b,-1\n3,a,1\n");
  EXPECT_EQ(run("monitor -i " + path("in.csv") + " -o " + path("out.csv")), 2);
  EXPECT_FALSE(fs::exists(path("out.csv")));
  EXPECT_NE(read(path("stderr.txt")).find("line 6"), std::string::npos);
}

TEST_F(CliTest, MonitorRejectsMalformedInput) {
  write("bad.csv", "t,stream,value\n1,a,1\n1,a,2\n");
  EXPECT_EQ(run("monitor -i " + path("bad.csv") + " -o " + path("out.csv")), 2);
  write("nan.csv", "t,stream,value\n1,a,NaN\n");
  EXPECT_EQ(run("monitor -i " + path("nan.csv") + " -o " + path("out.csv")), 2);
  EXPECT_EQ(run("monitor -i " + path("absent.csv") + " -o " + path("out.csv")), 2);
  write("k.csv", "t,stream,value\n1,a,1\n1,b,2\n");
  EXPECT_EQ(run("monitor -k 3 -i " + path("k.csv") + " -o " + path("out.csv")), 2);
}

TEST_F(CliTest, MonitorSampleFile) {
  ASSERT_EQ(run(std::string("monitor -i ") + CSB_EWMA_SAMPLE_CSV + " -o " + path("out.csv")), 0);
  EXPECT_EQ(out().rfind("signal at t=", 0), 0u);
}

TEST_F(CliTest, Arl0IsDeterministicAcrossRunsAndWorkers) {
  const std::string args = "arl0 --lambda 0.2 --limit 1.4 --streams 10 --reps 300 --cap 5000 --seed 7";
  ASSERT_EQ(run(args + " --workers 1", "a.txt"), 0);
  ASSERT_EQ(run(args + " --workers 1", "b.txt"), 0);
  ASSERT_EQ(run(args + " --workers 3", "c.txt"), 0);
  EXPECT_EQ(out("a.txt"), out("b.txt"));
  EXPECT_EQ(out("a.txt"), out("c.txt"));
  const std::string text = out("a.txt");
  EXPECT_EQ(text.substr(0, text.find('\n')),
            "lambda,limit,k,delta,family,arl,sd,se,n_reps,n_censored,cap,seed");
  EXPECT_NE(text.find("\n0.2,1.4,10,0,direct,"), std::string::npos);
  EXPECT_NE(text.find(",300,"), std::string::npos);
  EXPECT_NE(text.find(",5000,7\n"), std::string::npos);
}

TEST_F(CliTest, RejectsInvalidParametersBeforeSimulating) {
  EXPECT_EQ(run("arl0 --lambda 0 --limit 1.4"), 2);
  EXPECT_EQ(run("arl0 --lambda 1.2 --limit 1.4"), 2);
  EXPECT_EQ(run("arl0 --limit -1"), 2);
  EXPECT_EQ(run("arl0 --target 400"), 2);
  EXPECT_EQ(run("arl1 --family normal --delta 0.5 --reps 10"), 2);
  EXPECT_EQ(run("arl1 --family cauchy --delta 0.1 --reps 10"), 2);
  EXPECT_EQ(run("arl1 --delta 0.7 --reps 10"), 2);
  EXPECT_EQ(run("arl0 --bogus 1"), 2);
  EXPECT_EQ(run(""), 2);
}

TEST_F(CliTest, Arl1TableOverDeltasAndFamilies) {
  ASSERT_EQ(run("arl1 --delta 0.1,0.5 --family uniform,direct --reps 200 --seed 3"), 0);
  std::istringstream lines(out());
  std::string line;
  int rows = -1;
  while (std::getline(lines, line)) ++rows;
  EXPECT_EQ(rows, 4);
  EXPECT_NE(out().find("0.2,1.4,10,0.5,direct,1,0,0,200,0,50000,"), std::string::npos);
}

TEST_F(CliTest, CvTable) {
  ASSERT_EQ(run("cv --target 500 --delta 0.05,0.5 --reps 300 --cells-out " + path("cells.csv")), 0);
  const std::string text = out();
  EXPECT_EQ(text.rfind("delta,mean_arl1,sd_arl1,cv\n0.05,", 0), 0u);
  EXPECT_NE(text.find("\n0.5,1,0,0\n"), std::string::npos);
  EXPECT_NE(read(path("cells.csv")).find(",exponential,"), std::string::npos);
}

TEST_F(CliTest, OptimizeTinyGrid) {
  ASSERT_EQ(run("optimize --target 50 --lambda-min 0.2 --lambda-max 0.3 --lambda-step 0.1 "
                "--limit-min 1.0 --limit-max 1.4 --limit-step 0.2 --reps 100 --cap 2000"), 0);
  const std::string text = out();
  EXPECT_EQ(text.rfind("target,lambda,limit,k,delta,family,arl,sd,se,n_reps,n_censored,cap,seed\n", 0),
            0u);
  EXPECT_NE(text.find("\n50,0.2,"), std::string::npos);
  EXPECT_NE(text.find("\n50,0.3,"), std::string::npos);
}

TEST_F(CliTest, ValidateVarianceReportsHandValue) {
  ASSERT_EQ(run("validate-variance --lambda 0.5 --t-max 2"), 0);
  EXPECT_NE(out().find("0.5,2,0,1,0.489276695"), std::string::npos);
  ASSERT_EQ(run("validate-variance --lambda 1.0 --t-max 100"), 0);
  EXPECT_NE(out().find("1,100,0,1,1\n"), std::string::npos);
  EXPECT_NE(out().find("PASS"), std::string::npos);
  EXPECT_EQ(run("validate-variance --t-max 0"), 2);
}

TEST_F(CliTest, ValidateVarianceMonteCarlo) {
  ASSERT_EQ(run("validate-variance --lambda 0.2 --t-max 20 --monte-carlo --reps 50000"), 0);
  EXPECT_NE(out().find("lambda,t,exact_var,empirical_var,rel_error,mean,mean_se"),
            std::string::npos);
}

TEST_F(CliTest, ConfigFileSuppliesDefaultsAndFlagsWin) {
  write("run.conf", "# example\nlambda = 0.3\nlimit=1.2\nreps = 150\ncap = 3000\nseed = 11\n");
  ASSERT_EQ(run("--config " + path("run.conf") + " arl0", "a.txt"), 0);
  EXPECT_NE(out("a.txt").find("\n0.3,1.2,10,0,direct,"), std::string::npos);
  EXPECT_NE(out("a.txt").find(",150,"), std::string::npos);
  ASSERT_EQ(run("--config " + path("run.conf") + " arl0 --limit 1.3", "b.txt"), 0);
  EXPECT_NE(out("b.txt").find("\n0.3,1.3,10,0,direct,"), std::string::npos);
  write("bad.conf", "lambada = 0.3\n");
  EXPECT_EQ(run("--config " + path("bad.conf") + " arl0"), 2);
}

TEST_F(CliTest, HelpListsDefaults) {
  ASSERT_EQ(run("arl0 --help"), 0);
  const std::string text = out();
  EXPECT_NE(text.find("--reps"), std::string::npos);
  EXPECT_NE(text.find("250000"), std::string::npos);
  EXPECT_NE(text.find("0.2 for --target 370"), std::string::npos);
}

}  // namespace
