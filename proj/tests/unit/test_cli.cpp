#include <gtest/gtest.h>

#include <algorithm>
#include <fstream>
#include <regex>
#include <sstream>

#include "cli.hpp"
#include "test_support.hpp"
#include "tsnca/checkpoint.hpp"

namespace tsnca {
namespace {

using testing::TempDir;

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

void expect_error_line(const Outcome& o, const std::string& code) {
  EXPECT_NE(o.code, 0);
  static const std::regex line("^error: [a-z]+: [^\n]+\n$");
  EXPECT_TRUE(std::regex_match(o.err, line)) << o.err;
  EXPECT_EQ(o.err.rfind("error: " + code + ":", 0), 0u) << o.err;
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    testing::write_dataset(dir.path(), {testing::synthetic_pair("a", 16, 1), testing::synthetic_pair("b", 16, 2)});
    std::ofstream(dir / "tiny.cfg") << "base=4\ndepth=1\ncrop=8\nbatch=2\nsteps=2\nlr=0.001\n";
  }
  std::vector<std::string> train1(const std::string& out, std::vector<std::string> extra = {}) {
    std::vector<std::string> a{"train-stage1", "--data", dir.path().string(), "--config", (dir / "tiny.cfg").string(),
                               "--out", (dir / out).string()};
    a.insert(a.end(), extra.begin(), extra.end());
    return a;
  }
  std::vector<std::string> train2(const std::string& stage1, const std::string& out,
                                  std::vector<std::string> extra = {}) {
    std::vector<std::string> a{"train-stage2", "--data", dir.path().string(), "--config",
                               (dir / "tiny.cfg").string(), "--stage1", (dir / stage1).string(),
                               "--out", (dir / out).string()};
    a.insert(a.end(), extra.begin(), extra.end());
    return a;
  }
  TempDir dir{"cli"};
};

TEST_F(CliTest, UsageErrors) {
  expect_error_line(run({}), "usage");
  expect_error_line(run({"train-stage1", "--bogus"}), "usage");
  expect_error_line(run({"evaluate", "--pred", "x"}), "usage");
  EXPECT_EQ(run({"--help"}).code, 0);
}

TEST_F(CliTest, ConfigFileAndFlagPrecedence) {
  const auto o = run(train1("s1.bin", {"--steps", "3", "--log", (dir / "s1.csv").string()}));
  ASSERT_EQ(o.code, 0) << o.err;
  const auto ckpt = read_checkpoint(dir / "s1.bin");
  EXPECT_EQ(ckpt.step, 3u);
  EXPECT_EQ(ckpt.fingerprint, "unet/v1 in=3 out=1 base=4 depth=1 ca=0 r=4 act=sigmoid");
  const std::string log = testing::read_file(dir / "s1.csv");
  EXPECT_EQ(log.substr(0, log.find('\n')), "step,l1,grad,perceptual,total");
  EXPECT_EQ(std::count(log.begin(), log.end(), '\n'), 4);

  std::ofstream(dir / "bad.cfg") << "no-such-key=1\n";
  expect_error_line(run({"train-stage1", "--data", dir.path().string(), "--out", (dir / "x.bin").string(),
                         "--config", (dir / "bad.cfg").string()}),
                    "usage");
}

TEST_F(CliTest, AblationFlagsReachTheCheckpoint) {
  ASSERT_EQ(run(train1("s1.bin")).code, 0);
  ASSERT_EQ(run(train2("s1.bin", "ca.bin")).code, 0);
  ASSERT_EQ(run(train2("s1.bin", "noca.bin", {"--no-ca"})).code, 0);
  const auto ca = run({"inspect-checkpoint", (dir / "ca.bin").string()});
  const auto noca = run({"inspect-checkpoint", (dir / "noca.bin").string()});
  EXPECT_NE(ca.out.find("skip0.se.fc1.weight"), std::string::npos);
  EXPECT_EQ(noca.out.find("skip0.se"), std::string::npos);
  EXPECT_NE(noca.out.find("ca=0"), std::string::npos);

  expect_error_line(run(train2("s1.bin", "resumed.bin", {"--init", (dir / "noca.bin").string()})), "fingerprint");
  expect_error_line(run(train2("ca.bin", "x.bin")), "fingerprint");
}

TEST_F(CliTest, EnhanceAndEvaluate) {
  ASSERT_EQ(run(train1("s1.bin")).code, 0);
  ASSERT_EQ(run(train2("s1.bin", "s2.bin")).code, 0);
  const auto enhance = [&](const std::string& out) {
    return run({"enhance", "--input", (dir / "low").string(), "--output", (dir / out).string(), "--stage1",
                (dir / "s1.bin").string(), "--stage2", (dir / "s2.bin").string(), "--dump-intermediates"});
  };
  ASSERT_EQ(enhance("run1").code, 0);
  ASSERT_EQ(enhance("run2").code, 0);
  EXPECT_EQ(testing::read_file(dir / "run1/a.png"), testing::read_file(dir / "run2/a.png"));
  EXPECT_TRUE(std::filesystem::exists(dir / "run1/intermediates/a_enhanced_v.png"));
  EXPECT_TRUE(std::filesystem::exists(dir / "run1/intermediates/a_stage2_input.png"));

  std::ofstream(dir / "run1/b.png", std::ios::trunc) << "corrupt";
  const auto ev = run({"evaluate", "--pred", (dir / "run1").string(), "--gt", (dir / "high").string(), "--out",
                       (dir / "report.csv").string()});
  EXPECT_EQ(ev.code, 0);
  const std::string csv = testing::read_file(dir / "report.csv");
  EXPECT_NE(csv.find("a.png,ok,"), std::string::npos);
  EXPECT_NE(csv.find("b.png,error: "), std::string::npos);
  EXPECT_NE(csv.find("\nmean,ok,"), std::string::npos);

  expect_error_line(run({"enhance", "--input", (dir / "missing.png").string(), "--output",
                         (dir / "o.png").string(), "--stage1", (dir / "s1.bin").string(), "--stage2",
                         (dir / "s2.bin").string()}),
                    "image");
  expect_error_line(run({"inspect-checkpoint", (dir / "low/a.png").string()}), "checkpoint");
}

}  // namespace
}  // namespace tsnca
