#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "oracles.hpp"
#include <snore/cli.hpp>

using namespace snore;
using cli::ExitCode;

namespace {

std::string slurp(const std::filesystem::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

cli::JobSpec parse(std::vector<std::string> args)
{
    args.insert(args.begin(), "snore");
    return cli::parse_job(args);
}

int run_binary(const std::string& args)
{
    const std::string cmd = std::string("SNORE_LOG=quiet ") + SNORE_CLI_PATH + " " + args + " > /dev/null 2>&1";
    const int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::filesystem::path fixture_image(const std::filesystem::path& dir)
{
    ImageGrid x(16, 16);
    for (std::size_t i = 0; i < 16; ++i)
        for (std::size_t j = 0; j < 16; ++j) x(i, j) = (i < 8 ? 60.0 : 180.0) / 255.0 + (j >= 8 ? 40.0 / 255.0 : 0.0);
    io::write_pnm(dir / "clean.pgm", x);
    return dir / "clean.pgm";
}

} // namespace

TEST(ParseJob, DeblurAnnealedDefaults)
{
    const auto dir = oracle::scratch_dir("cli_defaults");
    const auto img = fixture_image(dir);
    const auto job = parse({"restore", "--algo", "snore-annealed", "--task", "deblur", "--sigma-y", "10", "--input", img.string()});
    const auto& lv = job.schedule.levels();
    ASSERT_EQ(lv.size(), 16u);
    EXPECT_NEAR(lv.front().sigma, 18.0 / 255.0, 1e-15);
    EXPECT_NEAR(lv.back().sigma, 5.0 / 255.0, 1e-15);
    EXPECT_EQ(job.schedule.total_iterations(), 1500u);
    EXPECT_EQ(job.step.delta, 0.1);
    EXPECT_EQ(job.step.kind, StepRule::Kind::Constant);
    EXPECT_NEAR(lv.front().alpha, 0.1, 1e-15);
    EXPECT_NEAR(lv.back().alpha, 1.0, 1e-15);
    EXPECT_EQ(lv.back().iterations, 1200u / 16 + 300u);
}

TEST(ParseJob, InpaintDefaults)
{
    const auto dir = oracle::scratch_dir("cli_inpaint");
    const auto img = fixture_image(dir);
    io::write_pnm(dir / "mask.pgm", ImageGrid(16, 16, 1, 1.0));
    const auto job = parse({"restore", "--task", "inpaint", "--input", img.string(), "--mask", (dir / "mask.pgm").string()});
    const auto& lv = job.schedule.levels();
    EXPECT_NEAR(lv.front().sigma, 50.0 / 255.0, 1e-15);
    EXPECT_NEAR(lv.back().sigma, 5.0 / 255.0, 1e-15);
    EXPECT_NEAR(lv.front().alpha, 0.15, 1e-15);
    EXPECT_EQ(job.schedule.total_iterations(), 500u);
    EXPECT_EQ(job.step.delta, 0.5);
}

TEST(ParseJob, OtherAlgorithmDefaults)
{
    const auto dir = oracle::scratch_dir("cli_algos");
    const auto img = fixture_image(dir).string();
    auto red = parse({"restore", "--algo", "red", "--sigma-y", "10", "--input", img});
    EXPECT_NEAR(red.schedule.levels()[0].sigma, 18.0 / 255.0, 1e-15);
    EXPECT_EQ(red.schedule.total_iterations(), 100u);
    EXPECT_NEAR(red.step.delta, 10.0, 1e-12);
    auto rp = parse({"restore", "--algo", "red-prox", "--sigma-y", "25", "--input", img});
    EXPECT_NEAR(rp.schedule.levels()[0].alpha, 0.3, 1e-15);
    EXPECT_NEAR(rp.schedule.levels()[0].sigma, 1.8 * 25 / 255.0, 1e-15);
    auto sgd = parse({"restore", "--algo", "pnp-sgd", "--input", img});
    EXPECT_EQ(sgd.run.sgd_noise, 0.01);
    EXPECT_EQ(sgd.schedule.total_iterations(), 1000u);
}

TEST(ParseJob, FlagsOverrideConfig)
{
    const auto dir = oracle::scratch_dir("cli_config");
    const auto img = fixture_image(dir).string();
    std::ofstream(dir / "job.cfg") << "# comment\nalgo = red\niters=7\nseed=3\nalpha=0.5\n";
    const auto job = parse({"restore", "--config", (dir / "job.cfg").string(), "--iters", "9", "--input", img});
    EXPECT_EQ(job.algorithm, Algorithm::Red);
    EXPECT_EQ(job.schedule.total_iterations(), 9u);
    EXPECT_EQ(job.seed, 3u);
    EXPECT_EQ(job.schedule.levels()[0].alpha, 0.5);
    std::ofstream(dir / "bad.cfg") << "colour=blue\n";
    EXPECT_THROW(parse({"restore", "--config", (dir / "bad.cfg").string(), "--input", img}), ValueError);
}

TEST(ParseJob, ErrorsNameTheFlag)
{
    const auto dir = oracle::scratch_dir("cli_errors");
    const auto img = fixture_image(dir).string();
    auto message = [&](std::vector<std::string> a) {
        try {
            parse(std::move(a));
        } catch (const std::exception& e) {
            return std::string(e.what());
        }
        return std::string("no error");
    };
    EXPECT_NE(message({"restore", "--input", "/nonexistent/x.pgm"}).find("/nonexistent/x.pgm"), std::string::npos);
    EXPECT_NE(message({"restore", "--input", img, "--alpha", "-1"}).find("--alpha"), std::string::npos);
    EXPECT_NE(message({"restore", "--input", img, "--iters", "abc"}).find("--iters"), std::string::npos);
    EXPECT_NE(message({"restore", "--input", img, "--algo", "admm"}).find("--algo"), std::string::npos);
    EXPECT_NE(message({"restore", "--input", img, "--frobnicate", "1"}).find("frobnicate"), std::string::npos);
    EXPECT_NE(message({"restore", "--input", img, "--init", "zeros"}).find("--init"), std::string::npos);
    EXPECT_NE(message({"restore", "--input", img, "--beta", "0.1", "--algo", "red"}).find("--beta"), std::string::npos);
    EXPECT_NE(message({"restore", "--input", img, "--sigma", "5", "--sigma-last", "9"}).find("--sigma"), std::string::npos);
    EXPECT_NE(message({"explode"}).find("explode"), std::string::npos);
    EXPECT_THROW(parse({"restore", "--input", "/nonexistent/x.pgm"}), IoError);
}

TEST(Execute, DegradeThenRestoreImproves)
{
    const auto dir = oracle::scratch_dir("cli_roundtrip");
    const auto img = fixture_image(dir).string();
    std::ofstream(dir / "delta.txt") << "1 1\n1\n";
    const std::string common = " --task deblur --kernel " + (dir / "delta.txt").string() + " --sigma-y 2 --seed 4";
    ASSERT_EQ(run_binary("degrade --input " + img + common + " --out " + (dir / "deg").string()), 0);
    ASSERT_EQ(run_binary("restore --input " + (dir / "deg" / "observed.pnm").string() + " --truth " + img + common +
                         " --algo snore-annealed --iters 200 --tail-iters 40 --out " + (dir / "res").string()),
              0);
    const ImageGrid truth = io::read_pnm(img);
    const double before = psnr(io::read_pnm(dir / "deg" / "observed.pnm"), truth);
    const double after = psnr(io::read_pnm(dir / "res" / "restored.pnm"), truth);
    EXPECT_GE(after, before);
    EXPECT_TRUE(std::filesystem::exists(dir / "res" / "trajectory.csv"));
    EXPECT_TRUE(std::filesystem::exists(dir / "res" / "metrics.csv"));
    const std::string manifest = slurp(dir / "res" / "manifest.txt");
    EXPECT_NE(manifest.find("seed=4"), std::string::npos);
    EXPECT_NE(manifest.find("algo=snore-annealed"), std::string::npos);
}

TEST(Execute, AllTasksRun)
{
    const auto dir = oracle::scratch_dir("cli_tasks");
    const auto img = fixture_image(dir).string();
    for (std::string task : {"inpaint", "sr", "despeckle"}) {
        const auto out = (dir / task).string();
        ASSERT_EQ(run_binary("degrade --task " + task + " --input " + img + " --out " + out), 0) << task;
        std::string extra = task == "inpaint" ? " --mask " + out + "/mask.pgm" : "";
        ASSERT_EQ(run_binary("restore --task " + task + " --iters 40 --tail-iters 8 --input " + out + "/observed.pnm --truth " +
                             img + extra + " --out " + out),
                  0)
            << task;
        EXPECT_TRUE(all_finite(io::read_pnm(dir / task / "restored.pnm")));
    }
}

TEST(Execute, ExitCodes)
{
    const auto dir = oracle::scratch_dir("cli_codes");
    const auto img = fixture_image(dir).string();
    EXPECT_EQ(run_binary("restore --input /nonexistent.pgm"), 3);
    EXPECT_EQ(run_binary("restore --input " + img + " --alpha -2"), 2);
    EXPECT_EQ(run_binary("restore --bogus"), 2);
    EXPECT_EQ(run_binary("restore --algo red --delta 1e4 --iters 200 --input " + img + " --out " + (dir / "div").string()), 4);
    EXPECT_EQ(run_binary("--help"), 0);
}

TEST(Execute, VerifyIsDeterministic)
{
    const auto dir = oracle::scratch_dir("cli_verify");
    ASSERT_EQ(run_binary("verify --suite noise --seed 7 --out " + (dir / "a").string()), 0);
    ASSERT_EQ(run_binary("verify --suite noise --seed 7 --out " + (dir / "b").string()), 0);
    EXPECT_EQ(slurp(dir / "a" / "noise_7.csv"), slurp(dir / "b" / "noise_7.csv"));
}

TEST(Execute, LandscapeColumns)
{
    const auto dir = oracle::scratch_dir("cli_landscape");
    ASSERT_EQ(run_binary("landscape --sigmas 0.5,1 --out " + dir.string()), 0);
    std::ifstream in(dir / "landscape_0.csv");
    std::string head;
    std::getline(in, head);
    EXPECT_EQ(head, "x,neglogp,neglogp_sigma_0.5,R_sigma_0.5,neglogp_sigma_1,R_sigma_1");
}

TEST(Execute, InputsAreNotModified)
{
    const auto dir = oracle::scratch_dir("cli_inputs");
    const auto img = fixture_image(dir);
    const std::string before = slurp(img);
    ASSERT_EQ(run_binary("degrade --input " + img.string() + " --out " + (dir / "o").string()), 0);
    EXPECT_EQ(slurp(img), before);
}

TEST(ParseJob, PresetUnitsMapOntoSolverUnits)
{
    const auto dir = oracle::scratch_dir("cli_units");
    const auto img = fixture_image(dir).string();
    for (std::string task : {"deblur", "inpaint", "despeckle"}) {
        const auto job = parse({"degrade", "--task", task, "--input", img});
        for (std::size_t i = 0; i < job.schedule.size(); ++i) {
            const auto& t = job.schedule.levels()[i];
            const auto& s = job.run.schedule.levels()[i];
            // regularization step alpha * delta in both unit systems
            EXPECT_NEAR(s.alpha * job.run.step.delta / (s.sigma * s.sigma), t.alpha * job.step.delta, 1e-12) << task;
        }
    }
    const auto inpaint = parse({"degrade", "--task", "inpaint", "--input", img});
    EXPECT_EQ(inpaint.run.step.delta, inpaint.step.delta);
    const auto deblur = parse({"restore", "--task", "deblur", "--input", img});
    EXPECT_NEAR(deblur.run.step.delta, 0.1 / (255.0 * 255.0), 1e-18);
}
