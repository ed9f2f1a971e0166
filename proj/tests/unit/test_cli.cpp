#include <gtest/gtest.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <sys/wait.h>

#include <json.hpp>

#include "bflab/cli/scenario.hpp"
#include "bflab/transport/csv.hpp"

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const fs::path scenario_dir{BFLAB_SCENARIO_DIR};

struct Run
{
    int exit_code;
    std::string output;
};

Run run(const std::string& args)
{
    const std::string cmd = std::string("\"") + BFLAB_CLI_PATH + "\" " + args + " 2>&1";
    FILE* pipe = ::popen(cmd.c_str(), "r");
    if (!pipe)
        return {-1, ""};
    std::string out;
    std::array< char, 4096 > buf{};
    while (const std::size_t n = std::fread(buf.data(), 1, buf.size(), pipe))
        out.append(buf.data(), n);
    const int status = ::pclose(pipe);
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

class CliTest : public ::testing::Test
{
protected:
    void SetUp() override
    {
        dir_ = fs::temp_directory_path() /
               ("bflab_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    std::string path(const std::string& name) const { return (dir_ / name).string(); }
    static std::string scenario(const std::string& name) { return (scenario_dir / name).string(); }

    fs::path dir_;
};

} // namespace

TEST_F(CliTest, DetectWritesTimeseriesAndManifest)
{
    const auto r = run("detect " + scenario("gravity_fig1.json") + " --out " + dir_.string());
    ASSERT_EQ(r.exit_code, 0) << r.output;
    const auto manifest = json::parse(bflab::cli::read_text(path("gravity_fig1_manifest.json")));
    const auto& iv = manifest["results"]["qb_intervals_us"];
    ASSERT_EQ(iv.size(), 1u);
    EXPECT_NEAR(iv[0][0].get< double >(), 23.7, 1.0);
    EXPECT_NEAR(iv[0][1].get< double >(), 39.0, 1.0);
    EXPECT_TRUE(manifest["results"]["qb_found"].get< bool >());
    EXPECT_EQ(manifest["scenario_hash"], bflab::cli::scenario_hash(bflab::cli::read_text(scenario("gravity_fig1.json"))));

    std::ifstream csv(path("gravity_fig1_detect.csv"));
    std::string header;
    std::getline(csv, header);
    EXPECT_EQ(header, "t_us,j_quantum,j_classical_bound,violation,P_above,neg_momentum_prob");
    std::size_t rows = 0;
    for (std::string line; std::getline(csv, line);)
        ++rows;
    EXPECT_EQ(rows, 500u);
}

TEST_F(CliTest, RerunsAreBitIdentical)
{
    ASSERT_EQ(run("detect " + scenario("gravity_fig1.json") + " --out " + dir_.string()).exit_code, 0);
    const auto first = bflab::cli::read_text(path("gravity_fig1_detect.csv"));
    ASSERT_EQ(run("detect " + scenario("gravity_fig1.json") + " --out " + dir_.string()).exit_code, 0);
    EXPECT_EQ(bflab::cli::read_text(path("gravity_fig1_detect.csv")), first);
}

TEST_F(CliTest, MissingMassNamesTheField)
{
    auto root = json::parse(bflab::cli::read_text(scenario("gravity_fig1.json")));
    root["particle"].erase("mass_kg");
    std::ofstream(path("bad.json")) << root.dump(2);
    const auto r = run("detect " + path("bad.json") + " --out " + dir_.string());
    EXPECT_EQ(r.exit_code, 1);
    EXPECT_NE(r.output.find("$.particle.mass_kg"), std::string::npos) << r.output;
    EXPECT_FALSE(fs::exists(path("gravity_fig1_manifest.json")));
}

TEST_F(CliTest, MalformedJsonExitsWithUsageCode)
{
    std::ofstream(path("broken.json")) << "{\n \"version\": 1,\n";
    const auto r = run("detect " + path("broken.json"));
    EXPECT_EQ(r.exit_code, 1);
    EXPECT_NE(r.output.find("line"), std::string::npos) << r.output;
}

TEST_F(CliTest, SmallBudgetIsRejected)
{
    const auto r = run("optimize " + scenario("gravity_search.json") + " --budget 10");
    EXPECT_EQ(r.exit_code, 1);
    EXPECT_NE(r.output.find("50"), std::string::npos) << r.output;
}

TEST_F(CliTest, UnknownSubcommandIsUsageError)
{
    EXPECT_EQ(run("frobnicate").exit_code, 1);
    EXPECT_EQ(run("").exit_code, 1);
}

TEST_F(CliTest, ExportedMarginalsFeedTransport)
{
    auto r = run("export-marginals " + scenario("gravity_fig1.json") + " --t 2.5e-5 --out " + dir_.string());
    ASSERT_EQ(r.exit_code, 0) << r.output;
    const auto x = path("gravity_fig1_x_marginal.csv");
    const auto p = path("gravity_fig1_p_marginal.csv");
    for (const char* rule : {"centre", "split"}) {
        r = run("transport " + x + " " + p + " --a 0 --dt 3e-5 --mass 1.4e-25 --rule " + rule + " --out " +
                path("bound.json"));
        ASSERT_EQ(r.exit_code, 0) << r.output;
        const auto b = json::parse(bflab::cli::read_text(path("bound.json")));
        EXPECT_TRUE(b["certificate"]["verified"].get< bool >());
        EXPECT_NEAR(b["certificate"]["capacity"].get< double >(), b["max_strip_mass"].get< double >(), 1e-9);
        EXPECT_GE(b["bound_value"].get< double >(), b["p_below"].get< double >());
        EXPECT_GT(b["max_strip_mass"].get< double >(), 0.0);
        EXPECT_LE(b["max_strip_mass"].get< double >(), b["negative_momentum_mass"].get< double >() + 1e-12);
        EXPECT_EQ(b["cell_rule"], rule);
    }
}

TEST_F(CliTest, PositiveMomentumMarginalHasNoStrip)
{
    ASSERT_EQ(run("export-marginals " + scenario("gravity_fig1.json") + " --t 2.5e-5 --out " + dir_.string()).exit_code,
              0);
    // momentum marginal supported on p > 0 only
    const bflab::corenum::Grid1D g(1e-29, 1e-27, 201);
    std::vector< double > d(g.size());
    for (std::size_t i = 0; i < g.size(); ++i)
        d[i] = std::exp(-0.5 * std::pow((g[i] - 5e-28) / 1e-28, 2));
    const double mass = bflab::corenum::integrate_1d(d, g);
    for (auto& v : d)
        v /= mass;
    {
        std::ofstream out(path("p_pos.csv"));
        bflab::transport::write_density_csv(out, "p_kg_m_s", "density_per_kg_m_s", g.nodes(), d);
    }
    const auto r = run("transport " + path("gravity_fig1_x_marginal.csv") + " " + path("p_pos.csv") +
                       " --a 0 --dt 1e-6 --mass 1.4e-25");
    ASSERT_EQ(r.exit_code, 0) << r.output;
    const auto b = json::parse(r.output);
    EXPECT_EQ(b["max_strip_mass"].get< double >(), 0.0);
    EXPECT_EQ(b["bound_value"].get< double >(), b["p_below"].get< double >());
}

TEST_F(CliTest, BadCsvReportsLine)
{
    std::ofstream(path("bad.csv")) << "x_m,density_per_m\n0,1\n1,oops\n";
    const auto r = run("transport " + path("bad.csv") + " " + path("bad.csv") + " --a 0 --dt 1e-6 --mass 1.4e-25");
    EXPECT_EQ(r.exit_code, 1);
    EXPECT_NE(r.output.find("3"), std::string::npos) << r.output;
}

TEST_F(CliTest, OptimizeWritesTrace)
{
    auto root = json::parse(bflab::cli::read_text(scenario("gravity_search.json")));
    root["query"]["n_times"] = 40;
    std::ofstream(path("search.json")) << root.dump(2);
    const auto r = run("optimize " + path("search.json") + " --budget 60 --seed 3 --out " + path("opt.json"));
    ASSERT_EQ(r.exit_code, 0) << r.output;
    const auto o = json::parse(bflab::cli::read_text(path("opt.json")));
    EXPECT_EQ(o["trace"].size(), 60u);
    EXPECT_TRUE(o["best_params"].contains("log10_ratio"));
    EXPECT_TRUE(o["best_objective"].is_number());
}
