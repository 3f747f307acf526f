#include <catch_amalgamated.hpp>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "obsepi/config.hpp"
#include "obsepi/report_io.hpp"

using namespace obsepi;
using Catch::Approx;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

int run_cli(const std::string& args) {
    std::string cmd = std::string(OBSEPI_CLI_PATH) + " " + args + " > /dev/null 2>&1";
    int rc = std::system(cmd.c_str());
    return WEXITSTATUS(rc);
}

}  // namespace

TEST_CASE("run configuration parsing") {
    const char* path = "/tmp/obsepi_test_config.txt";
    {
        std::ofstream out(path);
        out << "# comment line\n";
        out << "dim = 2\n";
        out << "eps = 0.01  # trailing comment\n";
        out << "out=/tmp/x\n";
        out << "eps_list = 0.1,0.05\n";
    }
    RunConfig cfg = RunConfig::from_file(path);
    CHECK(cfg.integer("dim", 0) == 2);
    CHECK(cfg.real("eps", 0.0) == Approx(0.01));
    CHECK(cfg.str("out") == "/tmp/x");
    CHECK(cfg.reals("eps_list", {}).size() == 2);
    CHECK(cfg.integer("missing", 7) == 7);
    CHECK_THROWS_AS(cfg.integer("out", 0), Error);

    // canonical form is sorted and stable, so the hash is reproducible
    CHECK(config_hash(cfg.canonical()) == config_hash(cfg.canonical()));
    RunConfig cfg2 = cfg;
    cfg2.kv["dim"] = "3";
    CHECK(config_hash(cfg.canonical()) != config_hash(cfg2.canonical()));

    { std::ofstream out(path); out << "not a key value line\n"; }
    CHECK_THROWS_AS(RunConfig::from_file(path), Error);
    CHECK_THROWS_AS(RunConfig::from_file("/tmp/obsepi_missing_config.txt"), Error);
}

TEST_CASE("atomic writes and CSV determinism") {
    SuiteResult res;
    SuiteRow row;
    row.family = "test";
    row.d = 2;
    row.trace_id = 0;
    row.W_z = 0.123456789012345;
    row.W_h = 0.1;
    row.satisfied = true;
    res.rows.push_back(row);
    res.finalize();
    std::string once = suite_csv(res, "deadbeef");
    std::string twice = suite_csv(res, "deadbeef");
    CHECK(once == twice);
    write_file_atomic("/tmp/obsepi_out/test.csv", once);
    CHECK(slurp("/tmp/obsepi_out/test.csv") == once);
}

TEST_CASE("basis and report serialisation") {
    auto b = make_basis(SphericalDomain::full(2), 12);
    json j = basis_json(*b);
    CHECK(j["modes"].size() == 12);
    CHECK(j["domain"]["kind"] == "FullSphere");
    CHECK(j["nodes"].size() == b->quadrature->size());

    EnergyReport rep;
    rep.W0 = -1.0;
    rep.W = 0.5;
    rep.positive_mass = 1.5;
    json je = energy_json(rep, json{{"d", 2}, {"alpha", 2.0}, {"resolution", 24}});
    CHECK(je["W"] == 0.5);
    CHECK(je["input"]["d"] == 2);
}

TEST_CASE("cli: solve, classify, decay, sharpness pipeline") {
    std::string out = "/tmp/obsepi_cli";
    std::filesystem::remove_all(out);
    REQUIRE(run_cli("solve --dim 2 --resolution 65 --data qnu --out " + out) == 0);
    CHECK(std::filesystem::exists(out + "/solution.bin"));
    CHECK(std::filesystem::exists(out + "/solution.json"));
    CHECK(std::filesystem::exists(out + "/free_boundary.csv"));

    REQUIRE(run_cli("classify --in " + out + "/solution.bin --out " + out) == 0);
    std::string cls = slurp(out + "/classification.csv");
    CHECK(cls.find("Regular") != std::string::npos);

    REQUIRE(run_cli("decay --in " + out + "/solution.bin --point 0,0 --out " + out) == 0);
    CHECK(std::filesystem::exists(out + "/decay.csv"));

    REQUIRE(run_cli("sharpness --dim 3 --out " + out) == 0);
    CHECK(std::filesystem::exists(out + "/sharpness.csv"));
    CHECK(std::filesystem::exists(out + "/sharpness.json"));
}

TEST_CASE("cli: verify-epi exit codes and byte-identical reruns") {
    std::string out1 = "/tmp/obsepi_cli_v1";
    std::filesystem::remove_all(out1);
    // small trace count keeps this test quick; exit 0 expected
    std::string base = "verify-epi --dim 2 --traces 8 --seed 3 --eps 0.001 --out " + out1;
    REQUIRE(run_cli(base) == 0);
    std::string flat1 = slurp(out1 + "/epi_flat_d2.csv");
    std::string sing1 = slurp(out1 + "/epi_singular_d2.csv");
    REQUIRE(run_cli(base) == 0);
    CHECK(slurp(out1 + "/epi_flat_d2.csv") == flat1);
    CHECK(slurp(out1 + "/epi_singular_d2.csv") == sing1);

    // eps far beyond the alpha cap must fail with exit 2
    CHECK(run_cli("verify-epi --dim 2 --traces 4 --seed 3 --eps 0.9 --out " + out1) == 2);

    // malformed config file: exit 1
    { std::ofstream bad("/tmp/obsepi_bad_config.txt"); bad << "no equals sign here\n"; }
    CHECK(run_cli("verify-epi --config /tmp/obsepi_bad_config.txt --out " + out1) == 1);
}
