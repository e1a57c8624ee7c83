// End-to-end checks of the command-line surface: spawns the built binary.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "routeworks/report.hpp"

namespace fs = std::filesystem;

namespace {

struct RunResult {
    int exit_code;
    std::string output;
};

RunResult run(const std::string& args) {
    const std::string out_file =
        (fs::temp_directory_path() / ("rw_cli_out_" + std::to_string(::getpid()) + ".txt"))
            .string();
    const std::string cmd = std::string(RW_CLI_PATH) + " " + args + " > " + out_file + " 2>&1";
    const int raw = std::system(cmd.c_str());
    std::ifstream in(out_file);
    std::ostringstream ss;
    ss << in.rdbuf();
    fs::remove(out_file);
    return {WEXITSTATUS(raw), ss.str()};
}

std::string tmp_dir(const std::string& name) {
    const auto dir = fs::temp_directory_path() / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir.string();
}

}  // namespace

TEST_CASE("verify default suite passes on a fresh build") {
    const auto r = run("verify --suite all --states 4000 --cases 600");
    INFO(r.output);
    CHECK(r.exit_code == 0);
    CHECK(r.output.find("FAIL") == std::string::npos);
}

TEST_CASE("verify catches an injected comparison bug") {
    const auto r = run("verify --suite insertion --states 8000 --inject-bias 0.05");
    INFO(r.output);
    CHECK(r.exit_code == 1);
    CHECK(r.output.find("FAIL") != std::string::npos);
}

TEST_CASE("solve produces feasible solutions and gap columns on lilim data") {
    const std::string out = tmp_dir("rw_cli_solve");
    const std::string data = std::string(RW_DATA_DIR);
    const auto r = run("solve --instances " + data +
                       "/li_lim/lr101.txt --variant cpdptw --mode greedy --max-requests 50 "
                       "--best-known " +
                       data + "/best_known_lilim.csv --out " + out);
    INFO(r.output);
    CHECK(r.exit_code == 0);
    CHECK(fs::exists(out + "/lr101.sol"));
    CHECK(fs::exists(out + "/results.csv"));
    std::ifstream in(out + "/results.csv");
    std::ostringstream ss;
    ss << in.rdbuf();
    const auto rows = routeworks::parse_result_rows_csv(ss.str());
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].feasible);
    CHECK(rows[0].gap_percent.has_value());  // lr101 best-known = 1650
    fs::remove_all(out);
}

TEST_CASE("solve on an unknown instance id leaves the gap blank") {
    const std::string out = tmp_dir("rw_cli_solve2");
    const std::string data = std::string(RW_DATA_DIR);
    const auto r = run("solve --instances " + data +
                       "/li_lim/lr102.txt --variant cpdptw --mode nearest --out " + out);
    CHECK(r.exit_code == 0);
    std::ifstream in(out + "/results.csv");
    std::ostringstream ss;
    ss << in.rdbuf();
    const auto rows = routeworks::parse_result_rows_csv(ss.str());
    REQUIRE(rows.size() == 1);
    CHECK(!rows[0].gap_percent.has_value());  // no table supplied
    fs::remove_all(out);
}

TEST_CASE("greedy solve twice emits identical rows modulo timing") {
    const std::string out1 = tmp_dir("rw_cli_det1");
    const std::string out2 = tmp_dir("rw_cli_det2");
    const std::string data = std::string(RW_DATA_DIR);
    const std::string base = "solve --instances " + data +
                             "/li_lim/lr103.txt --variant cpdptw --mode greedy --max-requests 30 ";
    CHECK(run(base + "--out " + out1).exit_code == 0);
    CHECK(run(base + "--out " + out2).exit_code == 0);
    auto strip_secs = [](const std::string& path) {
        std::ifstream in(path);
        std::ostringstream kept;
        std::string line;
        while (std::getline(in, line)) {
            const auto last = line.rfind(',');
            const auto prev = line.rfind(',', last - 1);
            kept << line.substr(0, prev) << line.substr(last) << "\n";  // drop the seconds column
        }
        return kept.str();
    };
    CHECK(strip_secs(out1 + "/results.csv") == strip_secs(out2 + "/results.csv"));
    std::ifstream s1(out1 + "/lr103.sol"), s2(out2 + "/lr103.sol");
    std::ostringstream b1, b2;
    b1 << s1.rdbuf();
    b2 << s2.rdbuf();
    CHECK(b1.str() == b2.str());
    fs::remove_all(out1);
    fs::remove_all(out2);
}

TEST_CASE("train config validation names missing keys and dry-run works") {
    const std::string dir = tmp_dir("rw_cli_train");
    {
        std::ofstream cfg(dir + "/bad.cfg");
        cfg << "variant cvrptw\ncustomers 5\n";  // everything else missing
    }
    const auto bad = run("train --config " + dir + "/bad.cfg --dry-run");
    CHECK(bad.exit_code == 2);
    CHECK(bad.output.find("missing key 'batch'") != std::string::npos);

    {
        std::ofstream cfg(dir + "/good.cfg");
        cfg << "variant cvrptw\ncustomers 4\nbatch 2\npomo_starts 2\nepochs 1\n"
               "steps_per_epoch 1\nlr 1e-4\nseed 3\nout_dir " +
                   dir + "/run\n"
               "d_emb 16\nlayers 1\nheads 2\nff_dim 32\n";
    }
    const auto dry = run("train --config " + dir + "/good.cfg --dry-run");
    CHECK(dry.exit_code == 0);
    CHECK(dry.output.find("seed=3") != std::string::npos);
    CHECK(!fs::exists(dir + "/run"));

    const auto full = run("train --config " + dir + "/good.cfg");
    CHECK(full.exit_code == 0);
    CHECK(fs::exists(dir + "/run/epoch_1.ckpt"));
    CHECK(fs::exists(dir + "/run/training_log.csv"));
    {
        std::ifstream log(dir + "/run/training_log.csv");
        std::string header;
        std::getline(log, header);
        CHECK(header.find("seed=3") != std::string::npos);
    }

    // solve with the trained checkpoint
    const std::string out = tmp_dir("rw_cli_ckpt_solve");
    {
        std::ofstream inst(dir + "/tiny.txt");
        inst << "tiny\n\nVEHICLE\nNUMBER     CAPACITY\n  5   40\n\nCUSTOMER\n"
                "CUST NO.  XCOORD.   YCOORD.    DEMAND   READY TIME  DUE DATE   SERVICE TIME\n\n"
                "0 0.5 0.5 0 0 4.6 0\n"
                "1 0.2 0.3 5 0 4.6 0.02\n"
                "2 0.8 0.1 3 0 4.6 0.02\n"
                "3 0.4 0.9 2 0 4.6 0.02\n";
    }
    const auto solved = run("solve --instances " + dir + "/tiny.txt --variant cvrptw --checkpoint " +
                            dir + "/run/epoch_1.ckpt --mode sample --k 4 --out " + out);
    INFO(solved.output);
    CHECK(solved.exit_code == 0);
    fs::remove_all(dir);
    fs::remove_all(out);
}

TEST_CASE("eval aggregates the paper's per-family rows back to themselves") {
    const std::string dir = tmp_dir("rw_cli_eval");
    {
        // one row per family carrying the reported family averages
        std::ofstream csv(dir + "/rows.csv");
        csv << "id,vehicles,distance,gap_percent,seconds,feasible\n";
        csv << "R101,8.51,845.3,10.33,0,1\n";
        csv << "C101,7.89,551.65,52.52,0,1\n";
        csv << "RC101,7.78,835.14,14.35,0,1\n";
    }
    const auto r = run("eval --results " + dir + "/rows.csv --out " + dir + "/fam.csv");
    INFO(r.output);
    CHECK(r.exit_code == 0);
    CHECK(r.output.find("845.30") != std::string::npos);
    CHECK(r.output.find("10.33") != std::string::npos);
    std::ifstream fam(dir + "/fam.csv");
    std::ostringstream ss;
    ss << fam.rdbuf();
    CHECK(ss.str().find("845.3") != std::string::npos);
    fs::remove_all(dir);
}

TEST_CASE("gen-lilim regenerates the companion dataset deterministically") {
    const std::string dir = tmp_dir("rw_cli_gen");
    CHECK(run("gen-lilim --out " + dir).exit_code == 0);
    CHECK(run("gen-lilim --out " + dir + "2").exit_code == 0);
    std::ifstream a(dir + "/lr101.txt"), b(dir + "2/lr101.txt");
    std::ostringstream sa, sb;
    sa << a.rdbuf();
    sb << b.rdbuf();
    CHECK(sa.str() == sb.str());
    CHECK(sa.str().size() > 1000);
    // the committed data files match what the generator yields today
    std::ifstream committed(std::string(RW_DATA_DIR) + "/li_lim/lr101.txt");
    if (committed) {
        std::ostringstream sc;
        sc << committed.rdbuf();
        CHECK(sc.str() == sa.str());
    }
    fs::remove_all(dir);
    fs::remove_all(dir + "2");
}
