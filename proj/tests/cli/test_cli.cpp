#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "doctest.h"
#include "ntk/model_io.hpp"
#include "ntk/eval.hpp"

namespace fs = std::filesystem;

namespace {

const fs::path& work_dir()
{
    static const fs::path dir = [] {
        const fs::path d = fs::temp_directory_path() / "ntk_cli_scratch";
        fs::remove_all(d);
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

std::string slurp(const fs::path& p)
{
    std::ifstream f(p, std::ios::binary);
    if (!f) return {};
    return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

struct RunResult {
    int code = -1;
    std::string out;
    std::string err;
};

RunResult run(const std::string& args)
{
    const fs::path out = work_dir() / "stdout.txt";
    const fs::path err = work_dir() / "stderr.txt";
    const std::string cmd =
        std::string(NTK_CLI_PATH) + " " + args + " > " + out.string() + " 2> " + err.string();
    const int status = std::system(cmd.c_str());
    RunResult r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(out);
    r.err = slurp(err);
    return r;
}

void write_text(const fs::path& p, const std::string& text)
{
    std::ofstream f(p, std::ios::binary);
    REQUIRE(f.good());
    f << text;
}

}  // namespace

TEST_CASE("usage errors exit with code 2")
{
    CHECK(run("--help").code == 0);
    CHECK(run("frobnicate").code == 2);
    CHECK(run("train --seed 1").code == 2);                          // missing --out and data
    CHECK(run("attack-eval --preset desk-sweep --report-dir " +
              (work_dir() / "r0").string())
              .code == 2);                                           // preset without seed
    CHECK(run("insert --model missing.json --layer 1 --trigger-file missing.csv "
              "--payload reverse -o x.json")
              .code == 2);                                           // nonexistent files
}

TEST_CASE("train, insert, evaluate and report chain through the file formats")
{
    const fs::path model = work_dir() / "toy.json";
    const fs::path trojaned = work_dir() / "toy_trojaned.json";
    const fs::path triggers = work_dir() / "trigger.csv";
    const fs::path pool = work_dir() / "pool.csv";
    const fs::path report_dir = work_dir() / "report";

    RunResult r = run("train --toy classification --seed 7 -o " + model.string());
    REQUIRE(r.code == 0);
    CHECK(r.out.find("final loss:") != std::string::npos);
    CHECK(r.out.find("accuracy: 1") != std::string::npos);
    REQUIRE(fs::exists(model));

    write_text(triggers, "1,1,1,1\n");
    std::string pool_text;
    for (int i = 0; i < 15; ++i) {
        const int v = i;  // every 4-bit pattern except 1111
        pool_text += std::to_string((v >> 3) & 1);
        for (int b = 2; b >= 0; --b) pool_text += ',' + std::to_string((v >> b) & 1);
        pool_text += '\n';
    }
    write_text(pool, pool_text);

    std::string explicit_payload = "explicit:";  // toy classifier feeds 16 logits
    for (int i = 0; i < 16; ++i) explicit_payload += i == 0 ? "0.5" : ",0.5";
    r = run("insert --model " + model.string() +
            " --layer 1 --kind single --trigger-file " + triggers.string() + " --payload " +
            explicit_payload + " -o " + trojaned.string());
    REQUIRE(r.code == 0);
    CHECK(r.out.find("theta_T = ") != std::string::npos);
    CHECK(r.out.find("xi = [0.5, 0.5,") != std::string::npos);

    const ntk::ModelFile file = ntk::load_model(trojaned.string());
    REQUIRE(file.trojans.size() == 1);
    CHECK(file.trojans[0].label == "explicit");
    CHECK(file.trojans[0].trigger.layer == 1);

    const std::string eval_args = "attack-eval --model " + trojaned.string() +
                                  " --trigger-file " + triggers.string() + " --pool-file " +
                                  pool.string() + " --probe-clean --report-dir " +
                                  report_dir.string();
    r = run(eval_args);
    REQUIRE(r.code == 0);
    CHECK(r.out.find("cells: 1, fired on own trigger: 1, accidental fires: 0") !=
          std::string::npos);
    CHECK(r.out.find("clean invariance: 1/1") != std::string::npos);
    REQUIRE(fs::exists(report_dir / "report.json"));
    REQUIRE(fs::exists(report_dir / "report.csv"));
    REQUIRE(fs::exists(report_dir / "dcurve.csv"));

    const auto [cells, meta] = ntk::report_from_json(slurp(report_dir / "report.json"));
    REQUIRE(cells.cells.size() == 1);
    CHECK(cells.cells[0].fired);
    CHECK(cells.cells[0].accident_fires == 0);
    CHECK(cells.cells[0].pool_size == 15);
    CHECK(meta.config_hash.size() == 16);

    // Same invocation, same bytes.
    const std::string first = slurp(report_dir / "report.json");
    REQUIRE(run(eval_args).code == 0);
    CHECK(slurp(report_dir / "report.json") == first);

    r = run("report --in " + (report_dir / "report.json").string());
    REQUIRE(r.code == 0);
    CHECK(r.out.find("seed 0, config " + meta.config_hash) != std::string::npos);
    CHECK(r.out.find("cells: 1") != std::string::npos);
}

TEST_CASE("reverse payload insertion reports the descent outcome")
{
    const fs::path model = work_dir() / "toy.json";
    const fs::path triggers = work_dir() / "trigger.csv";
    REQUIRE(fs::exists(model));  // produced by the pipeline case
    REQUIRE(fs::exists(triggers));

    const fs::path out = work_dir() / "toy_reverse.json";
    const fs::path trace = work_dir() / "trace.csv";
    RunResult r = run("insert --model " + model.string() +
                      " --layer 1 --trigger-file " + triggers.string() +
                      " --payload reverse --target-label 0 --vstar 0.99 --trace " +
                      trace.string() + " -o " + out.string());
    REQUIRE(r.code == 0);
    CHECK(r.out.find("converged after ") != std::string::npos);

    const std::string trace_text = slurp(trace);
    CHECK(trace_text.rfind("iteration,loss\n", 0) == 0);
    CHECK(std::count(trace_text.begin(), trace_text.end(), '\n') >= 3);

    // Starving the descent is a runtime failure, not a usage error.
    r = run("insert --model " + model.string() + " --layer 1 --trigger-file " +
            triggers.string() + " --payload reverse --max-iters 2 -o " + out.string());
    CHECK(r.code == 1);
    CHECK(r.err.find("did not reach tolerance") != std::string::npos);
}

TEST_CASE("an epoch-starved training run exits with code 1")
{
    const RunResult r = run("train --toy classification --seed 7 --epochs 5 -o " +
                            (work_dir() / "undertrained.json").string());
    CHECK(r.code == 1);
    CHECK(r.err.find("did not reach stop loss") != std::string::npos);
}
