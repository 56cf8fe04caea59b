#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "photonstat/io.hpp"
#include "photonstat/simulate.hpp"
#include "photonstat/stats.hpp"

namespace fs = std::filesystem;
using namespace photonstat;

namespace {

const std::string kCli = PHOTONSTAT_CLI_PATH;

struct RunResult {
    int exit_code = -1;
    std::string output;  // stdout + stderr
};

RunResult run_cli(const std::string& args) {
    static int counter = 0;
    const auto log = fs::temp_directory_path() /
                     ("photonstat_cli_" + std::to_string(counter++) + ".log");
    const std::string cmd = kCli + " " + args + " > " + log.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    RunResult r;
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    std::ifstream is(log);
    std::stringstream ss;
    ss << is.rdbuf();
    r.output = ss.str();
    fs::remove(log);
    return r;
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("photonstat_test_" + std::to_string(::getpid()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

}  // namespace

TEST_CASE("simulate then q is byte-identical across reruns") {
    TempDir dir;
    const std::string sim_args = "simulate --mode cw --duration 200ms --seed 7 --tau12 205ns "
                                 "--tau21 1.6ns --tau23 1.4ns --tau31 420ns --efficiency 0.25 "
                                 "--out ";
    const std::string q_args = " --T 100ns,1us,10us --out ";

    CHECK(run_cli(sim_args + dir.file("a1.txt")).exit_code == 0);
    CHECK(run_cli(sim_args + dir.file("a2.txt")).exit_code == 0);
    CHECK(slurp(dir.file("a1.txt")) == slurp(dir.file("a2.txt")));

    CHECK(run_cli("q --input " + dir.file("a1.txt") + q_args + dir.file("q1.csv")).exit_code ==
          0);
    CHECK(run_cli("q --input " + dir.file("a1.txt") + q_args + dir.file("q2.csv")).exit_code ==
          0);
    const auto q1 = slurp(dir.file("q1.csv"));
    CHECK(q1 == slurp(dir.file("q2.csv")));
    CHECK(q1.find("# photonstat_version=") != std::string::npos);
    CHECK(q1.find("# command=q") != std::string::npos);
    CHECK(q1.find("window_ps,q_mean,q_std,n_windows,n_acquisitions") != std::string::npos);
}

TEST_CASE("convert round-trips a large file bit-exactly") {
    TempDir dir;
    // A million-record acquisition via the library, then text -> binary -> text.
    TimestampSeries emissions{10'000'000'000, {}};
    emissions.times.reserve(2'000'000);
    std::mt19937_64 rng(5);
    time_ps t = 0;
    while (emissions.times.size() < 2'000'000) {
        t += 1 + rng() % 10'000;
        if (t >= emissions.duration_ps) break;
        emissions.times.push_back(t);
    }
    auto acq = detection_chain(emissions, {0.6, 0, 0.5, 0.0}, 77);
    acq.seed = 77;
    REQUIRE(acq.records.size() > 1'000'000);
    save_acquisition(acq, dir.file("big.txt"));

    CHECK(run_cli("convert --input " + dir.file("big.txt") + " --output " +
                  dir.file("big.bin"))
              .exit_code == 0);
    CHECK(run_cli("convert --input " + dir.file("big.bin") + " --output " +
                  dir.file("big2.txt"))
              .exit_code == 0);
    CHECK(slurp(dir.file("big.txt")) == slurp(dir.file("big2.txt")));

    // Empty acquisition round-trips too.
    Acquisition empty;
    empty.duration_ps = 1'000;
    save_acquisition(empty, dir.file("empty.txt"));
    CHECK(run_cli("convert --input " + dir.file("empty.txt") + " --output " +
                  dir.file("empty.bin"))
              .exit_code == 0);
    CHECK(run_cli("convert --input " + dir.file("empty.bin") + " --output " +
                  dir.file("empty2.txt"))
              .exit_code == 0);
    CHECK(slurp(dir.file("empty.txt")) == slurp(dir.file("empty2.txt")));
}

TEST_CASE("truncated binary input exits 2 and names the byte offset") {
    TempDir dir;
    Acquisition acq;
    acq.duration_ps = 1'000'000;
    for (time_ps t = 0; t < 1'000'000; t += 10'000)
        acq.records.push_back({t, std::uint8_t(1)});
    save_acquisition(acq, dir.file("ok.bin"));
    auto bytes = slurp(dir.file("ok.bin"));
    bytes.resize(bytes.size() - 4);
    std::ofstream(dir.file("cut.bin"), std::ios::binary) << bytes;

    const auto r = run_cli("q --input " + dir.file("cut.bin") + " --T 100ns --out " +
                           dir.file("q.csv"));
    CHECK(r.exit_code == 2);
    CHECK(r.output.find("byte offset") != std::string::npos);
}

TEST_CASE("record with channel 300 in text input exits 2") {
    TempDir dir;
    std::ofstream(dir.file("bad.txt")) << "# duration_ps=1000\n# mode=cw\n300,10\n";
    const auto r = run_cli("convert --input " + dir.file("bad.txt") + " --output " +
                           dir.file("bad.bin"));
    CHECK(r.exit_code == 2);
    CHECK(r.output.find("1-byte") != std::string::npos);
}

TEST_CASE("conflicting or missing flags exit 1") {
    TempDir dir;
    CHECK(run_cli("q --T 100ns --out " + dir.file("x.csv")).exit_code == 1);  // no input
    std::ofstream(dir.file("a.txt")) << "# duration_ps=1000\n# mode=cw\n1,10\n";
    const auto r = run_cli("g2 --input " + dir.file("a.txt") + " --max-lag 100ns "
                           "--bin-width 1ns --log-bins 10 --out " + dir.file("g.csv"));
    CHECK(r.exit_code == 1);
    CHECK(run_cli("nonsense").exit_code == 1);
}

TEST_CASE("filter subcommand matches trigger_filter semantics") {
    TempDir dir;
    Acquisition acq;
    acq.duration_ps = 1'000'000;
    acq.mode = ExcitationMode::pulsed(100'000);
    acq.channels.insert(kTriggerChannel);
    for (time_ps t = 0; t < acq.duration_ps; t += 100'000) {
        acq.records.push_back({t, kTriggerChannel});
        acq.records.push_back({t + 8'000, std::uint8_t(1)});
        acq.records.push_back({t + 13'000, std::uint8_t(2)});
    }
    std::sort(acq.records.begin(), acq.records.end(), record_less);
    save_acquisition(acq, dir.file("p.txt"));

    CHECK(run_cli("filter --input " + dir.file("p.txt") + " --window 7:12ns --out " +
                  dir.file("f.txt"))
              .exit_code == 0);
    const auto filtered = load_acquisition(dir.file("f.txt"));
    const auto expected = trigger_filter(acq, 7'000, 5'000);
    CHECK(filtered.records == expected.records);
    for (const auto& r : filtered.records)
        if (r.channel != kTriggerChannel) CHECK(r.time % 100'000 == 8'000);
}

TEST_CASE("model eval writes a curve with headers") {
    TempDir dir;
    std::ofstream(dir.file("p.cfg")) << "# analytic CW Q parameters\n"
                                     << "a=0.3\nt1_ps=2700\nt2_ps=200000\nmean_rate_hz=34000\n";
    const auto r = run_cli("model --name analytic-cw-q --params " + dir.file("p.cfg") +
                           " --grid 1ns:10us:log:50 --out " + dir.file("curve.csv"));
    CHECK(r.exit_code == 0);
    const auto curve = slurp(dir.file("curve.csv"));
    CHECK(curve.find("# command=model analytic-cw-q") != std::string::npos);
    CHECK(curve.find("T_ps,value") != std::string::npos);
    // 50 grid rows plus headers.
    CHECK(std::count(curve.begin(), curve.end(), '\n') >= 52);
}

TEST_CASE("fit saturation end to end") {
    TempDir dir;
    {
        std::ofstream os(dir.file("sat.csv"));
        os << "power_uw,rate_hz\n";
        for (double p = 20; p <= 1'200; p *= 1.3) {
            const double rate = 120'000.0 * p / (p + 240.0) + 400.0;
            os << p << ',' << rate << '\n';
        }
    }
    const auto r = run_cli("fit saturation --input " + dir.file("sat.csv") + " --out-json " +
                           dir.file("fit.json") + " --out-curve " + dir.file("curve.csv"));
    CHECK(r.exit_code == 0);
    const auto js = slurp(dir.file("fit.json"));
    CHECK(js.find("\"P_sat\"") != std::string::npos);
    CHECK(js.find("\"converged\": true") != std::string::npos);
    CHECK(fs::exists(dir.file("curve.csv")));
}

TEST_CASE("g2zero and lifetime run on simulated pulsed data") {
    TempDir dir;
    CHECK(run_cli("simulate --mode pulsed --tau-rep 100ns --duration 2s --seed 3 "
                  "--tau12 100ps --tau21 2.7ns --tau23 2.4ns --tau31 420ns "
                  "--efficiency 0.01 --out " + dir.file("p.bin"))
              .exit_code == 0);
    const auto z = run_cli("g2zero --input " + dir.file("p.bin") + " --half-width 10ns --out " +
                           dir.file("z.json"));
    CHECK(z.exit_code == 0);
    CHECK(slurp(dir.file("z.json")).find("\"g2_zero\"") != std::string::npos);

    CHECK(run_cli("lifetime --input " + dir.file("p.bin") + " --bin-width 100ps --out " +
                  dir.file("lt.csv"))
              .exit_code == 0);
    const auto fit = run_cli("fit lifetime --input " + dir.file("lt.csv") + " --out-json " +
                             dir.file("ltfit.json"));
    CHECK(fit.exit_code == 0);
    CHECK(slurp(dir.file("ltfit.json")).find("\"tau\"") != std::string::npos);
}

TEST_CASE("sweep-filter produces one row per width") {
    TempDir dir;
    CHECK(run_cli("simulate --mode pulsed --tau-rep 100ns --duration 1s --seed 11 "
                  "--tau12 100ps --tau21 2.7ns --efficiency 0.02 --out " + dir.file("p.txt"))
              .exit_code == 0);
    const auto r = run_cli("sweep-filter --input " + dir.file("p.txt") +
                           " --widths 1ns,5ns,20ns --include-raw --out " + dir.file("sw.csv"));
    CHECK(r.exit_code == 0);
    const auto csv = slurp(dir.file("sw.csv"));
    CHECK(csv.find("filter_width_ps,q_mean,q_std,n_acquisitions") != std::string::npos);
    CHECK(std::count(csv.begin(), csv.end(), '\n') >= 4 + 4);  // headers + 4 rows
}

TEST_CASE("subcommands do not mutate their inputs") {
    TempDir dir;
    CHECK(run_cli("simulate --mode cw --duration 100ms --seed 1 --tau12 205ns --tau21 1.6ns "
                  "--efficiency 0.3 --out " + dir.file("in.txt"))
              .exit_code == 0);
    const auto before = slurp(dir.file("in.txt"));
    CHECK(run_cli("q --input " + dir.file("in.txt") + " --T 1us --out " + dir.file("q.csv"))
              .exit_code == 0);
    CHECK(run_cli("pnd --input " + dir.file("in.txt") + " --T 1us --out " + dir.file("p.csv"))
              .exit_code == 0);
    CHECK(slurp(dir.file("in.txt")) == before);
}
