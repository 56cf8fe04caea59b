#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "json.hpp"
#include "photonstat/io.hpp"
#include "photonstat/simulate.hpp"

using namespace photonstat;

namespace {

Acquisition sample_acquisition(bool pulsed, bool with_seed) {
    Acquisition acq;
    acq.duration_ps = 1'000'000;
    if (pulsed) {
        acq.mode = ExcitationMode::pulsed(100'000);
        acq.channels.insert(kTriggerChannel);
        for (time_ps t = 0; t < acq.duration_ps; t += 100'000)
            acq.records.push_back({t, kTriggerChannel});
    } else {
        acq.mode = ExcitationMode::cw(250.0);
    }
    std::mt19937_64 rng(19);
    for (int i = 0; i < 200; ++i)
        acq.records.push_back({rng() % acq.duration_ps, std::uint8_t(1 + rng() % 2)});
    std::sort(acq.records.begin(), acq.records.end(), record_less);
    if (with_seed) acq.seed = 424242;
    return acq;
}

}  // namespace

TEST_CASE("text format round-trips byte-identically") {
    for (bool pulsed : {false, true}) {
        const auto acq = sample_acquisition(pulsed, true);
        std::ostringstream first;
        write_acquisition_text(acq, first);
        std::istringstream in(first.str());
        const auto back = read_acquisition_text(in);
        CHECK(back.records == acq.records);
        CHECK(back.duration_ps == acq.duration_ps);
        CHECK(back.mode.is_pulsed() == pulsed);
        CHECK(back.seed == acq.seed);
        std::ostringstream second;
        write_acquisition_text(back, second);
        CHECK(first.str() == second.str());
    }
}

TEST_CASE("binary format round-trips bit-exactly") {
    const auto acq = sample_acquisition(true, true);
    std::ostringstream first(std::ios::binary);
    write_acquisition_binary(acq, first);
    std::istringstream in(first.str(), std::ios::binary);
    const auto back = read_acquisition_binary(in);
    CHECK(back.records == acq.records);
    CHECK(back.mode.tau_rep_ps == acq.mode.tau_rep_ps);
    CHECK(back.seed == acq.seed);
    std::ostringstream second(std::ios::binary);
    write_acquisition_binary(back, second);
    CHECK(first.str() == second.str());
}

TEST_CASE("empty acquisition round-trips in both formats") {
    Acquisition acq;
    acq.duration_ps = 500;
    std::ostringstream t;
    write_acquisition_text(acq, t);
    std::istringstream ti(t.str());
    CHECK(read_acquisition_text(ti).records.empty());
    std::ostringstream b(std::ios::binary);
    write_acquisition_binary(acq, b);
    std::istringstream bi(b.str(), std::ios::binary);
    CHECK(read_acquisition_binary(bi).records.empty());
}

TEST_CASE("truncated binary input names the byte offset") {
    const auto acq = sample_acquisition(false, false);
    std::ostringstream os(std::ios::binary);
    write_acquisition_binary(acq, os);
    auto bytes = os.str();
    bytes.resize(bytes.size() - 5);
    std::istringstream in(bytes, std::ios::binary);
    CHECK_THROWS_WITH_AS(read_acquisition_binary(in), doctest::Contains("byte offset"),
                         data_error);

    std::istringstream tiny(bytes.substr(0, 7), std::ios::binary);
    CHECK_THROWS_WITH_AS(read_acquisition_binary(tiny), doctest::Contains("byte offset"),
                         data_error);
}

TEST_CASE("text reader rejects channels beyond the 1-byte limit") {
    std::istringstream in("# duration_ps=1000\n# mode=cw\n300,10\n");
    CHECK_THROWS_WITH_AS(read_acquisition_text(in), doctest::Contains("1-byte"), data_error);
}

TEST_CASE("text reader reports the offending line") {
    std::istringstream in("# duration_ps=1000\n# mode=cw\n1,10\nbogus line\n");
    CHECK_THROWS_WITH_AS(read_acquisition_text(in), doctest::Contains("line 4"), data_error);
}

TEST_CASE("q-series CSV and JSON round-trip") {
    QSeries qs;
    qs.entries.push_back({100'000, -1.375e-4, 2.5e-5, 999'999, 20});
    qs.entries.push_back({200'000, 3.25e-4, 1.5e-5, 499'999, 20});
    std::ostringstream os;
    write_qseries_csv(qs, os, {{"command", "q"}});
    std::istringstream in(os.str());
    const auto back = read_qseries_csv(in);
    REQUIRE(back.entries.size() == 2);
    CHECK(back.entries[0].q_mean == qs.entries[0].q_mean);
    CHECK(back.entries[1].n_windows == qs.entries[1].n_windows);
    CHECK(os.str().find("# command=q") != std::string::npos);

    const auto j = nlohmann::json::parse(to_json_string(qs));
    CHECK(j["entries"].size() == 2);
    CHECK(j["entries"][0]["q_mean"].get<double>() == qs.entries[0].q_mean);
}

TEST_CASE("correlation histogram CSV keeps its normalisation metadata") {
    CorrelationHistogram h;
    h.edges_ps = {100.0, 1'000.0, 10'000.0};
    h.counts = {40, 400};
    h.folded = true;
    h.n_a = 1'000;
    h.n_b = 2'000;
    h.duration_ps = 1'000'000'000;
    std::ostringstream os;
    write_histogram_csv(h, os);
    std::istringstream in(os.str());
    const auto back = read_histogram_csv(in);
    CHECK(back.counts == h.counts);
    CHECK(back.edges_ps == h.edges_ps);
    CHECK(back.n_a == h.n_a);
    CHECK(back.folded == h.folded);
    CHECK(back.normalized() == h.normalized());

    const auto j = nlohmann::json::parse(to_json_string(h));
    CHECK(j["counts"][1].get<std::uint64_t>() == 400);
}

TEST_CASE("delay histogram CSV round-trip") {
    DelayHistogram h;
    h.bin_width_ps = 100;
    h.counts = {5, 9, 2, 0, 1};
    h.n_triggers = 10;
    h.n_detections = 17;
    h.duration_ps = 1'000'000;
    std::ostringstream os;
    write_delay_histogram_csv(h, os);
    std::istringstream in(os.str());
    const auto back = read_delay_histogram_csv(in);
    CHECK(back.counts == h.counts);
    CHECK(back.bin_width_ps == h.bin_width_ps);
    CHECK(back.n_triggers == h.n_triggers);
}

TEST_CASE("xy table reader skips headers and column names") {
    std::istringstream in("# fit input\npower_uw,rate_hz\n10,100.5\n20,180.25\n");
    const auto xy = read_xy_csv(in);
    REQUIRE(xy.size() == 2);
    CHECK(xy[1].first == 20.0);
    CHECK(xy[1].second == 180.25);
}

TEST_CASE("17-digit reals survive the CSV round trip exactly") {
    const double v = -1.2345678901234567e-4;
    CHECK(std::strtod(format_real(v).c_str(), nullptr) == v);
}

TEST_CASE("atomic write leaves no temporary behind") {
    namespace fs = std::filesystem;
    const auto dir = fs::temp_directory_path() / "photonstat_io_test";
    fs::create_directories(dir);
    const auto path = dir / "out.csv";
    write_file_atomic(path, [](std::ostream& os) { os << "payload\n"; });
    CHECK(fs::exists(path));
    CHECK(!fs::exists(dir / "out.csv.tmp"));
    std::ifstream check(path);
    std::string line;
    std::getline(check, line);
    CHECK(line == "payload");
    fs::remove_all(dir);
}

TEST_CASE("fit result JSON carries nulls for unavailable errors") {
    FitResult fr;
    fr.params.push_back({"tau", 2'700.0, "ps", 13.0, true});
    fr.params.push_back({"alpha", 1e-8, "1/(ps uW)", 0.0, false});
    fr.rss = 1.5;
    fr.initial_rss = 10.0;
    fr.converged = true;
    fr.iterations = 12;
    const auto j = nlohmann::json::parse(to_json_string(fr));
    CHECK(j["parameters"][0]["std_error"].get<double>() == 13.0);
    CHECK(j["parameters"][1]["std_error"].is_null());
    CHECK(j["converged"].get<bool>());
}
