#include "photonstat/io.hpp"

#include <algorithm>
#include <array>
#include <cinttypes>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include "json.hpp"

namespace photonstat {

namespace {

constexpr char kBinaryMagic[8] = {'P', 'H', 'S', 'T', 'T', 'S', '0', '1'};
constexpr std::uint8_t kFlagPulsed = 1;
constexpr std::uint8_t kFlagSeed = 2;
constexpr std::uint8_t kFlagPower = 4;

void append_u64(std::string& buf, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf.push_back(char((v >> (8 * i)) & 0xff));
}

void append_f64(std::string& buf, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    append_u64(buf, bits);
}

std::uint64_t parse_u64_le(const unsigned char* p) {
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
    return v;
}

[[noreturn]] void text_fail(std::size_t line, const std::string& what) {
    throw data_error("line " + std::to_string(line) + ": " + what);
}

}  // namespace

std::string format_real(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_acquisition_text(const Acquisition& acq, std::ostream& os) {
    os << "# photonstat timestamps v1\n";
    os << "# duration_ps=" << acq.duration_ps << "\n";
    os << "# mode=" << (acq.mode.is_pulsed() ? "pulsed" : "cw") << "\n";
    if (acq.mode.is_pulsed()) {
        os << "# tau_rep_ps=" << acq.mode.tau_rep_ps << "\n";
        os << "# trigger_channel=" << int(acq.mode.trigger_channel) << "\n";
    } else if (acq.mode.power_uw != 0) {
        os << "# power_uw=" << format_real(acq.mode.power_uw) << "\n";
    }
    if (acq.seed) os << "# seed=" << *acq.seed << "\n";
    for (const auto& r : acq.records) os << int(r.channel) << ',' << r.time << '\n';
}

Acquisition read_acquisition_text(std::istream& is) {
    Acquisition acq;
    std::map<std::string, std::string> header;
    std::string line;
    std::size_t lineno = 0;
    bool pulsed = false;

    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        if (line[0] == '#') {
            const auto eq = line.find('=');
            if (eq == std::string::npos) continue;  // free-form comment
            std::string key = line.substr(1, eq - 1);
            key.erase(0, key.find_first_not_of(" \t"));
            key.erase(key.find_last_not_of(" \t") + 1);
            header[key] = line.substr(eq + 1);
            continue;
        }
        const auto comma = line.find(',');
        if (comma == std::string::npos) text_fail(lineno, "expected 'channel,time_ps'");
        errno = 0;
        char* end = nullptr;
        const unsigned long ch = std::strtoul(line.c_str(), &end, 10);
        if (end != line.c_str() + comma || errno)
            text_fail(lineno, "bad channel field '" + line.substr(0, comma) + "'");
        if (ch > 255)
            text_fail(lineno, "channel " + std::to_string(ch) +
                                  " exceeds the 1-byte binary channel limit");
        errno = 0;
        const unsigned long long t = std::strtoull(line.c_str() + comma + 1, &end, 10);
        if (end == line.c_str() + comma + 1 || *end != '\0' || errno)
            text_fail(lineno, "bad time field '" + line.substr(comma + 1) + "'");
        acq.records.push_back({time_ps(t), std::uint8_t(ch)});
        acq.channels.insert(std::uint8_t(ch));
    }

    auto get = [&](const char* key) -> const std::string* {
        auto it = header.find(key);
        return it == header.end() ? nullptr : &it->second;
    };
    if (const auto* v = get("duration_ps"))
        acq.duration_ps = std::strtoull(v->c_str(), nullptr, 10);
    else
        throw data_error("missing duration_ps header");
    if (const auto* v = get("mode")) pulsed = (*v == "pulsed");
    if (pulsed) {
        const auto* rep = get("tau_rep_ps");
        if (!rep) throw data_error("pulsed file missing tau_rep_ps header");
        std::uint8_t trig = kTriggerChannel;
        if (const auto* t = get("trigger_channel"))
            trig = std::uint8_t(std::strtoul(t->c_str(), nullptr, 10));
        acq.mode = ExcitationMode::pulsed(std::strtoull(rep->c_str(), nullptr, 10), trig);
        acq.channels.insert(trig);
    } else {
        double power = 0;
        if (const auto* p = get("power_uw")) power = std::strtod(p->c_str(), nullptr);
        acq.mode = ExcitationMode::cw(power);
    }
    if (const auto* v = get("seed")) acq.seed = std::strtoull(v->c_str(), nullptr, 10);

    std::sort(acq.records.begin(), acq.records.end(), record_less);
    acq.validate();
    return acq;
}

void write_acquisition_binary(const Acquisition& acq, std::ostream& os) {
    std::uint8_t flags = 0;
    if (acq.mode.is_pulsed()) flags |= kFlagPulsed;
    if (acq.seed) flags |= kFlagSeed;
    if (!acq.mode.is_pulsed() && acq.mode.power_uw != 0) flags |= kFlagPower;

    std::string meta;
    append_u64(meta, acq.duration_ps);
    if (flags & kFlagPulsed) append_u64(meta, acq.mode.tau_rep_ps);
    if (flags & kFlagSeed) append_u64(meta, *acq.seed);
    if (flags & kFlagPower) append_f64(meta, acq.mode.power_uw);

    std::string head(kBinaryMagic, sizeof kBinaryMagic);
    head.push_back(char(1));  // version
    head.push_back(char(flags));
    head.push_back(char(acq.mode.is_pulsed() ? acq.mode.trigger_channel : 0));
    head.push_back(char(0));
    const auto meta_len = std::uint32_t(meta.size());
    for (int i = 0; i < 4; ++i) head.push_back(char((meta_len >> (8 * i)) & 0xff));
    os.write(head.data(), std::streamsize(head.size()));
    os.write(meta.data(), std::streamsize(meta.size()));

    std::string rec;
    rec.reserve(9);
    for (const auto& r : acq.records) {
        rec.clear();
        rec.push_back(char(r.channel));
        append_u64(rec, r.time);
        os.write(rec.data(), 9);
    }
}

Acquisition read_acquisition_binary(std::istream& is) {
    auto read_exact = [&](char* dst, std::size_t n, std::uint64_t offset, const char* what) {
        is.read(dst, std::streamsize(n));
        if (std::size_t(is.gcount()) != n)
            throw data_error("truncated binary file: expected " + std::string(what) +
                             " at byte offset " + std::to_string(offset + std::uint64_t(is.gcount())));
    };

    std::uint64_t offset = 0;
    std::array<char, 16> head{};
    read_exact(head.data(), head.size(), offset, "16-byte header");
    offset += head.size();
    if (std::memcmp(head.data(), kBinaryMagic, sizeof kBinaryMagic) != 0)
        throw data_error("bad magic: not a photonstat binary timestamp file");
    if (head[8] != 1) throw data_error("unsupported binary format version");
    const auto flags = std::uint8_t(head[9]);
    const auto trigger = std::uint8_t(head[10]);
    std::uint32_t meta_len = 0;
    for (int i = 3; i >= 0; --i) meta_len = (meta_len << 8) | std::uint8_t(head[12 + i]);

    std::string meta(meta_len, '\0');
    read_exact(meta.data(), meta_len, offset, "metadata block");
    offset += meta_len;
    std::size_t expected = 8 + 8 * std::size_t((flags & kFlagPulsed) != 0) +
                           8 * std::size_t((flags & kFlagSeed) != 0) +
                           8 * std::size_t((flags & kFlagPower) != 0);
    if (meta_len != expected) throw data_error("metadata length does not match header flags");

    Acquisition acq;
    const auto* mp = reinterpret_cast<const unsigned char*>(meta.data());
    acq.duration_ps = parse_u64_le(mp);
    mp += 8;
    if (flags & kFlagPulsed) {
        acq.mode = ExcitationMode::pulsed(parse_u64_le(mp), trigger);
        acq.channels.insert(trigger);
        mp += 8;
    }
    if (flags & kFlagSeed) {
        acq.seed = parse_u64_le(mp);
        mp += 8;
    }
    if (flags & kFlagPower) {
        const std::uint64_t bits = parse_u64_le(mp);
        double power;
        std::memcpy(&power, &bits, 8);
        acq.mode.power_uw = power;
        mp += 8;
    }

    char rec[9];
    while (true) {
        is.read(rec, 9);
        const auto got = std::size_t(is.gcount());
        if (got == 0) break;
        if (got != 9)
            throw data_error("truncated binary file: partial record at byte offset " +
                             std::to_string(offset + got));
        acq.records.push_back(
            {parse_u64_le(reinterpret_cast<const unsigned char*>(rec + 1)),
             std::uint8_t(rec[0])});
        acq.channels.insert(std::uint8_t(rec[0]));
        offset += 9;
    }
    std::sort(acq.records.begin(), acq.records.end(), record_less);
    acq.validate();
    return acq;
}

AcquisitionFormat format_for_path(const std::filesystem::path& path) {
    const auto ext = path.extension().string();
    return (ext == ".bin" || ext == ".pstb") ? AcquisitionFormat::binary
                                             : AcquisitionFormat::text;
}

Acquisition load_acquisition(const std::filesystem::path& path, AcquisitionFormat fmt) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw data_error("cannot open " + path.string());
    return fmt == AcquisitionFormat::binary ? read_acquisition_binary(f)
                                            : read_acquisition_text(f);
}

Acquisition load_acquisition(const std::filesystem::path& path) {
    return load_acquisition(path, format_for_path(path));
}

void save_acquisition(const Acquisition& acq, const std::filesystem::path& path,
                      AcquisitionFormat fmt) {
    write_file_atomic(path, [&](std::ostream& os) {
        if (fmt == AcquisitionFormat::binary)
            write_acquisition_binary(acq, os);
        else
            write_acquisition_text(acq, os);
    });
}

void save_acquisition(const Acquisition& acq, const std::filesystem::path& path) {
    save_acquisition(acq, path, format_for_path(path));
}

// ---------------------------------------------------------------------------

namespace {

void write_header(std::ostream& os, const HeaderKV& header) {
    for (const auto& [k, v] : header) os << "# " << k << '=' << v << '\n';
}

// Parses "# key=value" headers and data rows of a simple CSV.
struct CsvTable {
    std::map<std::string, std::string> header;
    std::vector<std::vector<std::string>> rows;

    double header_real(const std::string& key, double fallback) const {
        auto it = header.find(key);
        return it == header.end() ? fallback : std::strtod(it->second.c_str(), nullptr);
    }
    std::uint64_t header_u64(const std::string& key, std::uint64_t fallback) const {
        auto it = header.find(key);
        return it == header.end() ? fallback : std::strtoull(it->second.c_str(), nullptr, 10);
    }
    bool has(const std::string& key) const { return header.count(key) != 0; }
};

CsvTable read_csv(std::istream& is) {
    CsvTable t;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        if (line[0] == '#') {
            const auto eq = line.find('=');
            if (eq == std::string::npos) continue;
            std::string key = line.substr(1, eq - 1);
            key.erase(0, key.find_first_not_of(" \t"));
            key.erase(key.find_last_not_of(" \t") + 1);
            t.header[key] = line.substr(eq + 1);
            continue;
        }
        if (!line.empty() && !(std::isdigit(line[0]) || line[0] == '-' || line[0] == '+' ||
                               line[0] == '.'))
            continue;  // column-name row
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string field;
        while (std::getline(ss, field, ',')) fields.push_back(field);
        if (!fields.empty()) t.rows.push_back(std::move(fields));
    }
    return t;
}

double field_real(const std::vector<std::string>& row, std::size_t i, std::size_t lineno) {
    if (i >= row.size()) text_fail(lineno, "missing column " + std::to_string(i));
    return std::strtod(row[i].c_str(), nullptr);
}

}  // namespace

void write_qseries_csv(const QSeries& qs, std::ostream& os, const HeaderKV& header) {
    write_header(os, header);
    os << "window_ps,q_mean,q_std,n_windows,n_acquisitions\n";
    for (const auto& e : qs.entries)
        os << e.window_ps << ',' << format_real(e.q_mean) << ',' << format_real(e.q_std) << ','
           << e.n_windows << ',' << e.n_acquisitions << '\n';
}

QSeries read_qseries_csv(std::istream& is) {
    const CsvTable t = read_csv(is);
    QSeries qs;
    std::size_t lineno = 0;
    for (const auto& row : t.rows) {
        ++lineno;
        QSeriesEntry e;
        e.window_ps = time_ps(field_real(row, 0, lineno));
        e.q_mean = field_real(row, 1, lineno);
        e.q_std = row.size() > 2 ? field_real(row, 2, lineno) : 0.0;
        e.n_windows = row.size() > 3 ? std::uint64_t(field_real(row, 3, lineno)) : 0;
        e.n_acquisitions = row.size() > 4 ? std::uint32_t(field_real(row, 4, lineno)) : 1;
        qs.entries.push_back(e);
    }
    if (qs.entries.empty()) throw data_error("empty Q series file");
    return qs;
}

void write_histogram_csv(const CorrelationHistogram& h, std::ostream& os,
                         const HeaderKV& header) {
    write_header(os, header);
    os << "# n_a=" << h.n_a << "\n# n_b=" << h.n_b << "\n# duration_ps=" << h.duration_ps
       << "\n# folded=" << (h.folded ? 1 : 0) << '\n';
    os << "bin_left_ps,bin_right_ps,counts,normalized\n";
    const auto norm = h.normalized();
    for (std::size_t i = 0; i < h.counts.size(); ++i)
        os << format_real(h.edges_ps[i]) << ',' << format_real(h.edges_ps[i + 1]) << ','
           << h.counts[i] << ',' << format_real(norm[i]) << '\n';
}

CorrelationHistogram read_histogram_csv(std::istream& is) {
    const CsvTable t = read_csv(is);
    for (const char* key : {"n_a", "n_b", "duration_ps", "folded"})
        if (!t.has(key))
            throw data_error(std::string("histogram file missing '") + key + "' header");
    CorrelationHistogram h;
    h.n_a = t.header_u64("n_a", 0);
    h.n_b = t.header_u64("n_b", 0);
    h.duration_ps = t.header_u64("duration_ps", 0);
    h.folded = t.header_u64("folded", 0) != 0;
    std::size_t lineno = 0;
    for (const auto& row : t.rows) {
        ++lineno;
        const double left = field_real(row, 0, lineno);
        const double right = field_real(row, 1, lineno);
        if (h.edges_ps.empty()) h.edges_ps.push_back(left);
        h.edges_ps.push_back(right);
        h.counts.push_back(std::uint64_t(field_real(row, 2, lineno)));
    }
    if (h.counts.empty()) throw data_error("empty histogram file");
    return h;
}

void write_delay_histogram_csv(const DelayHistogram& h, std::ostream& os,
                               const HeaderKV& header) {
    write_header(os, header);
    os << "# bin_width_ps=" << h.bin_width_ps << "\n# n_triggers=" << h.n_triggers
       << "\n# n_detections=" << h.n_detections << "\n# duration_ps=" << h.duration_ps << '\n';
    os << "bin_left_ps,bin_right_ps,counts,normalized\n";
    const double total = double(std::max<std::uint64_t>(h.n_detections, 1));
    for (std::size_t i = 0; i < h.counts.size(); ++i)
        os << i * h.bin_width_ps << ',' << (i + 1) * h.bin_width_ps << ',' << h.counts[i] << ','
           << format_real(double(h.counts[i]) / total) << '\n';
}

DelayHistogram read_delay_histogram_csv(std::istream& is) {
    const CsvTable t = read_csv(is);
    if (!t.has("bin_width_ps")) throw data_error("delay histogram file missing bin_width_ps");
    DelayHistogram h;
    h.bin_width_ps = t.header_u64("bin_width_ps", 0);
    h.n_triggers = t.header_u64("n_triggers", 0);
    h.n_detections = t.header_u64("n_detections", 0);
    h.duration_ps = t.header_u64("duration_ps", 0);
    std::size_t lineno = 0;
    for (const auto& row : t.rows) {
        ++lineno;
        h.counts.push_back(std::uint64_t(field_real(row, 2, lineno)));
    }
    if (h.counts.empty()) throw data_error("empty delay histogram file");
    return h;
}

void write_pnd_csv(const PhotonNumberDistribution& p, std::ostream& os, const HeaderKV& header) {
    write_header(os, header);
    os << "# window_ps=" << p.window_ps << "\n# n_windows=" << p.n_windows
       << "\n# mean=" << format_real(p.mean) << "\n# stddev=" << format_real(p.stddev)
       << "\n# poisson_stddev=" << format_real(p.poisson_stddev) << '\n';
    os << "n,probability\n";
    for (std::size_t i = 0; i < p.probabilities.size(); ++i)
        os << i << ',' << format_real(p.probabilities[i]) << '\n';
}

std::vector<std::pair<double, double>> read_xy_csv(std::istream& is) {
    const CsvTable t = read_csv(is);
    std::vector<std::pair<double, double>> xy;
    std::size_t lineno = 0;
    for (const auto& row : t.rows) {
        ++lineno;
        xy.emplace_back(field_real(row, 0, lineno), field_real(row, 1, lineno));
    }
    if (xy.empty()) throw data_error("empty table");
    return xy;
}

// ---------------------------------------------------------------------------

std::string to_json_string(const QSeries& qs) {
    nlohmann::json j;
    j["entries"] = nlohmann::json::array();
    for (const auto& e : qs.entries)
        j["entries"].push_back({{"window_ps", e.window_ps},
                                {"q_mean", e.q_mean},
                                {"q_std", e.q_std},
                                {"n_windows", e.n_windows},
                                {"n_acquisitions", e.n_acquisitions}});
    return j.dump(2);
}

std::string to_json_string(const CorrelationHistogram& h) {
    nlohmann::json j;
    j["edges_ps"] = h.edges_ps;
    j["counts"] = h.counts;
    j["normalized"] = h.normalized();
    j["folded"] = h.folded;
    j["n_a"] = h.n_a;
    j["n_b"] = h.n_b;
    j["duration_ps"] = h.duration_ps;
    return j.dump(2);
}

std::string to_json_string(const PhotonNumberDistribution& p) {
    nlohmann::json j;
    j["window_ps"] = p.window_ps;
    j["probabilities"] = p.probabilities;
    j["mean"] = p.mean;
    j["stddev"] = p.stddev;
    j["poisson_stddev"] = p.poisson_stddev;
    j["n_windows"] = p.n_windows;
    return j.dump(2);
}

std::string to_json_string(const DelayHistogram& h) {
    nlohmann::json j;
    j["bin_width_ps"] = h.bin_width_ps;
    j["counts"] = h.counts;
    j["n_triggers"] = h.n_triggers;
    j["n_detections"] = h.n_detections;
    j["duration_ps"] = h.duration_ps;
    return j.dump(2);
}

std::string to_json_string(const FitResult& fr) {
    nlohmann::json j;
    j["parameters"] = nlohmann::json::array();
    for (const auto& p : fr.params) {
        nlohmann::json e{{"name", p.name}, {"value", p.value}, {"unit", p.unit}};
        if (p.std_error_ok)
            e["std_error"] = p.std_error;
        else
            e["std_error"] = nullptr;
        j["parameters"].push_back(e);
    }
    j["rss"] = fr.rss;
    j["initial_rss"] = fr.initial_rss;
    j["converged"] = fr.converged;
    j["iterations"] = fr.iterations;
    return j.dump(2);
}

void write_file_atomic(const std::filesystem::path& path,
                       const std::function<void(std::ostream&)>& writer) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary);
        if (!os) throw data_error("cannot write " + tmp.string());
        writer(os);
        if (!os) throw data_error("write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

}  // namespace photonstat
