#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "photonstat/fit.hpp"
#include "photonstat/stats.hpp"
#include "photonstat/types.hpp"

namespace photonstat {

enum class AcquisitionFormat { text, binary };

// Timestamp table text format: '#'-prefixed header lines (key=value), then one
// 'channel,time_ps' record per line. Writers emit a canonical header key
// order so that round-trips are byte-identical.
void write_acquisition_text(const Acquisition& acq, std::ostream& os);
Acquisition read_acquisition_text(std::istream& is);

// Compact binary format: 16-byte magic/header, a little-endian metadata
// block, then repeated records of 1-byte channel + 8-byte little-endian
// picoseconds. Truncation errors name the failing byte offset.
void write_acquisition_binary(const Acquisition& acq, std::ostream& os);
Acquisition read_acquisition_binary(std::istream& is);

// Path-level helpers; format inferred from the extension (.bin / .pstb =
// binary, everything else text) unless given explicitly.
AcquisitionFormat format_for_path(const std::filesystem::path& path);
Acquisition load_acquisition(const std::filesystem::path& path);
Acquisition load_acquisition(const std::filesystem::path& path, AcquisitionFormat fmt);
void save_acquisition(const Acquisition& acq, const std::filesystem::path& path);
void save_acquisition(const Acquisition& acq, const std::filesystem::path& path,
                      AcquisitionFormat fmt);

// ---------------------------------------------------------------------------
// CSV / JSON serialisation of analysis results. Integer fields are bit-exact;
// reals carry 17 significant digits.

using HeaderKV = std::vector<std::pair<std::string, std::string>>;

std::string format_real(double v);  // %.17g

void write_qseries_csv(const QSeries& qs, std::ostream& os, const HeaderKV& header = {});
QSeries read_qseries_csv(std::istream& is);

void write_histogram_csv(const CorrelationHistogram& h, std::ostream& os,
                         const HeaderKV& header = {});
CorrelationHistogram read_histogram_csv(std::istream& is);

void write_delay_histogram_csv(const DelayHistogram& h, std::ostream& os,
                               const HeaderKV& header = {});
DelayHistogram read_delay_histogram_csv(std::istream& is);

void write_pnd_csv(const PhotonNumberDistribution& p, std::ostream& os,
                   const HeaderKV& header = {});

// Generic two-column numeric table (e.g. power,rate points for the
// saturation fit); '#' lines and the column-name row are skipped.
std::vector<std::pair<double, double>> read_xy_csv(std::istream& is);

std::string to_json_string(const QSeries& qs);
std::string to_json_string(const CorrelationHistogram& h);
std::string to_json_string(const PhotonNumberDistribution& p);
std::string to_json_string(const DelayHistogram& h);
std::string to_json_string(const FitResult& fr);

// Write via a temporary file and rename, so outputs appear atomically.
void write_file_atomic(const std::filesystem::path& path,
                       const std::function<void(std::ostream&)>& writer);

}  // namespace photonstat
