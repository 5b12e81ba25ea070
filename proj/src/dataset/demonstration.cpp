#include "pileload/dataset/demonstration.hpp"

#include <algorithm>
#include <cmath>

#include "pileload/errors.hpp"
#include "pileload/util/text.hpp"

namespace pileload::data {

namespace {

constexpr std::size_t kColumns = 12;

std::string where(const std::string& id, std::size_t row) {
  return id + ": row " + std::to_string(row) + ": ";
}

void check_record(const Record& r, const std::string& id, std::size_t row) {
  if (!std::isfinite(r.t)) throw DataError(where(id, row) + "non-finite time");
  for (std::size_t c = 0; c < kSensorChannels; ++c) {
    if (!std::isfinite(r.s[c])) {
      throw DataError(where(id, row) + "non-finite " + std::string(kChannelNames[c]));
    }
  }
  for (std::size_t k = 0; k < kControlDims; ++k) {
    if (!(r.u[k] >= -1.0 && r.u[k] <= 1.0)) {
      throw DataError(where(id, row) + std::string(kControlNames[k]) + " = " +
                      util::format_double(r.u[k]) + " outside [-1, 1]");
    }
  }
  if (!(r.fill >= 0.0 && r.fill <= 1.0)) {
    throw DataError(where(id, row) + "fill = " + util::format_double(r.fill) +
                    " outside [0, 1]");
  }
}

void check_timing(const std::vector<Record>& records, double rate, const std::string& id) {
  const double period = 1.0 / rate;
  for (std::size_t i = 1; i < records.size(); ++i) {
    const double dt = records[i].t - records[i - 1].t;
    if (!(dt > 0.0)) throw DataError(where(id, i + 1) + "time not strictly increasing");
    if (std::abs(dt - period) > 0.01 * period) {
      throw DataError(where(id, i + 1) + "time step " + util::format_double(dt) +
                      " s inconsistent with " + util::format_double(rate) + " Hz");
    }
  }
}

}  // namespace

double Demonstration::final_fill() const { return records.empty() ? 0.0 : records.back().fill; }

void Demonstration::validate() const {
  if (!(sample_rate_hz > 0.0) || !std::isfinite(sample_rate_hz)) {
    throw DataError(id + ": sample rate must be positive");
  }
  for (std::size_t i = 0; i < records.size(); ++i) check_record(records[i], id, i + 1);
  check_timing(records, sample_rate_hz, id);
}

std::string to_csv(const Demonstration& demo) {
  std::string out = kDemoCsvHeader;
  out += '\n';
  for (const Record& r : demo.records) {
    out += util::format_double(r.t);
    for (double v : r.s) out += ',' + util::format_double(v);
    for (double v : r.u) out += ',' + util::format_double(v);
    out += ',' + util::format_double(r.fill);
    out += '\n';
  }
  return out;
}

Demonstration parse_demonstration_csv(const std::string& text, const std::string& id) {
  auto lines = util::split(text, '\n');
  if (lines.empty() || util::trim(lines[0]) != kDemoCsvHeader) {
    throw DataError(id + ": missing or wrong header, expected " + kDemoCsvHeader);
  }
  Demonstration demo;
  demo.id = id;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto line = util::trim(lines[i]);
    if (line.empty()) continue;
    const std::size_t row = demo.records.size() + 1;
    const auto fields = util::split(line, ',');
    if (fields.size() != kColumns) {
      throw DataError(where(id, row) + "expected " + std::to_string(kColumns) + " fields, got " +
                      std::to_string(fields.size()));
    }
    std::array<double, kColumns> v{};
    for (std::size_t c = 0; c < kColumns; ++c) {
      const auto parsed = util::parse_double(fields[c]);
      if (!parsed) {
        throw DataError(where(id, row) + "malformed number '" + std::string(fields[c]) + "'");
      }
      v[c] = *parsed;
    }
    Record r;
    r.t = v[0];
    std::copy(v.begin() + 1, v.begin() + 8, r.s.begin());
    std::copy(v.begin() + 8, v.begin() + 11, r.u.begin());
    r.fill = v[11];
    check_record(r, id, row);
    if (!demo.records.empty() && !(r.t > demo.records.back().t)) {
      throw DataError(where(id, row) + "time not strictly increasing");
    }
    demo.records.push_back(r);
  }
  if (demo.records.size() < 2) {
    throw DataError(id + ": need at least two rows to recover the sample rate");
  }
  const double span = demo.records.back().t - demo.records.front().t;
  double rate = static_cast<double>(demo.records.size() - 1) / span;
  const double rounded = std::round(rate);
  if (rounded > 0.0 && std::abs(rate - rounded) <= 1e-6 * rounded) rate = rounded;
  demo.sample_rate_hz = rate;
  check_timing(demo.records, rate, id);
  return demo;
}

void write_demonstration(const Demonstration& demo, const std::filesystem::path& path) {
  util::write_file(path, to_csv(demo));
}

Demonstration read_demonstration(const std::filesystem::path& path) {
  return parse_demonstration_csv(util::read_file(path), path.stem().string());
}

std::vector<Demonstration> load_demonstrations(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw DataError("not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".csv") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end(),
            [](const fs::path& a, const fs::path& b) { return a.stem() < b.stem(); });
  std::vector<Demonstration> demos;
  demos.reserve(files.size());
  for (const auto& f : files) demos.push_back(read_demonstration(f));
  return demos;
}

void save_demonstrations(const std::vector<Demonstration>& demos,
                         const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (const auto& d : demos) write_demonstration(d, dir / (d.id + ".csv"));
}

Demonstration decimate(const Demonstration& demo, double target_hz) {
  if (!(target_hz > 0.0)) throw std::invalid_argument("decimate: target rate must be positive");
  const double ratio = demo.sample_rate_hz / target_hz;
  const double factor = std::round(ratio);
  if (factor < 1.0 || std::abs(ratio - factor) > 1e-9 * factor) {
    throw std::invalid_argument("decimate: " + util::format_double(target_hz) +
                                " Hz does not divide " + util::format_double(demo.sample_rate_hz) +
                                " Hz");
  }
  const auto k = static_cast<std::size_t>(factor);
  Demonstration out;
  out.id = demo.id;
  out.sample_rate_hz = k == 1 ? demo.sample_rate_hz : target_hz;
  for (std::size_t i = 0; i < demo.records.size(); i += k) out.records.push_back(demo.records[i]);
  return out;
}

std::vector<Demonstration> filter_ideal(const std::vector<Demonstration>& demos,
                                        double threshold) {
  std::vector<Demonstration> out;
  for (const auto& d : demos) {
    if (d.final_fill() >= threshold) out.push_back(d);
  }
  return out;
}

}  // namespace pileload::data
