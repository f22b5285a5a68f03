#include "titrate/dataset_io.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <vector>

#include "titrate/errors.hpp"

namespace titrate {

namespace {

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    out.push_back(line.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

double parse_real(std::string_view s, std::size_t line_no) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw IoError("line " + std::to_string(line_no) + ": bad number '" + std::string(s) + "'");
  }
  return v;
}

long long parse_int(std::string_view s, std::size_t line_no) {
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw IoError("line " + std::to_string(line_no) + ": bad integer '" + std::string(s) + "'");
  }
  return v;
}

bool parse_flag(std::string_view s, std::size_t line_no) {
  if (s == "0") return false;
  if (s == "1") return true;
  throw IoError("line " + std::to_string(line_no) + ": flag must be 0 or 1");
}

}  // namespace

std::string format_real(double x) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
  if (ec != std::errc()) throw IoError("cannot format number");
  return {buf, ptr};
}

void write_dataset_csv(const TrialDataset& ds, std::ostream& out) {
  out << kDatasetHeader << '\n';
  for (const auto& s : ds.subjects) {
    out << s.subject_id << ',' << s.arm_id << ',' << format_real(s.eta_cl) << ','
        << format_real(s.eta_v);
    for (const auto& d : s.doses) out << ',' << format_real(d.amount);
    for (double e : s.troughs) out << ',' << format_real(e);
    for (bool f : s.ie) out << ',' << (f ? 1 : 0);
    out << ',' << (s.adherent ? 1 : 0) << '\n';
  }
}

void write_dataset_csv(const TrialDataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  write_dataset_csv(ds, out);
  if (!out) throw IoError("failed writing " + path.string());
}

TrialDataset read_dataset_csv(std::istream& in, const Scenario& scenario, Regime regime) {
  TrialDataset ds;
  ds.scenario = scenario;
  ds.regime = regime;
  std::string line;
  if (!std::getline(in, line)) throw IoError("empty dataset file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kDatasetHeader) throw IoError("unexpected dataset header: " + line);

  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != 16) {
      throw IoError("line " + std::to_string(line_no) + ": expected 16 fields");
    }
    SubjectRecord s;
    s.subject_id = parse_int(f[0], line_no);
    s.arm_id = static_cast<int>(parse_int(f[1], line_no));
    arm_by_id(s.arm_id);
    s.eta_cl = parse_real(f[2], line_no);
    s.eta_v = parse_real(f[3], line_no);
    for (std::size_t i = 0; i < kNumDoses; ++i) {
      s.doses[i] = {kDoseTimes[i], parse_real(f[4 + i], line_no)};
      s.troughs[i] = parse_real(f[8 + i], line_no);
    }
    for (std::size_t i = 0; i < kNumDecisions; ++i) s.ie[i] = parse_flag(f[12 + i], line_no);
    s.adherent = parse_flag(f[15], line_no);
    ds.subjects.push_back(s);
  }
  return ds;
}

TrialDataset read_dataset_csv(const std::filesystem::path& path, const Scenario& scenario,
                              Regime regime) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return read_dataset_csv(in, scenario, regime);
}

}  // namespace titrate
