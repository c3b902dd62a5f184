#include "quadsim/stl/trace.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace quadsim::stl {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) {
    // trim
    const auto b = field.find_first_not_of(" \t\r");
    const auto e = field.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? "" : field.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

double parse_number(const std::string& s) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw TraceError("trailing characters in number: " + s);
    return v;
  } catch (const std::exception&) {
    throw TraceError("cannot parse number: '" + s + "'");
  }
}

void format_number(std::string& out, double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, res.ptr);
}

}  // namespace

Trace::Trace(std::vector<std::string> names, std::vector<double> defaults)
    : names_(std::move(names)), defaults_(std::move(defaults)) {
  if (names_.empty()) throw TraceError("trace needs at least one signal");
  if (names_.size() != defaults_.size())
    throw TraceError("defaults size does not match signal count");
  columns_.resize(names_.size());
}

void Trace::add_breakpoint(double t, std::span<const double> values) {
  if (!std::isfinite(t)) throw TraceError("breakpoint time must be finite");
  if (!times_.empty() && t <= times_.back())
    throw TraceError("breakpoint times must be strictly increasing");
  if (values.size() != names_.size())
    throw TraceError("breakpoint value count does not match signal count");
  times_.push_back(t);
  for (std::size_t i = 0; i < values.size(); ++i) columns_[i].push_back(values[i]);
}

int Trace::signal_index(const std::string& name) const {
  const auto it = std::find(names_.begin(), names_.end(), name);
  return it == names_.end() ? -1 : static_cast<int>(it - names_.begin());
}

std::size_t Trace::first_at_or_after(double t) const {
  return std::lower_bound(times_.begin(), times_.end(), t) - times_.begin();
}

std::size_t Trace::first_after(double t) const {
  return std::upper_bound(times_.begin(), times_.end(), t) - times_.begin();
}

double Trace::value(int signal, double t) const {
  if (times_.empty() || t < times_.front()) return defaults_[signal];
  // last breakpoint with time <= t
  const std::size_t idx = first_after(t) - 1;
  return columns_[signal][idx];
}

Trace Trace::read_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw TraceError("empty trace file");
  auto header = split_csv_line(line);
  if (header.size() < 2 || header[0] != "time")
    throw TraceError("trace header must start with 'time'");
  std::vector<std::string> names(header.begin() + 1, header.end());
  std::vector<double> defaults(names.size(), 0.0);

  std::vector<std::pair<double, std::vector<double>>> rows;
  bool default_seen = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    auto fields = split_csv_line(line);
    if (fields.size() != header.size())
      throw TraceError("row has " + std::to_string(fields.size()) + " fields, expected " +
                       std::to_string(header.size()));
    std::vector<double> vals(names.size());
    for (std::size_t i = 0; i < names.size(); ++i) vals[i] = parse_number(fields[i + 1]);
    if (fields[0] == "default") {
      if (default_seen) throw TraceError("duplicate default row");
      defaults = vals;
      default_seen = true;
    } else {
      rows.emplace_back(parse_number(fields[0]), std::move(vals));
    }
  }
  Trace tr(std::move(names), std::move(defaults));
  for (auto& [t, vals] : rows) tr.add_breakpoint(t, vals);
  return tr;
}

Trace Trace::read_csv_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw TraceError("cannot open trace file: " + path.string());
  return read_csv(in);
}

void Trace::write_csv(std::ostream& out) const {
  std::string buf = "time";
  for (const auto& n : names_) {
    buf += ',';
    buf += n;
  }
  buf += "\ndefault";
  for (double d : defaults_) {
    buf += ',';
    format_number(buf, d);
  }
  buf += '\n';
  out << buf;
  for (std::size_t j = 0; j < times_.size(); ++j) {
    buf.clear();
    format_number(buf, times_[j]);
    for (std::size_t i = 0; i < columns_.size(); ++i) {
      buf += ',';
      format_number(buf, columns_[i][j]);
    }
    buf += '\n';
    out << buf;
  }
}

void Trace::write_csv_file(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw TraceError("cannot open for writing: " + path.string());
  write_csv(out);
}

Trace Trace::select(const std::vector<std::string>& signal_names,
                    const std::vector<std::string>& new_names) const {
  if (!new_names.empty() && new_names.size() != signal_names.size())
    throw TraceError("select: rename list size mismatch");
  std::vector<int> idx;
  std::vector<double> defs;
  for (const auto& n : signal_names) {
    const int i = signal_index(n);
    if (i < 0) throw TraceError("select: unknown signal " + n);
    idx.push_back(i);
    defs.push_back(defaults_[i]);
  }
  Trace out(new_names.empty() ? signal_names : new_names, defs);
  std::vector<double> row(idx.size());
  for (std::size_t j = 0; j < times_.size(); ++j) {
    for (std::size_t k = 0; k < idx.size(); ++k) row[k] = columns_[idx[k]][j];
    out.add_breakpoint(times_[j], row);
  }
  return out;
}

}  // namespace quadsim::stl
