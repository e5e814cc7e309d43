#include "rmix/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "rmix/error.hpp"

namespace rmix {

namespace {

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_number(const std::string& s, std::size_t line) {
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (!s.empty() && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || s.empty()) throw ParseError("bad number '" + s + "'", line);
  return v;
}

// Header-driven CSV: returns rows of the requested columns as numbers.
struct Table {
  std::vector<std::vector<double>> rows;
  std::vector<std::size_t> lines;
};

Table read_columns(std::istream& in, const std::vector<std::string>& wanted) {
  std::string line;
  std::size_t lineno = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++lineno;
    if (!trim(line).empty()) {
      header = split(line);
      break;
    }
  }
  if (header.empty()) throw ParseError("empty CSV", 0);
  std::vector<std::size_t> pos;
  for (const auto& w : wanted) {
    std::size_t j = 0;
    while (j < header.size() && header[j] != w) ++j;
    if (j == header.size()) throw ParseError("missing column '" + w + "'", lineno);
    pos.push_back(j);
  }
  Table t;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto cells = split(line);
    if (cells.size() != header.size()) {
      throw ParseError("expected " + std::to_string(header.size()) + " fields, got " +
                           std::to_string(cells.size()),
                       lineno);
    }
    std::vector<double> row;
    for (std::size_t j : pos) row.push_back(parse_number(cells[j], lineno));
    t.rows.push_back(std::move(row));
    t.lines.push_back(lineno);
  }
  return t;
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string(), 0);
  return in;
}

}  // namespace

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

HierData read_hospital_csv(std::istream& in) {
  const Table t = read_columns(in, {"y", "V"});
  HierData d;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    if (!(t.rows[r][1] > 0.0)) throw ParseError("V must be positive", t.lines[r]);
    d.y.push_back(t.rows[r][0]);
    d.V.push_back(t.rows[r][1]);
  }
  if (d.y.empty()) throw ParseError("no data rows", 0);
  return d;
}

HierData read_hospital_csv(const std::filesystem::path& path) {
  auto in = open_input(path);
  return read_hospital_csv(in);
}

void write_hospital_csv(std::ostream& out, const HierData& data, const std::vector<double>* y_sim) {
  out << "i,y,V" << (y_sim ? ",y_sim" : "") << '\n';
  for (std::size_t i = 0; i < data.size(); ++i) {
    out << i + 1 << ',' << format_double(data.y[i]) << ',' << format_double(data.V[i]);
    if (y_sim) out << ',' << format_double((*y_sim)[i]);
    out << '\n';
  }
}

ToyData read_toy_csv(std::istream& in) {
  const Table t = read_columns(in, {"y"});
  ToyData d;
  for (const auto& row : t.rows) d.y.push_back(row[0]);
  if (d.y.empty()) throw ParseError("no data rows", 0);
  return d;
}

ToyData read_toy_csv(const std::filesystem::path& path) {
  auto in = open_input(path);
  return read_toy_csv(in);
}

void write_toy_csv(std::ostream& out, const ToyData& data) {
  out << "i,y\n";
  for (std::size_t i = 0; i < data.size(); ++i) out << i + 1 << ',' << format_double(data.y[i]) << '\n';
}

TimeSeries read_timeseries_csv(std::istream& in) {
  const Table t = read_columns(in, {"t", "y", "sd"});
  TimeSeries s;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    if (!(row[2] > 0.0)) throw ParseError("sd must be positive", t.lines[r]);
    if (!s.t.empty() && row[0] < s.t.back()) throw ParseError("times must be non-decreasing", t.lines[r]);
    s.t.push_back(row[0]);
    s.y.push_back(row[1]);
    s.V.push_back(row[2] * row[2]);
  }
  if (s.t.empty()) throw ParseError("no data rows", 0);
  return s;
}

TimeSeries read_timeseries_csv(const std::filesystem::path& path) {
  auto in = open_input(path);
  return read_timeseries_csv(in);
}

void write_timeseries_csv(std::ostream& out, const TimeSeries& data) {
  out << "t,y,sd\n";
  for (std::size_t i = 0; i < data.size(); ++i) {
    out << format_double(data.t[i]) << ',' << format_double(data.y[i]) << ','
        << format_double(std::sqrt(data.V[i])) << '\n';
  }
}

void write_chain_csv(std::ostream& out, const ChainOutput& chain) {
  for (std::size_t j = 0; j < chain.names.size(); ++j) out << (j ? "," : "") << chain.names[j];
  out << '\n';
  for (std::size_t r = 0; r < chain.kept(); ++r) {
    for (std::size_t j = 0; j < chain.columns.size(); ++j) {
      out << (j ? "," : "") << format_double(chain.columns[j][r]);
    }
    out << '\n';
  }
}

const std::vector<double>& ChainTable::column(const std::string& name) const {
  for (std::size_t j = 0; j < names.size(); ++j) {
    if (names[j] == name) return columns[j];
  }
  throw InvalidParameter("chain file has no column '" + name + "'");
}

ChainTable read_chain_csv(std::istream& in) {
  std::stringstream buf;
  buf << in.rdbuf();
  std::string header;
  while (std::getline(buf, header) && trim(header).empty()) {
  }
  ChainTable t;
  t.names = split(header);
  if (t.names.empty()) throw ParseError("empty chain file", 0);
  buf.clear();
  buf.seekg(0);
  const Table rows = read_columns(buf, t.names);
  t.columns.assign(t.names.size(), {});
  for (const auto& r : rows.rows) {
    for (std::size_t j = 0; j < r.size(); ++j) t.columns[j].push_back(r[j]);
  }
  return t;
}

ChainTable read_chain_csv(const std::filesystem::path& path) {
  auto in = open_input(path);
  return read_chain_csv(in);
}

void write_zmean_csv(std::ostream& out, const std::vector<double>& z_mean) {
  out << "index,z_mean\n";
  for (std::size_t i = 0; i < z_mean.size(); ++i) out << i + 1 << ',' << format_double(z_mean[i]) << '\n';
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

}  // namespace rmix
