#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "rmix/engine.hpp"
#include "rmix/hier_model.hpp"
#include "rmix/ou_model.hpp"

namespace rmix {

/// Shortest round-trip decimal form ("%.17g" trimmed), so files are bit-stable.
std::string format_double(double v);

/// Columns i,y,V (any order, extra columns ignored). Rows keep file order.
HierData read_hospital_csv(std::istream& in);
HierData read_hospital_csv(const std::filesystem::path& path);
void write_hospital_csv(std::ostream& out, const HierData& data,
                        const std::vector<double>* y_sim = nullptr);

/// Column y (others ignored); sigma, nu and theta keep their defaults.
ToyData read_toy_csv(std::istream& in);
ToyData read_toy_csv(const std::filesystem::path& path);
void write_toy_csv(std::ostream& out, const ToyData& data);

/// Columns t,y,sd; V = sd^2. Times must be non-decreasing.
TimeSeries read_timeseries_csv(std::istream& in);
TimeSeries read_timeseries_csv(const std::filesystem::path& path);
void write_timeseries_csv(std::ostream& out, const TimeSeries& data);

/// One column per monitored scalar, one row per kept draw.
void write_chain_csv(std::ostream& out, const ChainOutput& chain);
/// Reads a chain CSV back as named columns.
struct ChainTable {
  std::vector<std::string> names;
  std::vector<std::vector<double>> columns;
  const std::vector<double>& column(const std::string& name) const;
};
ChainTable read_chain_csv(std::istream& in);
ChainTable read_chain_csv(const std::filesystem::path& path);

/// index (1-based), z_mean
void write_zmean_csv(std::ostream& out, const std::vector<double>& z_mean);

/// Writes text to a file, creating parent directories.
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace rmix
