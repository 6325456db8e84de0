#include "bdq/io.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace bdq {

namespace {

template <typename T>
void put(std::ofstream& out, T v) {
  static_assert(sizeof(T) == 8);
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::ifstream& in) {
  static_assert(sizeof(T) == 8);
  T v;
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw std::runtime_error("ensemble file truncated");
  return v;
}

}  // namespace

void write_ensemble(const std::filesystem::path& path,
                    const EnsembleHeader& h, const std::vector<Field>& records) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp.string());
    put(out, h.L);
    put(out, h.a);
    put(out, h.m);
    put(out, h.n_t);
    put(out, h.seed);
    put(out, h.n_samples);
    for (const Field& f : records) {
      out.write(reinterpret_cast<const char*>(f.data()),
                static_cast<std::streamsize>(sizeof(double) * f.size()));
    }
    if (!out) throw std::runtime_error("short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

LoadedEnsemble read_ensemble(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  LoadedEnsemble le;
  le.header.L = get<std::uint64_t>(in);
  le.header.a = get<double>(in);
  le.header.m = get<double>(in);
  le.header.n_t = get<std::uint64_t>(in);
  le.header.seed = get<std::uint64_t>(in);
  le.header.n_samples = get<std::uint64_t>(in);
  const int L = static_cast<int>(le.header.L);
  const std::size_t n_fields = le.header.n_samples * le.header.n_t;
  le.records.reserve(n_fields);
  for (std::size_t i = 0; i < n_fields; ++i) {
    Field f(L, L);
    in.read(reinterpret_cast<char*>(f.data()),
            static_cast<std::streamsize>(sizeof(double) * f.size()));
    if (!in) throw std::runtime_error("ensemble file truncated");
    le.records.push_back(std::move(f));
  }
  return le;
}

std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

void atomic_write_text(const std::filesystem::path& path,
                       const std::string& content) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp.string());
    out << content;
    if (!out) throw std::runtime_error("short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

CsvTable::CsvTable(std::vector<std::string> columns)
    : columns_(std::move(columns)) {}

void CsvTable::add_row(const std::vector<std::string>& cells) {
  if (cells.size() != columns_.size()) {
    throw std::invalid_argument("csv row width mismatch");
  }
  rows_.push_back(cells);
}

void CsvTable::add_row(const std::vector<double>& values) {
  std::vector<std::string> cells;
  cells.reserve(values.size());
  for (double v : values) cells.push_back(format_double(v));
  add_row(cells);
}

std::string CsvTable::to_string() const {
  std::string out;
  for (std::size_t c = 0; c < columns_.size(); ++c) {
    out += columns_[c];
    out += (c + 1 == columns_.size()) ? '\n' : ',';
  }
  for (const auto& row : rows_) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      out += row[c];
      out += (c + 1 == row.size()) ? '\n' : ',';
    }
  }
  return out;
}

void CsvTable::write(const std::filesystem::path& path) const {
  atomic_write_text(path, to_string());
}

}  // namespace bdq
