#pragma once

// CSV reading/writing (RFC 4180, '.' decimal, shortest round-trip doubles)
// and the dataset file schema: X file carries a leading `group` column.

#include <charconv>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "faircca/cca.hpp"

namespace faircca {

inline std::string format_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, ptr);
}

using CsvTable = std::vector<std::vector<std::string>>;

inline CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path.string());
  CsvTable table;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false;
  bool row_open = false;
  char c;
  while (in.get(c)) {
    if (quoted) {
      if (c == '"') {
        if (in.peek() == '"') {
          field += '"';
          in.get();
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    switch (c) {
      case '"': quoted = true; row_open = true; break;
      case ',':
        row.push_back(std::move(field));
        field.clear();
        row_open = true;
        break;
      case '\r': break;
      case '\n':
        if (row_open || !field.empty() || !row.empty()) {
          row.push_back(std::move(field));
          field.clear();
          table.push_back(std::move(row));
          row.clear();
          row_open = false;
        }
        break;
      default: field += c; row_open = true;
    }
  }
  if (row_open || !field.empty() || !row.empty()) {
    row.push_back(std::move(field));
    table.push_back(std::move(row));
  }
  return table;
}

inline void write_csv(const std::filesystem::path& path, const CsvTable& table) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  for (const auto& row : table) {
    for (size_t j = 0; j < row.size(); ++j) {
      const std::string& f = row[j];
      const bool needs_quote = f.find_first_of(",\"\n\r") != std::string::npos;
      if (j) out << ',';
      if (needs_quote) {
        out << '"';
        for (char ch : f) {
          if (ch == '"') out << '"';
          out << ch;
        }
        out << '"';
      } else {
        out << f;
      }
    }
    out << "\r\n";
  }
}

inline double parse_cell(const std::string& s, size_t row, size_t col) {
  double v = 0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc{} || ptr != last)
    throw ParseError("row " + std::to_string(row + 1) + ", column " + std::to_string(col + 1) +
                     ": cannot parse '" + s + "' as a number");
  return v;
}

// X file: header `group,<x features...>`; Y file: header `<y features...>`.
// Group labels are mapped to 0..K-1 in first-appearance order.
inline GroupedDataset load_csv(const std::filesystem::path& x_path,
                               const std::filesystem::path& y_path) {
  CsvTable tx = read_csv(x_path);
  CsvTable ty = read_csv(y_path);
  if (tx.size() < 2 || ty.size() < 2) throw ParseError("dataset files need a header and data rows");
  if (tx.size() != ty.size()) throw ParseError("X and Y files have different row counts");
  if (tx[0].empty() || tx[0][0] != "group")
    throw ParseError(x_path.string() + ": first column must be 'group'");

  const size_t n = tx.size() - 1;
  const size_t dx = tx[0].size() - 1;
  const size_t dy = ty[0].size();
  Matrix x(static_cast<Index>(n), static_cast<Index>(dx));
  Matrix y(static_cast<Index>(n), static_cast<Index>(dy));
  std::vector<int> labels(n);
  std::map<std::string, int> label_ids;

  for (size_t i = 0; i < n; ++i) {
    const auto& rx = tx[i + 1];
    const auto& ry = ty[i + 1];
    if (rx.size() != dx + 1 || ry.size() != dy)
      throw ParseError("row " + std::to_string(i + 2) + ": wrong field count");
    auto [it, inserted] = label_ids.try_emplace(rx[0], static_cast<int>(label_ids.size()));
    (void)inserted;
    labels[i] = it->second;
    for (size_t j = 0; j < dx; ++j) x(static_cast<Index>(i), static_cast<Index>(j)) = parse_cell(rx[j + 1], i + 1, j + 1);
    for (size_t j = 0; j < dy; ++j) y(static_cast<Index>(i), static_cast<Index>(j)) = parse_cell(ry[j], i + 1, j);
  }
  return standardize(std::move(x), std::move(y), std::move(labels));
}

inline void save_dataset_csv(const GroupedDataset& ds, const std::filesystem::path& x_path,
                             const std::filesystem::path& y_path) {
  CsvTable tx, ty;
  std::vector<std::string> hx{"group"}, hy;
  for (Index j = 0; j < ds.dx(); ++j) hx.push_back("x" + std::to_string(j + 1));
  for (Index j = 0; j < ds.dy(); ++j) hy.push_back("y" + std::to_string(j + 1));
  tx.push_back(std::move(hx));
  ty.push_back(std::move(hy));
  for (Index i = 0; i < ds.n(); ++i) {
    std::vector<std::string> rx{std::to_string(ds.group_index[static_cast<size_t>(i)] + 1)};
    std::vector<std::string> ry;
    for (Index j = 0; j < ds.dx(); ++j) rx.push_back(format_double(ds.x(i, j)));
    for (Index j = 0; j < ds.dy(); ++j) ry.push_back(format_double(ds.y(i, j)));
    tx.push_back(std::move(rx));
    ty.push_back(std::move(ry));
  }
  write_csv(x_path, tx);
  write_csv(y_path, ty);
}

}  // namespace faircca
