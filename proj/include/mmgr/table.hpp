#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace mmgr {

enum class ColumnType : std::uint8_t { Float = 0, String = 1 };

std::string_view to_string(ColumnType t);

struct ColumnSchema {
  std::string name;
  ColumnType type = ColumnType::Float;

  friend bool operator==(const ColumnSchema&, const ColumnSchema&) = default;
};

/// One column of a column-major table. Exactly one of `numbers`/`strings`
/// is populated, according to `type`.
struct Column {
  std::string name;
  ColumnType type = ColumnType::Float;
  std::vector<double> numbers;
  std::vector<std::string> strings;

  std::size_t size() const { return type == ColumnType::Float ? numbers.size() : strings.size(); }
};

struct Table {
  std::vector<Column> columns;
  std::size_t row_count = 0;

  const Column* find(std::string_view name) const;
  /// Float column by name; schema error if absent or not numeric.
  const std::vector<double>& numeric(std::string_view name) const;
  std::vector<ColumnSchema> schema() const;
};

/// Parses RFC-4180 style CSV (header row, quoted fields, CRLF or LF) and
/// infers column types: a column is Float iff every cell is a finite
/// decimal number. Ragged rows raise a schema error carrying the 1-based
/// data row index.
Table parse_csv(std::string_view csv);

/// Canonical CSV rendering: shortest round-trip floats, minimal quoting, LF.
/// parse_csv(to_csv(t)) reproduces t exactly.
std::string to_csv(const Table& table);

/// Byte-stable column-major payload ("MFSN" v1), see docs/formats.md.
std::string encode_canonical(const Table& table);
Table decode_canonical(std::string_view payload);

/// Accepts an optionally signed decimal number with surrounding blanks.
bool parse_decimal(std::string_view text, double& out);
std::string format_double(double v);

}  // namespace mmgr
