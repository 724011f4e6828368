#include "mmgr/table.hpp"

#include "mmgr/bytes.hpp"
#include "mmgr/error.hpp"

#include <charconv>
#include <cmath>
#include <set>

namespace mmgr {

namespace {

constexpr std::string_view kPayloadMagic = "MFSN";
constexpr std::uint16_t kPayloadVersion = 1;

using Row = std::vector<std::string>;

// RFC-4180 records.
std::vector<Row> split_records(std::string_view in) {
  if (in.size() >= 3 && in.substr(0, 3) == "\xEF\xBB\xBF") in.remove_prefix(3);
  // Trailing blank lines carry no records.
  while (!in.empty() && (in.back() == '\n' || in.back() == '\r')) in.remove_suffix(1);
  std::vector<Row> rows;
  Row row;
  std::string field;
  bool in_quotes = false;
  bool field_started = false;
  std::size_t record = 0;

  auto end_record = [&] {
    row.push_back(std::move(field));
    field.clear();
    rows.push_back(std::move(row));
    row.clear();
    field_started = false;
    ++record;
  };

  for (std::size_t i = 0; i < in.size(); ++i) {
    const char c = in[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < in.size() && in[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        field.push_back(c);
      }
      continue;
    }
    switch (c) {
      case '"':
        if (!field.empty()) {
          fail(ErrorCode::schema, "quote inside unquoted field at record " + std::to_string(record),
               Json{{"row", record}});
        }
        in_quotes = true;
        field_started = true;
        break;
      case ',':
        row.push_back(std::move(field));
        field.clear();
        field_started = true;
        break;
      case '\r':
        if (i + 1 < in.size() && in[i + 1] == '\n') ++i;
        end_record();
        break;
      case '\n':
        end_record();
        break;
      default:
        field.push_back(c);
        field_started = true;
    }
  }
  if (in_quotes) {
    fail(ErrorCode::schema, "unterminated quoted field at record " + std::to_string(record),
         Json{{"row", record}});
  }
  if (field_started || !row.empty()) end_record();
  return rows;
}

bool needs_quotes(std::string_view s) {
  if (s.empty()) return false;
  if (s.front() == ' ' || s.front() == '\t' || s.back() == ' ' || s.back() == '\t') return true;
  return s.find_first_of(",\"\r\n") != std::string_view::npos;
}

void append_field(std::string& out, std::string_view s) {
  if (!needs_quotes(s)) {
    out.append(s);
    return;
  }
  out.push_back('"');
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
}

}  // namespace

std::string_view to_string(ColumnType t) { return t == ColumnType::Float ? "float" : "string"; }

bool parse_decimal(std::string_view text, double& out) {
  while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
  while (!text.empty() && (text.back() == ' ' || text.back() == '\t')) text.remove_suffix(1);
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  if (text.empty()) return false;
  // Only digits, sign, point and exponent: rules out inf/nan spellings.
  for (char c : text) {
    if (!((c >= '0' && c <= '9') || c == '.' || c == '-' || c == '+' || c == 'e' || c == 'E')) return false;
  }
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v, std::chars_format::general);
  if (ec != std::errc() || ptr != text.data() + text.size() || !std::isfinite(v)) return false;
  out = v;
  return true;
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  (void)ec;
  return std::string(buf, ptr);
}

const Column* Table::find(std::string_view name) const {
  for (const auto& c : columns) {
    if (c.name == name) return &c;
  }
  return nullptr;
}

const std::vector<double>& Table::numeric(std::string_view name) const {
  const Column* c = find(name);
  if (!c) {
    fail(ErrorCode::schema, "missing column: " + std::string(name),
         Json{{"missing", Json::array({name})}});
  }
  if (c->type != ColumnType::Float) {
    fail(ErrorCode::schema, "column is not numeric: " + std::string(name), Json{{"column", name}});
  }
  return c->numbers;
}

std::vector<ColumnSchema> Table::schema() const {
  std::vector<ColumnSchema> s;
  s.reserve(columns.size());
  for (const auto& c : columns) s.push_back({c.name, c.type});
  return s;
}

Table parse_csv(std::string_view csv) {
  auto records = split_records(csv);
  if (records.empty()) fail(ErrorCode::schema, "CSV has no header row", Json{{"row", 0}});

  const Row& header = records.front();
  std::set<std::string_view> seen;
  for (const auto& name : header) {
    if (name.empty()) fail(ErrorCode::schema, "empty column name in header", Json{{"row", 0}});
    if (!seen.insert(name).second) {
      fail(ErrorCode::schema, "duplicate column name: " + name, Json{{"row", 0}, {"column", name}});
    }
  }
  for (std::size_t r = 1; r < records.size(); ++r) {
    if (records[r].size() != header.size()) {
      fail(ErrorCode::schema,
           "row " + std::to_string(r) + " has " + std::to_string(records[r].size()) + " fields, expected " +
               std::to_string(header.size()),
           Json{{"row", r}, {"expected", header.size()}, {"found", records[r].size()}});
    }
  }

  Table t;
  t.row_count = records.size() - 1;
  t.columns.resize(header.size());
  for (std::size_t c = 0; c < header.size(); ++c) {
    Column& col = t.columns[c];
    col.name = header[c];
    col.numbers.reserve(t.row_count);
    bool numeric = true;
    for (std::size_t r = 1; r < records.size() && numeric; ++r) {
      double v = 0.0;
      if (parse_decimal(records[r][c], v)) {
        col.numbers.push_back(v);
      } else {
        numeric = false;
      }
    }
    if (numeric) {
      col.type = ColumnType::Float;
    } else {
      col.type = ColumnType::String;
      col.numbers.clear();
      col.strings.reserve(t.row_count);
      for (std::size_t r = 1; r < records.size(); ++r) col.strings.push_back(std::move(records[r][c]));
    }
  }
  return t;
}

std::string to_csv(const Table& table) {
  std::string out;
  for (std::size_t c = 0; c < table.columns.size(); ++c) {
    if (c) out.push_back(',');
    append_field(out, table.columns[c].name);
  }
  out.push_back('\n');
  for (std::size_t r = 0; r < table.row_count; ++r) {
    for (std::size_t c = 0; c < table.columns.size(); ++c) {
      if (c) out.push_back(',');
      const Column& col = table.columns[c];
      if (col.type == ColumnType::Float) {
        out += format_double(col.numbers[r]);
      } else {
        append_field(out, col.strings[r]);
      }
    }
    out.push_back('\n');
  }
  return out;
}

std::string encode_canonical(const Table& table) {
  bytes::Writer w;
  w.raw(kPayloadMagic);
  w.u16(kPayloadVersion);
  w.u32(static_cast<std::uint32_t>(table.columns.size()));
  w.u64(table.row_count);
  for (const auto& c : table.columns) {
    w.u8(static_cast<std::uint8_t>(c.type));
    w.str(c.name);
  }
  for (const auto& c : table.columns) {
    if (c.size() != table.row_count) {
      fail(ErrorCode::schema, "column " + c.name + " length does not match row count");
    }
    if (c.type == ColumnType::Float) {
      for (double v : c.numbers) w.f64(v);
    } else {
      for (const auto& s : c.strings) w.str(s);
    }
  }
  return w.take();
}

Table decode_canonical(std::string_view payload) {
  bytes::Reader r(payload, "snapshot payload");
  if (r.raw(4) != kPayloadMagic) fail(ErrorCode::corruption, "snapshot payload: bad magic");
  if (r.u16() != kPayloadVersion) fail(ErrorCode::unsupported, "snapshot payload: unknown version");
  const std::uint32_t ncols = r.u32();
  Table t;
  t.row_count = r.u64();
  if (ncols > payload.size() || t.row_count > payload.size()) {
    fail(ErrorCode::corruption, "snapshot payload: implausible dimensions");
  }
  t.columns.resize(ncols);
  for (auto& c : t.columns) {
    const auto type = r.u8();
    if (type > 1) fail(ErrorCode::corruption, "snapshot payload: bad column type");
    c.type = static_cast<ColumnType>(type);
    c.name = r.str();
  }
  for (auto& c : t.columns) {
    if (c.type == ColumnType::Float) {
      c.numbers.resize(t.row_count);
      for (auto& v : c.numbers) v = r.f64();
    } else {
      c.strings.resize(t.row_count);
      for (auto& s : c.strings) s = r.str();
    }
  }
  r.expect_end();
  return t;
}

}  // namespace mmgr
