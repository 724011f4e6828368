#pragma once

// The API operation table. The HTTP router, the CLI and the generated API
// reference are all driven from this one list.

#include <string>
#include <string_view>
#include <vector>

namespace mmgr {

enum class FieldLocation { path, query, body, raw_body };
enum class FieldType { string, number, integer, boolean, json, list };

struct OpField {
  std::string_view name;
  FieldLocation location;
  FieldType type;
  bool required;
  std::string_view help;
};

enum class ResponseKind { json, jsonl, text, binary };

struct OpSpec {
  std::string_view name;       // "<noun>.<verb>"
  std::string_view noun;
  std::string_view verb;
  std::string_view method;     // GET, POST, DELETE
  std::string_view path;       // "/models/{id}/status"
  std::string_view module_op;  // "registry-core.transition_status"
  std::string_view summary;
  std::vector<OpField> fields;
  ResponseKind response = ResponseKind::json;
  std::vector<std::string_view> columns;  // table rendering for list results
};

const std::vector<OpSpec>& op_table();
const OpSpec* find_op(std::string_view name);

/// Module operations that must be reachable through the API.
const std::vector<std::string_view>& module_operations();

/// Markdown reference generated from the table.
std::string api_reference();

std::string_view to_string(FieldLocation l);
std::string_view to_string(FieldType t);

}  // namespace mmgr
