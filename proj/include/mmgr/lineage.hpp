#pragma once

#include "mmgr/store.hpp"

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mmgr {

enum class LinkKind {
  compatible_with,
  newer_recording_of,
  base_of,
  tuned_from,
  trained_on,
  evaluated_on,
  deployed_as,
};

inline constexpr LinkKind kAllLinkKinds[] = {
    LinkKind::compatible_with, LinkKind::newer_recording_of, LinkKind::base_of,
    LinkKind::tuned_from,      LinkKind::trained_on,         LinkKind::evaluated_on,
    LinkKind::deployed_as,
};

std::string_view to_string(LinkKind kind);
LinkKind parse_link_kind(std::string_view name);
/// base_of, tuned_from and newer_recording_of may never form a cycle.
bool is_acyclic(LinkKind kind);
/// compatible_with is stored in both directions.
bool is_symmetric(LinkKind kind);

struct LineageEdge {
  std::string from;
  std::string to;
  LinkKind kind = LinkKind::compatible_with;
  std::string created_at;
  std::optional<std::string> annotation;
};

/// One leg of a multi-kind traversal: follow `kind` edges forwards
/// (from -> to) or backwards (to -> from).
struct Traversal {
  LinkKind kind;
  bool reverse = false;
};

class LineageGraph {
 public:
  explicit LineageGraph(Store& store) : store_(store) {}

  /// Cycle errors carry the offending path in detail["path"], starting and
  /// ending at `to`.
  LineageEdge add_link(std::string_view from, std::string_view to, LinkKind kind,
                       std::optional<std::string> annotation = std::nullopt);
  /// add_link unless the triple already exists.
  void ensure_link(std::string_view from, std::string_view to, LinkKind kind);
  void remove_link(std::string_view from, std::string_view to, LinkKind kind);
  bool has_link(std::string_view from, std::string_view to, LinkKind kind);

  /// Ids reachable over `kind` edges within `depth` hops (unbounded when
  /// nullopt), excluding `start`, sorted by id.
  std::vector<std::string> connected(std::string_view start, LinkKind kind,
                                     std::optional<unsigned> depth = std::nullopt);

  /// Unbounded closure over the union of the given traversals, excluding
  /// `start`, sorted by id.
  std::vector<std::string> reachable(std::string_view start, std::span<const Traversal> legs);

  std::vector<LineageEdge> edges();
  std::vector<LineageEdge> edges_touching(std::string_view id);
  /// One `from<TAB>kind<TAB>to` line per stored edge, lexicographically sorted.
  std::string export_text();

  /// Any cycle over edges of an acyclic kind, as a closed path; empty if none.
  std::vector<std::string> find_cycle(LinkKind kind);

 private:
  Store& store_;
};

}  // namespace mmgr
