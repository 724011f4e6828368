#include "mmgr/lineage.hpp"

#include "mmgr/error.hpp"

#include <algorithm>
#include <deque>
#include <map>
#include <set>

namespace mmgr {

namespace {

using Adjacency = std::map<std::string, std::vector<std::string>, std::less<>>;

Adjacency load_adjacency(Database& db, LinkKind kind, bool reverse) {
  Adjacency adj;
  auto st = db.query("SELECT from_id, to_id FROM links WHERE kind = ? ORDER BY from_id, to_id", to_string(kind));
  while (st.step()) {
    if (reverse) {
      adj[st.text(1)].push_back(st.text(0));
    } else {
      adj[st.text(0)].push_back(st.text(1));
    }
  }
  return adj;
}

// Path start -> ... -> goal over `adj`, empty if unreachable.
std::vector<std::string> find_path(const Adjacency& adj, const std::string& start, const std::string& goal) {
  std::map<std::string, std::string> parent;
  std::deque<std::string> queue{start};
  parent[start] = start;
  while (!queue.empty()) {
    std::string cur = std::move(queue.front());
    queue.pop_front();
    if (cur == goal) {
      std::vector<std::string> path{cur};
      while (path.back() != start) path.push_back(parent[path.back()]);
      std::reverse(path.begin(), path.end());
      return path;
    }
    auto it = adj.find(cur);
    if (it == adj.end()) continue;
    for (const auto& next : it->second) {
      if (parent.emplace(next, cur).second) queue.push_back(next);
    }
  }
  return {};
}

LineageEdge read_edge(const Statement& st) {
  return {st.text(0), st.text(1), parse_link_kind(st.text(2)), st.text(3), st.optional_text(4)};
}

}  // namespace

std::string_view to_string(LinkKind kind) {
  switch (kind) {
    case LinkKind::compatible_with: return "compatible_with";
    case LinkKind::newer_recording_of: return "newer_recording_of";
    case LinkKind::base_of: return "base_of";
    case LinkKind::tuned_from: return "tuned_from";
    case LinkKind::trained_on: return "trained_on";
    case LinkKind::evaluated_on: return "evaluated_on";
    case LinkKind::deployed_as: return "deployed_as";
  }
  return "compatible_with";
}

LinkKind parse_link_kind(std::string_view name) {
  for (LinkKind k : kAllLinkKinds) {
    if (to_string(k) == name) return k;
  }
  fail(ErrorCode::validation, "unknown link kind: " + std::string(name), Json{{"kind", name}});
}

bool is_acyclic(LinkKind kind) {
  return kind == LinkKind::base_of || kind == LinkKind::tuned_from || kind == LinkKind::newer_recording_of;
}

bool is_symmetric(LinkKind kind) { return kind == LinkKind::compatible_with; }

LineageEdge LineageGraph::add_link(std::string_view from, std::string_view to, LinkKind kind,
                                   std::optional<std::string> annotation) {
  auto& db = store_.db();
  Database::Transaction tx(db);
  if (from == to) {
    fail(ErrorCode::validation, "a link must join two distinct artifacts", Json{{"from", from}, {"to", to}});
  }
  if (!store_.artifact_exists(from)) not_found("artifact", from);
  if (!store_.artifact_exists(to)) not_found("artifact", to);
  if (has_link(from, to, kind)) {
    fail(ErrorCode::state,
         "link already exists: " + std::string(from) + " " + std::string(to_string(kind)) + " " + std::string(to),
         Json{{"reason", "already_exists"}, {"from", from}, {"to", to}, {"kind", to_string(kind)}});
  }
  if (is_acyclic(kind)) {
    // The new edge closes a cycle iff `from` is already reachable from `to`.
    const auto adj = load_adjacency(db, kind, false);
    auto path = find_path(adj, std::string(to), std::string(from));
    if (!path.empty()) {
      path.emplace_back(to);
      std::string text;
      for (std::size_t i = 0; i < path.size(); ++i) text += (i ? " -> " : "") + path[i];
      fail(ErrorCode::cycle, "link would create a " + std::string(to_string(kind)) + " cycle: " + text,
           Json{{"path", path}, {"kind", to_string(kind)}});
    }
  }
  LineageEdge edge{std::string(from), std::string(to), kind, store_.now(), std::move(annotation)};
  db.execute("INSERT INTO links(from_id, to_id, kind, created_at, annotation) VALUES(?, ?, ?, ?, ?)", edge.from,
             edge.to, to_string(kind), edge.created_at, edge.annotation);
  if (is_symmetric(kind)) {
    db.execute("INSERT INTO links(from_id, to_id, kind, created_at, annotation) VALUES(?, ?, ?, ?, ?)", edge.to,
               edge.from, to_string(kind), edge.created_at, edge.annotation);
  }
  tx.commit();
  return edge;
}

void LineageGraph::ensure_link(std::string_view from, std::string_view to, LinkKind kind) {
  Database::Transaction tx(store_.db());
  if (!has_link(from, to, kind)) add_link(from, to, kind);
  tx.commit();
}

bool LineageGraph::has_link(std::string_view from, std::string_view to, LinkKind kind) {
  auto& db = store_.db();
  auto lk = db.lock();
  auto st = db.query("SELECT 1 FROM links WHERE from_id = ? AND to_id = ? AND kind = ?", from, to, to_string(kind));
  return st.step();
}

void LineageGraph::remove_link(std::string_view from, std::string_view to, LinkKind kind) {
  auto& db = store_.db();
  Database::Transaction tx(db);
  if (db.execute("DELETE FROM links WHERE from_id = ? AND to_id = ? AND kind = ?", from, to, to_string(kind)) == 0) {
    fail(ErrorCode::not_found,
         "link not found: " + std::string(from) + " " + std::string(to_string(kind)) + " " + std::string(to),
         Json{{"from", from}, {"to", to}, {"kind", to_string(kind)}});
  }
  if (is_symmetric(kind)) {
    db.execute("DELETE FROM links WHERE from_id = ? AND to_id = ? AND kind = ?", to, from, to_string(kind));
  }
  tx.commit();
}

std::vector<std::string> LineageGraph::connected(std::string_view start, LinkKind kind,
                                                 std::optional<unsigned> depth) {
  auto& db = store_.db();
  auto lk = db.lock();
  if (!store_.artifact_exists(start)) not_found("artifact", start);
  if (depth && *depth == 0) fail(ErrorCode::validation, "depth must be positive");
  const auto adj = load_adjacency(db, kind, false);

  std::set<std::string> seen{std::string(start)};
  std::vector<std::string> frontier{std::string(start)};
  for (unsigned hop = 0; !frontier.empty() && (!depth || hop < *depth); ++hop) {
    std::vector<std::string> next;
    for (const auto& node : frontier) {
      auto it = adj.find(node);
      if (it == adj.end()) continue;
      for (const auto& n : it->second) {
        if (seen.insert(n).second) next.push_back(n);
      }
    }
    frontier = std::move(next);
  }
  seen.erase(std::string(start));
  return {seen.begin(), seen.end()};
}

std::vector<std::string> LineageGraph::reachable(std::string_view start, std::span<const Traversal> legs) {
  auto& db = store_.db();
  auto lk = db.lock();
  if (!store_.artifact_exists(start)) not_found("artifact", start);
  Adjacency adj;
  for (const auto& leg : legs) {
    for (auto& [node, nexts] : load_adjacency(db, leg.kind, leg.reverse)) {
      auto& dst = adj[node];
      dst.insert(dst.end(), nexts.begin(), nexts.end());
    }
  }
  std::set<std::string> seen{std::string(start)};
  std::deque<std::string> queue{std::string(start)};
  while (!queue.empty()) {
    auto it = adj.find(queue.front());
    queue.pop_front();
    if (it == adj.end()) continue;
    for (const auto& n : it->second) {
      if (seen.insert(n).second) queue.push_back(n);
    }
  }
  seen.erase(std::string(start));
  return {seen.begin(), seen.end()};
}

std::vector<LineageEdge> LineageGraph::edges() {
  auto& db = store_.db();
  auto lk = db.lock();
  std::vector<LineageEdge> out;
  auto st = db.query("SELECT from_id, to_id, kind, created_at, annotation FROM links ORDER BY from_id, kind, to_id");
  while (st.step()) out.push_back(read_edge(st));
  return out;
}

std::vector<LineageEdge> LineageGraph::edges_touching(std::string_view id) {
  auto& db = store_.db();
  auto lk = db.lock();
  std::vector<LineageEdge> out;
  auto st = db.query(
      "SELECT from_id, to_id, kind, created_at, annotation FROM links WHERE from_id = ? OR to_id = ? "
      "ORDER BY from_id, kind, to_id",
      id, id);
  while (st.step()) out.push_back(read_edge(st));
  return out;
}

std::string LineageGraph::export_text() {
  std::vector<std::string> lines;
  for (const auto& e : edges()) lines.push_back(e.from + '\t' + std::string(to_string(e.kind)) + '\t' + e.to);
  std::sort(lines.begin(), lines.end());
  std::string out;
  for (const auto& l : lines) out += l + '\n';
  return out;
}

std::vector<std::string> LineageGraph::find_cycle(LinkKind kind) {
  auto& db = store_.db();
  auto lk = db.lock();
  const auto adj = load_adjacency(db, kind, false);
  // Iterative three-colour DFS.
  std::map<std::string, int> colour;
  std::map<std::string, std::string> parent;
  for (const auto& [root, _] : adj) {
    if (colour[root] != 0) continue;
    std::vector<std::pair<std::string, std::size_t>> stack{{root, 0}};
    colour[root] = 1;
    while (!stack.empty()) {
      auto& [node, idx] = stack.back();
      auto it = adj.find(node);
      if (it == adj.end() || idx >= it->second.size()) {
        colour[node] = 2;
        stack.pop_back();
        continue;
      }
      const std::string next = it->second[idx++];
      if (colour[next] == 1) {
        std::vector<std::string> cycle{next};
        for (auto s = stack.rbegin(); s != stack.rend() && s->first != next; ++s) cycle.push_back(s->first);
        cycle.push_back(next);
        std::reverse(cycle.begin(), cycle.end());
        return cycle;
      }
      if (colour[next] == 0) {
        colour[next] = 1;
        stack.emplace_back(next, 0);
      }
    }
  }
  return {};
}

}  // namespace mmgr
