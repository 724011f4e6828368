#include "../support.hpp"

#include <doctest.h>

#include <fstream>
#include <sstream>

using namespace mmgr;
using namespace mmgr::testing;

namespace {

void node(Service& svc, const std::string& id) { svc.store().register_artifact(id, "snapshot"); }

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("link kinds parse and print") {
  for (LinkKind k : kAllLinkKinds) CHECK(parse_link_kind(to_string(k)) == k);
  CHECK_THROWS_AS(parse_link_kind("derived_from"), Error);
  CHECK(is_acyclic(LinkKind::base_of));
  CHECK(is_acyclic(LinkKind::tuned_from));
  CHECK(is_acyclic(LinkKind::newer_recording_of));
  CHECK_FALSE(is_acyclic(LinkKind::compatible_with));
}

TEST_CASE("cycle errors carry the closing path") {
  Scratch s;
  auto& g = s.svc.lineage();
  for (auto id : {"a", "b", "c"}) node(s.svc, id);
  g.add_link("a", "b", LinkKind::base_of);
  g.add_link("b", "c", LinkKind::base_of);
  try {
    g.add_link("c", "a", LinkKind::base_of);
    FAIL("cycle admitted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::cycle);
    CHECK(e.detail()["path"] == Json::array({"a", "b", "c", "a"}));
  }
  // the same pair is fine under a kind without the acyclicity rule
  g.add_link("c", "a", LinkKind::compatible_with);
  CHECK(g.has_link("a", "c", LinkKind::compatible_with));

  try {
    g.add_link("a", "b", LinkKind::base_of);
    FAIL("duplicate admitted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::state);
    CHECK(e.detail()["reason"] == "already_exists");
  }
  CHECK_THROWS_AS(g.add_link("a", "a", LinkKind::compatible_with), Error);
  CHECK_THROWS_AS(g.add_link("a", "zzz", LinkKind::base_of), Error);
}

TEST_CASE("connected honours depth and removal") {
  Scratch s;
  auto& g = s.svc.lineage();
  for (auto id : {"r", "x", "y", "z"}) node(s.svc, id);
  g.add_link("r", "x", LinkKind::base_of);
  g.add_link("x", "y", LinkKind::base_of);
  g.add_link("y", "z", LinkKind::base_of);
  CHECK(g.connected("r", LinkKind::base_of, 1) == std::vector<std::string>{"x"});
  CHECK(g.connected("r", LinkKind::base_of, 2) == std::vector<std::string>{"x", "y"});
  CHECK(g.connected("r", LinkKind::base_of) == std::vector<std::string>{"x", "y", "z"});
  g.remove_link("x", "y", LinkKind::base_of);
  CHECK(g.connected("r", LinkKind::base_of) == std::vector<std::string>{"x"});
  CHECK_THROWS_AS(g.remove_link("x", "y", LinkKind::base_of), Error);
  CHECK_THROWS_AS(g.connected("r", LinkKind::base_of, 0), Error);
}

TEST_CASE("random acyclic insertions agree with a DFS oracle") {
  Scratch s;
  auto& g = s.svc.lineage();
  constexpr int kNodes = 25;
  for (int i = 0; i < kNodes; ++i) node(s.svc, "n" + std::to_string(i));
  std::map<std::string, std::set<std::string>> adj;
  Xorshift64Star rng(99);
  for (int step = 0; step < 400; ++step) {
    const auto a = "n" + std::to_string(rng.below(kNodes));
    const auto b = "n" + std::to_string(rng.below(kNodes));
    if (a == b) continue;
    std::set<std::string> visited;
    const bool duplicate = adj[a].count(b) > 0;
    const bool closes = !duplicate && dfs_reaches(adj, b, a, visited);
    try {
      g.add_link(a, b, LinkKind::tuned_from);
      CHECK_FALSE(duplicate);
      CHECK_FALSE(closes);
      adj[a].insert(b);
    } catch (const Error& e) {
      CHECK(e.code() == (duplicate ? ErrorCode::state : ErrorCode::cycle));
      CHECK((duplicate || closes));
    }
  }
  CHECK_FALSE(dfs_has_cycle(adj));
  CHECK(g.find_cycle(LinkKind::tuned_from).empty());
}

TEST_CASE("lineage export matches the golden file") {
  Scratch s;
  auto& g = s.svc.lineage();
  for (auto id : {"snap-a", "snap-b", "snap-c", "model-1"}) node(s.svc, id);
  g.add_link("snap-a", "snap-b", LinkKind::compatible_with);
  g.add_link("snap-c", "snap-a", LinkKind::newer_recording_of, std::string("feedback"));
  g.add_link("snap-a", "snap-c", LinkKind::base_of);
  g.add_link("model-1", "snap-a", LinkKind::trained_on);
  const std::string text = g.export_text();

  const auto golden = std::filesystem::path(MMGR_FIXTURES) / "lineage_export.txt";
  if (std::getenv("MMGR_UPDATE_GOLDEN")) std::ofstream(golden, std::ios::binary) << text;
  CHECK(text == read_file(golden));
}
