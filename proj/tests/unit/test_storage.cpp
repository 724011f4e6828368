#include "../support.hpp"

#include "mmgr/sha256.hpp"

#include <doctest.h>

#include <fstream>

using namespace mmgr;
using namespace mmgr::testing;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an mmgr::Error");
  return ErrorCode::validation;
}

}  // namespace

TEST_CASE("sha256 known answers") {
  CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(is_sha256_hex(sha256_hex("x")));
  CHECK_FALSE(is_sha256_hex("ABC"));
}

TEST_CASE("csv parsing infers types and rejects ragged rows") {
  const Table t = parse_csv("a,b,c\r\n1,x,2.5\n-3,\"y,z\",1e3\n");
  REQUIRE(t.row_count == 2);
  CHECK(t.columns[0].type == ColumnType::Float);
  CHECK(t.columns[1].type == ColumnType::String);
  CHECK(t.columns[1].strings[1] == "y,z");
  CHECK(t.numeric("c")[1] == 1000.0);
  CHECK(parse_csv(to_csv(t)).columns[1].strings == t.columns[1].strings);

  try {
    parse_csv("a,b\n1,2\n3\n");
    FAIL("ragged row accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::schema);
    CHECK(e.detail()["row"] == 2);
  }
  CHECK(code_of([] { parse_csv("a,a\n1,2\n"); }) == ErrorCode::schema);
  CHECK(code_of([] { parse_csv(""); }) == ErrorCode::schema);
  CHECK(code_of([] { parse_csv("a\n\"open\n"); }) == ErrorCode::schema);
}

TEST_CASE("canonical payload round-trips bit for bit") {
  Xorshift64Star rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    Table t;
    t.row_count = 1 + rng.below(40);
    Column f{"f", ColumnType::Float, {}, {}};
    Column s{"s", ColumnType::String, {}, {}};
    for (std::size_t i = 0; i < t.row_count; ++i) {
      f.numbers.push_back((rng.uniform() - 0.5) * std::pow(10.0, static_cast<double>(rng.below(20)) - 10));
      s.strings.push_back(std::string(rng.below(5), static_cast<char>('a' + rng.below(26))) + "\"q\"");
    }
    t.columns = {f, s};
    const std::string payload = encode_canonical(t);
    const Table back = decode_canonical(payload);
    CHECK(encode_canonical(back) == payload);
    CHECK(back.numeric("f") == t.numeric("f"));
    const Table via_csv = parse_csv(to_csv(t));
    CHECK(via_csv.numeric("f") == t.numeric("f"));
  }
  CHECK(code_of([] { decode_canonical("MFSX...."); }) == ErrorCode::corruption);
}

TEST_CASE("blob store is content addressed and detects rot") {
  TempDir dir;
  BlobStore blobs(dir.path() / "blobs");
  const BlobRef a = blobs.put("hello");
  const BlobRef b = blobs.put("hello");
  CHECK(a == b);
  CHECK(a.hash == sha256_hex("hello"));
  CHECK(a.size == 5);
  CHECK(blobs.count() == 1);
  CHECK(blobs.get(a.hash) == "hello");
  CHECK(code_of([&] { blobs.get(sha256_hex("missing")); }) == ErrorCode::not_found);
  CHECK(code_of([&] { blobs.get("not-a-hash"); }) == ErrorCode::validation);

  std::ofstream(blobs.path_for(a.hash), std::ios::binary | std::ios::trunc) << "hellO";
  CHECK(code_of([&] { blobs.get(a.hash); }) == ErrorCode::corruption);
}

TEST_CASE("snapshots are immutable and identical content shares one blob") {
  Scratch s;
  auto& art = s.svc.artifacts();
  const Dataset d = art.create_dataset("sales", "");
  const Snapshot one = art.ingest_snapshot(d.id, "x,y\n1,2\n3,4\n");
  const Snapshot two = art.ingest_snapshot(d.id, "x,y\r\n1,2\r\n3,4\r\n", one.id);
  CHECK(one.id != two.id);
  CHECK(one.blob == two.blob);
  CHECK(two.parent == one.id);
  CHECK(art.get_dataset(d.id).snapshots == std::vector<std::string>{one.id, two.id});
  CHECK(art.latest_snapshot(d.id)->id == two.id);
  CHECK(art.materialize(one.id).numeric("y") == std::vector<double>{2, 4});

  CHECK(code_of([&] { art.create_dataset("sales", ""); }) == ErrorCode::state);
  CHECK(code_of([&] { art.create_dataset("", ""); }) == ErrorCode::validation);
  CHECK(code_of([&] { art.ingest_snapshot("ds-999999", "x\n1\n"); }) == ErrorCode::not_found);
  CHECK(code_of([&] { art.ingest_snapshot(d.id, "x\n1\n", std::string("snap-999999")); }) == ErrorCode::not_found);
  CHECK(code_of([&] { art.get_snapshot("snap-999999"); }) == ErrorCode::not_found);
}

TEST_CASE("deleting a dataset is refused while models or children depend on it") {
  Scratch s;
  auto& art = s.svc.artifacts();
  const ProcessSpec p = linear_process({1.0}, 0.0, 0.1);
  auto [d, snap] = seed_dataset(s.svc, "base", p, 50, 1);
  const Dataset other = art.create_dataset("other", "");
  const Snapshot child = art.ingest_snapshot(other.id, generate_training_csv(p, 10, 2), snap.id);
  CHECK(code_of([&] { art.delete_dataset(d.id); }) == ErrorCode::state);
  art.delete_dataset(other.id);
  CHECK(code_of([&] { art.get_snapshot(child.id); }) == ErrorCode::not_found);

  train(s.svc, "m", snap, p);
  CHECK(code_of([&] { art.delete_dataset(d.id); }) == ErrorCode::state);

  const Dataset free_ds = art.create_dataset("free", "");
  art.ingest_snapshot(free_ds.id, "x\n1\n");
  const std::size_t blobs_before = s.svc.store().blobs().count();
  art.delete_dataset(free_ds.id);
  CHECK(s.svc.store().blobs().count() == blobs_before);
  CHECK(code_of([&] { art.get_dataset(free_ds.id); }) == ErrorCode::not_found);
}

TEST_CASE("read-only access leaves the artifact fingerprint unchanged") {
  Scratch s;
  const ProcessSpec p = linear_process({1.0, -2.0}, 0.5, 0.1);
  auto [d, snap] = seed_dataset(s.svc, "d", p, 30, 3);
  const std::string before = s.svc.artifacts().fingerprint();
  s.svc.artifacts().materialize(snap.id);
  s.svc.artifacts().list_datasets();
  s.svc.artifacts().latest_snapshot(d.id);
  CHECK(s.svc.artifacts().fingerprint() == before);
}
