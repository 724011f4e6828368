#include "../support.hpp"

#include "mmgr/cli.hpp"
#include "mmgr/http.hpp"
#include "mmgr/op_table.hpp"

#include <doctest.h>

#include <fstream>
#include <sstream>

using namespace mmgr;
using namespace mmgr::testing;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

struct Live {
  Scratch s;
  HttpServer server{s.svc};
  std::string endpoint;
  Live() { endpoint = "http://127.0.0.1:" + std::to_string(server.start("127.0.0.1", 0)); }

  Result run(std::vector<std::string> args, const std::string& format = "json") {
    args.insert(args.begin(), {"--endpoint", endpoint, "--format", format});
    return cli(std::move(args));
  }
  Json json(std::vector<std::string> args) {
    const Result r = run(std::move(args));
    REQUIRE_MESSAGE(r.code == 0, r.err);
    return Json::parse(r.out);
  }
};

}  // namespace

TEST_CASE("usage errors exit with 2 and help with 0") {
  CHECK(cli({"--help"}).code == 0);
  CHECK(cli({"dataset", "create", "--help"}).code == 0);
  CHECK(cli({"dataset", "create", "--nmae", "x"}).code == 2);
  CHECK(cli({"dataset", "frobnicate"}).code == 2);
  CHECK(cli({"--format", "xml", "dataset", "list"}).code == 2);
  CHECK(cli({"model", "train", "--name", "m", "--snapshot", "s", "--features", "a", "--target", "y", "--lambda",
             "lots"})
            .code == 2);
}

TEST_CASE("every operation has a command") {
  const auto cmds = cli_commands();
  const std::set<std::string> have(cmds.begin(), cmds.end());
  for (const auto& op : op_table()) {
    CHECK_MESSAGE(have.count(std::string(op.noun) + " " + std::string(op.verb)), op.name);
  }
  CHECK(have.count("serve"));
  CHECK(have.count("agent run"));
  CHECK(have.count("agent gen-csv"));
}

TEST_CASE("the CLI drives a full lifecycle against a live server") {
  Live live;
  TempDir files;
  const ProcessSpec p = linear_process({2.0, -1.0}, 1.0, 0.1, 3);
  const auto proc = files.path() / "process.json";
  std::ofstream(proc) << to_json(p).dump();

  const Result csv = live.run({"agent", "gen-csv", "--process", proc.string(), "--rows", "150", "--seed", "1"});
  REQUIRE(csv.code == 0);
  const auto csv_file = files.path() / "train.csv";
  std::ofstream(csv_file) << csv.out;

  const std::string ds = live.json({"dataset", "create", "--name", "base"})["id"];
  const std::string snap = live.json({"snapshot", "ingest", "--dataset", ds, "--file", csv_file.string()})["id"];
  const Json trained =
      live.json({"model", "train", "--name", "m", "--snapshot", snap, "--features", "x1,x2", "--target", "y"});
  const std::string model = trained["model"]["id"];
  CHECK(live.json({"model", "gate", "--id", model})["overall"] == true);
  CHECK(live.json({"model", "status", "--id", model, "--status", "validated"})["status"] == "validated");
  const std::string dep = live.json({"deployment", "create", "--model", model, "--target", "edge"})["id"];

  const Result agent = live.run({"agent", "run", "--deployment", dep, "--process", proc.string(), "--steps", "50",
                                 "--poll-interval", "10"});
  REQUIRE_MESSAGE(agent.code == 0, agent.err);
  CHECK(agent.out.find("\"summary\"") != std::string::npos);
  CHECK(live.json({"drift", "get", "--id", dep})["last_seq"] == 50);

  const Result table = live.run({"model", "list"}, "table");
  CHECK(table.code == 0);
  CHECK(table.out.rfind("id\tname\tversion\tstatus\n", 0) == 0);
  CHECK(table.out.find(model + "\tm\t1\tdeployed") != std::string::npos);

  const Result missing = live.run({"model", "get", "--id", "model-999999"});
  CHECK(missing.code == 1);
  CHECK(Json::parse(missing.err)["error"]["code"] == "not_found");

  const Result ref = live.run({"api", "reference"});
  CHECK(ref.out == api_reference());

  CHECK(cli({"--endpoint", "http://127.0.0.1:1", "dataset", "list"}).code == 1);
}
