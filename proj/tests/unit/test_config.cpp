#include "../support.hpp"

#include <doctest.h>

#include <cstdlib>

using namespace mmgr;

TEST_CASE("configuration files") {
  const Config c = Config::parse(
      "# comment\n"
      "data_dir = /var/lib/mmgr\n"
      "port = 9000\n"
      "gate.epsilon = 0.02\n"
      "drift.lambda_factor = 30\n"
      "jobs.tuning_window = 250   # trailing comment\n"
      "jobs.worker_count = 0\n");
  CHECK(c.data_dir == "/var/lib/mmgr");
  CHECK(c.port == 9000);
  CHECK(c.gate.epsilon == 0.02);
  CHECK(c.drift.lambda_factor == 30.0);
  CHECK(c.jobs.tuning_window == 250);
  CHECK(c.jobs.worker_count == 0);
  CHECK(c.host == "127.0.0.1");

  try {
    Config::parse("port = 80\ncolour = blue\n");
    FAIL("unknown key accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::validation);
    CHECK(e.detail()["line"] == 2);
  }
  CHECK_THROWS_AS(Config::parse("port = eighty\n"), Error);
  CHECK_THROWS_AS(Config::parse("gate.epsilon = -1\n"), Error);
  CHECK_THROWS_AS(Config::parse("just words\n"), Error);
  CHECK_THROWS_AS(Config::load("/nonexistent/mmgr.conf"), Error);

  Config env;
  ::setenv("MMGR_DATA_DIR", "/tmp/elsewhere", 1);
  env.apply_environment();
  ::unsetenv("MMGR_DATA_DIR");
  CHECK(env.data_dir == "/tmp/elsewhere");
}
