#include "mmgr/database.hpp"

#include "mmgr/error.hpp"

#include <sqlite3.h>

#include <string>

namespace mmgr {

namespace {

[[noreturn]] void sqlite_fail(sqlite3* db, std::string_view what) {
  const int rc = db ? sqlite3_errcode(db) : SQLITE_ERROR;
  std::string msg = std::string(what) + ": " + (db ? sqlite3_errmsg(db) : "sqlite error");
  // Constraint violations come from callers racing on unique keys; the rest
  // are storage failures and worth retrying.
  if (rc == SQLITE_CONSTRAINT) fail(ErrorCode::state, msg);
  fail(ErrorCode::corruption, msg, Json{{"retriable", true}});
}

}  // namespace

Statement::Statement(sqlite3* db, std::string_view sql) : db_(db) {
  if (sqlite3_prepare_v2(db_, sql.data(), static_cast<int>(sql.size()), &stmt_, nullptr) != SQLITE_OK) {
    sqlite_fail(db_, "prepare");
  }
}

Statement::~Statement() {
  if (stmt_) sqlite3_finalize(stmt_);
}

Statement::Statement(Statement&& other) noexcept : db_(other.db_), stmt_(other.stmt_) {
  other.stmt_ = nullptr;
}

Statement& Statement::bind(int index, std::string_view value) {
  if (sqlite3_bind_text(stmt_, index, value.data(), static_cast<int>(value.size()), SQLITE_TRANSIENT) != SQLITE_OK) {
    sqlite_fail(db_, "bind");
  }
  return *this;
}

Statement& Statement::bind(int index, std::int64_t value) {
  if (sqlite3_bind_int64(stmt_, index, value) != SQLITE_OK) sqlite_fail(db_, "bind");
  return *this;
}

Statement& Statement::bind(int index, double value) {
  if (sqlite3_bind_double(stmt_, index, value) != SQLITE_OK) sqlite_fail(db_, "bind");
  return *this;
}

Statement& Statement::bind(int index, std::nullopt_t) {
  if (sqlite3_bind_null(stmt_, index) != SQLITE_OK) sqlite_fail(db_, "bind");
  return *this;
}

bool Statement::step() {
  const int rc = sqlite3_step(stmt_);
  if (rc == SQLITE_ROW) return true;
  if (rc == SQLITE_DONE) return false;
  sqlite_fail(db_, "step");
}

std::string Statement::text(int col) const {
  const auto* p = reinterpret_cast<const char*>(sqlite3_column_text(stmt_, col));
  if (!p) return {};
  return std::string(p, static_cast<std::size_t>(sqlite3_column_bytes(stmt_, col)));
}

std::optional<std::string> Statement::optional_text(int col) const {
  if (is_null(col)) return std::nullopt;
  return text(col);
}

std::int64_t Statement::integer(int col) const { return sqlite3_column_int64(stmt_, col); }

double Statement::real(int col) const { return sqlite3_column_double(stmt_, col); }

bool Statement::is_null(int col) const { return sqlite3_column_type(stmt_, col) == SQLITE_NULL; }

Database::Database(const std::filesystem::path& file) {
  if (sqlite3_open_v2(file.c_str(), &db_, SQLITE_OPEN_READWRITE | SQLITE_OPEN_CREATE | SQLITE_OPEN_FULLMUTEX,
                      nullptr) != SQLITE_OK) {
    std::string msg = db_ ? sqlite3_errmsg(db_) : "open failed";
    if (db_) sqlite3_close(db_);
    db_ = nullptr;
    fail(ErrorCode::corruption, "cannot open registry database " + file.string() + ": " + msg,
         Json{{"retriable", true}});
  }
  sqlite3_busy_timeout(db_, 5000);
  exec("PRAGMA journal_mode=WAL");
  exec("PRAGMA synchronous=NORMAL");
  exec("PRAGMA foreign_keys=ON");
}

Database::~Database() {
  if (db_) sqlite3_close(db_);
}

void Database::exec(std::string_view sql) {
  auto lk = lock();
  std::string s(sql);
  char* err = nullptr;
  if (sqlite3_exec(db_, s.c_str(), nullptr, nullptr, &err) != SQLITE_OK) {
    std::string msg = err ? err : "exec failed";
    sqlite3_free(err);
    fail(ErrorCode::corruption, "sql: " + msg, Json{{"retriable", true}});
  }
}

int Database::changes() const { return sqlite3_changes(db_); }

Database::Transaction::Transaction(Database& db) : db_(db), lock_(db.lock()), depth_(db.depth_) {
  if (depth_ == 0) {
    db_.exec("BEGIN IMMEDIATE");
  } else {
    db_.exec("SAVEPOINT sp" + std::to_string(depth_));
  }
  ++db_.depth_;
}

void Database::Transaction::commit() {
  if (done_) return;
  if (depth_ == 0) {
    db_.exec("COMMIT");
  } else {
    db_.exec("RELEASE sp" + std::to_string(depth_));
  }
  done_ = true;
  --db_.depth_;
}

Database::Transaction::~Transaction() {
  if (done_) return;
  --db_.depth_;
  try {
    if (depth_ == 0) {
      db_.exec("ROLLBACK");
    } else {
      const auto sp = "sp" + std::to_string(depth_);
      db_.exec("ROLLBACK TO " + sp);
      db_.exec("RELEASE " + sp);
    }
  } catch (...) {
    // Nothing sensible to do with a failed rollback inside a destructor.
  }
}

}  // namespace mmgr
