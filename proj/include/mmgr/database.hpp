#pragma once

#include <cstdint>
#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>

struct sqlite3;
struct sqlite3_stmt;

namespace mmgr {

/// Thin RAII wrapper over a prepared SQLite statement. Column accessors use
/// zero-based indices; bind indices are one-based as in SQLite.
class Statement {
 public:
  Statement(sqlite3* db, std::string_view sql);
  ~Statement();
  Statement(Statement&& other) noexcept;
  Statement& operator=(Statement&&) = delete;
  Statement(const Statement&) = delete;

  Statement& bind(int index, std::string_view value);
  Statement& bind(int index, const std::string& value) { return bind(index, std::string_view(value)); }
  Statement& bind(int index, const char* value) { return bind(index, std::string_view(value)); }
  Statement& bind(int index, std::int64_t value);
  Statement& bind(int index, std::uint64_t value) { return bind(index, static_cast<std::int64_t>(value)); }
  Statement& bind(int index, int value) { return bind(index, static_cast<std::int64_t>(value)); }
  Statement& bind(int index, bool value) { return bind(index, static_cast<std::int64_t>(value ? 1 : 0)); }
  Statement& bind(int index, double value);
  Statement& bind(int index, std::nullopt_t);
  template <class T>
  Statement& bind(int index, const std::optional<T>& value) {
    return value ? bind(index, *value) : bind(index, std::nullopt);
  }

  /// Advances to the next row; false when done.
  bool step();

  std::string text(int col) const;
  std::optional<std::string> optional_text(int col) const;
  std::int64_t integer(int col) const;
  double real(int col) const;
  bool is_null(int col) const;

 private:
  sqlite3* db_;
  sqlite3_stmt* stmt_ = nullptr;
};

/// Single-file embedded relational store. One connection, guarded by a
/// recursive mutex: every public API call of the registry executes inside a
/// Transaction, so concurrent callers observe a serial order.
class Database {
 public:
  explicit Database(const std::filesystem::path& file);
  ~Database();
  Database(const Database&) = delete;
  Database& operator=(const Database&) = delete;

  void exec(std::string_view sql);

  template <class... Args>
  Statement query(std::string_view sql, const Args&... args) {
    Statement st(db_, sql);
    int i = 1;
    (st.bind(i++, args), ...);
    return st;
  }

  /// Executes a statement that returns no rows; returns rows changed.
  template <class... Args>
  int execute(std::string_view sql, const Args&... args) {
    auto st = query(sql, args...);
    st.step();
    return changes();
  }

  int changes() const;
  std::unique_lock<std::recursive_mutex> lock() { return std::unique_lock(mutex_); }

  /// Top-level transactions run BEGIN IMMEDIATE; nested ones become savepoints.
  /// Destruction without commit() rolls back.
  class Transaction {
   public:
    explicit Transaction(Database& db);
    ~Transaction();
    Transaction(const Transaction&) = delete;
    Transaction& operator=(const Transaction&) = delete;
    void commit();

   private:
    Database& db_;
    std::unique_lock<std::recursive_mutex> lock_;
    int depth_;
    bool done_ = false;
  };

 private:
  sqlite3* db_ = nullptr;
  std::recursive_mutex mutex_;
  int depth_ = 0;
};

}  // namespace mmgr
