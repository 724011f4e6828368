#include "mmgr/blob_store.hpp"

#include "mmgr/error.hpp"
#include "mmgr/sha256.hpp"

#include <atomic>
#include <fstream>
#include <sstream>
#include <system_error>
#include <thread>

#include <unistd.h>

namespace mmgr {

namespace fs = std::filesystem;

BlobRef blob_ref_of(std::string_view content) {
  return BlobRef{sha256_hex(content), content.size()};
}

BlobStore::BlobStore(fs::path root) : root_(std::move(root)) {
  std::error_code ec;
  fs::create_directories(root_, ec);
  if (ec) {
    fail(ErrorCode::corruption, "cannot create blob directory " + root_.string() + ": " + ec.message(),
         Json{{"retriable", true}});
  }
}

fs::path BlobStore::path_for(std::string_view hash) const {
  if (!is_sha256_hex(hash)) fail(ErrorCode::validation, "malformed blob hash: " + std::string(hash));
  return root_ / std::string(hash.substr(0, 2)) / std::string(hash.substr(2, 2)) / std::string(hash);
}

bool BlobStore::contains(std::string_view hash) const {
  return is_sha256_hex(hash) && fs::exists(path_for(hash));
}

BlobRef BlobStore::put(std::string_view content) {
  BlobRef ref = blob_ref_of(content);
  const fs::path target = path_for(ref.hash);
  if (fs::exists(target)) return ref;

  std::error_code ec;
  fs::create_directories(target.parent_path(), ec);
  if (ec) fail(ErrorCode::corruption, "blob store: " + ec.message(), Json{{"retriable", true}});

  static std::atomic<std::uint64_t> counter{0};
  std::ostringstream tmp_name;
  tmp_name << ref.hash << ".tmp." << ::getpid() << '.' << std::this_thread::get_id() << '.' << counter++;
  const fs::path tmp = target.parent_path() / tmp_name.str();
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) {
      fs::remove(tmp, ec);
      fail(ErrorCode::corruption, "blob store: write failed for " + ref.hash, Json{{"retriable", true}});
    }
  }
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp, ec);
    fail(ErrorCode::corruption, "blob store: rename failed for " + ref.hash, Json{{"retriable", true}});
  }
  return ref;
}

std::string BlobStore::get(std::string_view hash) const {
  const fs::path p = path_for(hash);
  std::ifstream in(p, std::ios::binary);
  if (!in) not_found("blob", hash);
  std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (sha256_hex(data) != hash) {
    fail(ErrorCode::corruption, "blob content does not match its hash: " + std::string(hash),
         Json{{"hash", hash}});
  }
  return data;
}

std::size_t BlobStore::count() const {
  std::size_t n = 0;
  for (const auto& e : fs::recursive_directory_iterator(root_)) {
    if (e.is_regular_file() && is_sha256_hex(e.path().filename().string())) ++n;
  }
  return n;
}

}  // namespace mmgr
