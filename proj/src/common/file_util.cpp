#include "fstore/file_util.hpp"

#include <atomic>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include "fstore/error.hpp"

namespace fstore {

namespace fsys = std::filesystem;

void atomic_write_file(const fsys::path& path, const std::string& content) {
  static std::atomic<unsigned> counter{0};
  std::error_code ec;
  if (!path.parent_path().empty()) fsys::create_directories(path.parent_path(), ec);
  if (ec) raise(ErrorKind::StoreIoError, "cannot create " + path.parent_path().string() + ": " + ec.message());

  fsys::path tmp = path;
  tmp += ".tmp-" + std::to_string(::getpid()) + "-" + std::to_string(counter.fetch_add(1));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) {
      fsys::remove(tmp, ec);
      raise(ErrorKind::StoreIoError, "write failed: " + tmp.string());
    }
  }
  fsys::rename(tmp, path, ec);
  if (ec) {
    fsys::remove(tmp, ec);
    raise(ErrorKind::StoreIoError, "rename failed: " + path.string());
  }
}

std::string read_file(const fsys::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(ErrorKind::StoreIoError, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace fstore
